"""Command line: ``laserhelm run|bench|validate <config>``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import run_benchmark, write_bench_csv
from .config import ConfigError, load_config
from .simulation import SimulationError, run_simulation

__all__ = ["main", "build_parser"]


def _threads(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad thread list {text!r}") from exc
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("thread counts must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="laserhelm", description="Coupled laser/plasma wave solver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the coupled time loop")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=None, help="run directory (overrides run.output_dir)")
    run.add_argument("--restart", type=Path, default=None, help="checkpoint to resume from")

    bench = sub.add_parser("bench", help="thread scaling sweeps")
    bench.add_argument("config", type=Path)
    bench.add_argument("--threads", type=_threads, default=[1, 2, 4, 8])
    bench.add_argument("--repeats", type=int, default=1)
    bench.add_argument("--no-grown", action="store_true", help="skip the grown-size sweep")
    bench.add_argument("--out", type=Path, default=None)

    val = sub.add_parser("validate", help="check a config without solving")
    val.add_argument("config", type=Path)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            grid = cfg.validate()
            print(f"ok: nx={grid.nx} ny={grid.ny} central={grid.n_central} (k={grid.levels}) "
                  f"pml={grid.pml_thickness}/{grid.pml_top} rows, "
                  f"coarse {grid.ncx}x{grid.ncy}, steps={cfg.run.n_steps}")
            return 0
        if args.command == "run":
            sim = run_simulation(cfg, args.out, args.restart)
            for r in sim.records:
                print(f"step {r.step:4d}  t={r.time:.4g} ps  gmres={r.iterations:3d}  "
                      f"res={r.residual:.2e}  max|dN|={r.max_delta_n:.3e}")
            return 0 if all(r.converged for r in sim.records) else 2
        if args.command == "bench":
            out = Path(cfg.run.output_dir) if args.out is None else args.out
            out.mkdir(parents=True, exist_ok=True)
            rows = run_benchmark(cfg, args.threads, args.repeats, grown=not args.no_grown)
            write_bench_csv(rows, out / "bench.csv")
            for r in rows:
                print(f"{r.sweep:5s} threads={r.threads:2d} n={r.unknowns:9d} iters={r.iterations:3d} "
                      f"s/iter={r.per_iteration:.4f} eff/ratio={r.efficiency:.3f}")
            return 0
    except (ConfigError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
