"""Scaling measurements: wall time per GMRES iteration versus thread count.

The fixed-size sweep solves the first time step of one configuration with
each thread count.  The grown-size sweep doubles the box in x and y (four
times the cells) while multiplying the thread count by four.
"""

from __future__ import annotations

import copy
import csv
import time
from dataclasses import dataclass

import numpy as np

from ..spectral import blocked_matmul
from .config import SimConfig
from .simulation import Simulation

__all__ = ["BenchRow", "run_benchmark", "write_bench_csv", "matmul_efficiency", "time_step_solve"]


@dataclass
class BenchRow:
    sweep: str
    threads: int
    nx: int
    ny: int
    unknowns: int
    iterations: int
    seconds: float
    per_iteration: float
    efficiency: float


def time_step_solve(cfg: SimConfig, threads: int, repeats: int = 1) -> tuple[int, int, int, int, float]:
    """Best-of-``repeats`` wall time of the first-step GMRES solve."""
    cfg = copy.deepcopy(cfg)
    cfg.run.threads = threads
    sim = Simulation(cfg)
    prob = sim.prepare()
    sim.solve(prob)  # warm-up: caches, thread pool start
    best = np.inf
    iters = 0
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = sim.solve(prob)
        best = min(best, time.perf_counter() - t0)
        iters = res.iterations
    w = sim.zones.wave
    return w.nx, w.ny, prob.system.n, iters, best


def run_benchmark(cfg: SimConfig, threads=(1, 2, 4, 8), repeats: int = 1, grown: bool = True) -> list[BenchRow]:
    rows: list[BenchRow] = []
    base = None
    for p in threads:
        nx, ny, n, it, sec = time_step_solve(cfg, p, repeats)
        per = sec / max(it, 1)
        base = per if base is None else base
        eff = base * threads[0] / (per * p)
        rows.append(BenchRow("fixed", p, nx, ny, n, it, sec, per, eff))
    if grown:
        p = threads[0]
        cur = copy.deepcopy(cfg)
        first = None
        while p <= max(threads):
            nx, ny, n, it, sec = time_step_solve(cur, p, repeats)
            per = sec / max(it, 1)
            first = per if first is None else first
            # ratio to the smallest problem, reported in the efficiency column
            rows.append(BenchRow("grown", p, nx, ny, n, it, sec, per, per / first))
            p *= 4
            cur.grid.lx *= 2
            cur.grid.ly *= 2
            cur.density.x = [2 * v for v in cur.density.x]
            cur.laser.speckles = [(2 * c, w, a, ph) for c, w, a, ph in cur.laser.speckles]
    return rows


def write_bench_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep", "threads", "nx", "ny", "unknowns", "iterations", "seconds",
                    "seconds_per_iteration", "efficiency_or_ratio"])
        for r in rows:
            w.writerow([r.sweep, r.threads, r.nx, r.ny, r.unknowns, r.iterations, f"{r.seconds:.6f}",
                        f"{r.per_iteration:.6f}", f"{r.efficiency:.4f}"])


def matmul_efficiency(nx: int, ny: int, threads: int, repeats: int = 3, seed: int = 0) -> tuple[float, float, float]:
    """Parallel efficiency of the blocked ``Q @ F`` transform: ``(t1, tp, t1/(p tp))``."""
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((nx, nx)) + 1j * rng.standard_normal((nx, nx))
    f = rng.standard_normal((nx, ny)) + 1j * rng.standard_normal((nx, ny))

    def best(workers):
        t = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            blocked_matmul(q, f, workers=workers)
            t = min(t, time.perf_counter() - t0)
        return t

    t1 = best(1)
    tp = best(threads)
    return t1, tp, t1 / (threads * tp)
