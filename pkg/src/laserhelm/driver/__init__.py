"""Configuration, time loop, outputs and benchmarks."""

from .bench import run_benchmark, write_bench_csv
from .config import SimConfig, dump_config, load_config, parse_config
from .io import emit_field_map, read_fld, read_pgm
from .simulation import Simulation, run_simulation, solve_stationary

__all__ = [
    "SimConfig", "load_config", "dump_config", "parse_config",
    "Simulation", "run_simulation", "solve_stationary", "run_benchmark", "write_bench_csv",
    "emit_field_map", "read_fld", "read_pgm",
]
