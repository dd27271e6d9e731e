"""Run configuration: nested dataclasses read from and written to INI text.

Every section maps onto one dataclass and every key onto one field, so a
config written by :func:`dump_config` reads back identically.  Lists are
comma separated; speckles are ``center width amplitude phase`` groups
separated by semicolons, with centers measured from the lower edge of the
physical box.  Lengths are in microns, times in picoseconds.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..assembly import C_LIGHT
from ..fields import GridSpec, Speckle, SpeckleSpec, build_incoming_profile

__all__ = [
    "GridConfig", "DensityConfig", "LaserConfig", "PhysicsConfig", "SolverConfig",
    "RunConfig", "ZoneConfig", "SimConfig", "load_config", "dump_config", "parse_config",
    "ConfigError",
]


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    lambda0: float = 0.351
    lx: float = 3.51
    ly: float = 7.02
    ppw: float = 10.0
    p0: int = 5
    pml_wavelengths: float = 3.0
    overlap: int = 2
    margin: int = 1
    layout: str = "fit"

    def build(self) -> GridSpec:
        return GridSpec.build(self.lambda0, self.lx, self.ly, self.ppw, self.p0,
                              self.pml_wavelengths, self.overlap, self.margin, self.layout)


@dataclass
class DensityConfig:
    """Piecewise-linear initial profile ``N0(x)`` through the breakpoints."""

    x: list[float] = field(default_factory=lambda: [0.0, 3.51])
    n: list[float] = field(default_factory=lambda: [0.1, 0.5])

    def __post_init__(self):
        if len(self.x) != len(self.n) or len(self.x) < 1:
            raise ConfigError("density breakpoints x and n must have equal, non-zero length")
        if any(b <= a for a, b in zip(self.x, self.x[1:])):
            raise ConfigError("density breakpoints must be strictly increasing")
        if any(v < 0 for v in self.n):
            raise ConfigError("densities must be non-negative")

    def profile(self, x: np.ndarray) -> np.ndarray:
        return np.interp(x, self.x, self.n)


@dataclass
class LaserConfig:
    theta_deg: float = 0.0
    # (center, width, amplitude, phase) per speckle; centers measured from
    # the lower edge of the physical box (PML excluded)
    speckles: list[tuple[float, float, float, float]] = field(default_factory=lambda: [(3.51, 0.7, 1.0, 0.0)])

    def spec(self, grid: GridSpec) -> SpeckleSpec:
        y0 = grid.physical_y[0]
        return SpeckleSpec(tuple(Speckle(c + y0, w, a, p) for c, w, a, p in self.speckles),
                           math.radians(self.theta_deg))


@dataclass
class PhysicsConfig:
    gamma_p: float = 0.01
    nu_c: float = 1.0 / 15.0
    te: float = 0.09
    c: float = C_LIGHT
    cfl: float = 0.5


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int = 100
    pml_strength: float | None = None
    pml_order: int = 2
    alpha_robin: float | None = None
    dispersion_correction: bool = True
    eig_method: str = "auto"


@dataclass
class RunConfig:
    n_steps: int = 5
    output_every: int = 1
    threads: int = 1
    output_dir: str = "run"
    checkpoint_every: int = 0


@dataclass
class ZoneConfig:
    paraxial_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.paraxial_fraction < 1.0:
            raise ConfigError("paraxial_fraction must lie in [0, 1)")


@dataclass
class SimConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    density: DensityConfig = field(default_factory=DensityConfig)
    laser: LaserConfig = field(default_factory=LaserConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunConfig = field(default_factory=RunConfig)
    zones: ZoneConfig = field(default_factory=ZoneConfig)

    def validate(self) -> GridSpec:
        """Check cross-section constraints and return the grid."""
        if self.run.n_steps < 0 or self.run.output_every < 1 or self.run.threads < 1:
            raise ConfigError("n_steps >= 0, output_every >= 1 and threads >= 1 required")
        if not 0 < self.solver.tol < 1 or self.solver.max_iter < 1:
            raise ConfigError("solver tol must lie in (0, 1) and max_iter >= 1")
        if self.physics.te <= 0 or not 0 < self.physics.cfl <= 1:
            raise ConfigError("te > 0 and cfl in (0, 1] required")
        try:
            grid = self.grid.build()
            build_incoming_profile(self.laser.spec(grid), grid)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.density.profile(np.array([0.0]))[0] >= 1.0:
            raise ConfigError("density at the incoming boundary must be below critical")
        return grid


# ---------------------------------------------------------------------------
# INI text

_SECTIONS = ("grid", "density", "laser", "physics", "solver", "run", "zones")


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        if value and isinstance(value[0], tuple):
            return "; ".join(" ".join(repr(float(v)) for v in item) for item in value)
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _parse(text: str, default, name: str):
    text = text.strip()
    try:
        if text.lower() == "none":
            return None
        if isinstance(default, bool):
            if text.lower() in ("true", "yes", "on", "1"):
                return True
            if text.lower() in ("false", "no", "off", "0"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return float(text)
        if isinstance(default, list):
            if default and isinstance(default[0], tuple):
                groups = [g.split() for g in text.split(";") if g.strip()]
                out = []
                for g in groups:
                    vals = [float(v) for v in g]
                    if not 2 <= len(vals) <= 4:
                        raise ValueError(g)
                    vals += [1.0, 0.0][len(vals) - 2:]
                    out.append(tuple(vals))
                return out
            return [float(v) for v in text.split(",") if v.strip()]
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def parse_config(text: str) -> SimConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string(text)
    unknown = set(cp.sections()) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for sec in _SECTIONS:
        proto = getattr(SimConfig(), sec)
        kwargs = {}
        if cp.has_section(sec):
            names = {f.name for f in dataclasses.fields(proto)}
            for key, raw in cp.items(sec):
                if key not in names:
                    raise ConfigError(f"unknown key {sec}.{key}")
                kwargs[key] = _parse(raw, getattr(proto, key), f"{sec}.{key}")
        parts[sec] = type(proto)(**kwargs)
    return SimConfig(**parts)


def load_config(path) -> SimConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: SimConfig, path=None) -> str:
    lines = []
    for sec in _SECTIONS:
        lines.append(f"[{sec}]")
        for f in dataclasses.fields(getattr(cfg, sec)):
            lines.append(f"{f.name} = {_fmt(getattr(getattr(cfg, sec), f.name))}")
        lines.append("")
    text = "\n".join(lines)
    if path is not None:
        Path(path).write_text(text)
    return text
