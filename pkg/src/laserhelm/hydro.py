"""Barotropic Euler equations on the coarse grid with ponderomotive forcing.

Conserved variables are ``(N, N Ux, N Uy)`` with the isothermal closure
``P = N Te``, so ``Te`` is the squared sound speed in (micron/ps)**2.  One
step is an unsplit first-order finite-volume update with the local
Lax-Friedrichs flux.  The box is closed by reflecting walls, which makes the
mass flux through every wall face exactly zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .fields import GridSpec

__all__ = ["HydroError", "PlasmaState", "cfl_timestep", "hydro_step", "ponderomotive_source",
           "density_decompose", "total_mass"]

log = logging.getLogger(__name__)


class HydroError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PlasmaState:
    """Coarse-grid plasma state; arrays are ``(ncx, ncy)``."""

    N: np.ndarray
    Ux: np.ndarray
    Uy: np.ndarray
    Te: np.ndarray
    gamma_p: float
    hx: float
    hy: float

    def __post_init__(self):
        shape = np.shape(self.N)
        for name in ("Ux", "Uy", "Te"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), shape).copy()
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "N", np.asarray(self.N, dtype=float))
        if not all(np.isfinite(a).all() for a in (self.N, self.Ux, self.Uy, self.Te)):
            raise HydroError("plasma state has non-finite entries")
        if (self.N < 0).any():
            raise HydroError("negative density")
        if (self.Te <= 0).any():
            raise ValueError("Te must be positive")
        if self.hx <= 0 or self.hy <= 0:
            raise ValueError("cell sizes must be positive")

    @classmethod
    def at_rest(cls, N, Te, gamma_p: float, grid: GridSpec) -> "PlasmaState":
        N = np.asarray(N, dtype=float)
        if N.shape != (grid.ncx, grid.ncy):
            raise ValueError(f"density shape {N.shape} != {(grid.ncx, grid.ncy)}")
        return cls(N, 0.0, 0.0, Te, gamma_p, grid.hx, grid.hy)

    @property
    def h_fluid(self) -> float:
        return min(self.hx, self.hy)

    def max_signal_speed(self) -> float:
        speed = np.hypot(self.Ux, self.Uy) + np.sqrt(self.Te)
        smax = float(speed.max())
        if not np.isfinite(smax):
            raise HydroError("non-finite signal speed")
        return smax


def total_mass(state: PlasmaState) -> float:
    return float(state.N.sum() * state.hx * state.hy)


def cfl_timestep(state: PlasmaState, cfl: float = 0.5) -> float:
    """``cfl * h_fluid / max(|U| + sqrt(Te))``."""
    if not 0 < cfl <= 1:
        raise ValueError("cfl must lie in (0, 1]")
    return cfl * state.h_fluid / state.max_signal_speed()


def ponderomotive_source(state: PlasmaState, intensity: np.ndarray,
                         frozen_rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Momentum source ``-N gamma_p grad(I)`` from centred differences.

    Rows flagged in ``frozen_rows`` (absorbing layers and their neighbours)
    receive no force.
    """
    intensity = np.asarray(intensity, dtype=float)
    if intensity.shape != state.N.shape:
        raise ValueError("intensity and density shapes differ")
    if state.gamma_p == 0.0:
        z = np.zeros_like(state.N)
        return z, z.copy()
    gx = np.gradient(intensity, state.hx, axis=0) if intensity.shape[0] > 1 else np.zeros_like(intensity)
    gy = np.gradient(intensity, state.hy, axis=1) if intensity.shape[1] > 1 else np.zeros_like(intensity)
    sx = -state.gamma_p * state.N * gx
    sy = -state.gamma_p * state.N * gy
    if frozen_rows is not None:
        sx[:, frozen_rows] = 0.0
        sy[:, frozen_rows] = 0.0
    return sx, sy


def _llf_flux(qL, qR, TeL, TeR, axis_normal: int):
    """Local Lax-Friedrichs flux between left/right states ``q = (N, mx, my)``."""

    def phys(q, Te):
        N, mx, my = q
        un = (mx if axis_normal == 0 else my) / N
        f = np.empty_like(q)
        f[0] = N * un
        f[1] = mx * un
        f[2] = my * un
        f[1 + axis_normal] += N * Te
        return f, np.abs(un) + np.sqrt(Te)

    fL, aL = phys(qL, TeL)
    fR, aR = phys(qR, TeR)
    a = np.maximum(aL, aR)
    return 0.5 * (fL + fR) - 0.5 * a * (qR - qL)


def _with_walls(q: np.ndarray, Te: np.ndarray, axis: int):
    """Pad with one mirrored ghost cell on both ends; normal momentum flips sign."""
    pad = [(0, 0)] * q.ndim
    pad[axis + 1] = (1, 1)
    qg = np.pad(q, pad, mode="edge")
    idx_lo = [slice(None)] * q.ndim
    idx_hi = [slice(None)] * q.ndim
    idx_lo[0] = idx_hi[0] = 1 + axis
    idx_lo[axis + 1] = 0
    idx_hi[axis + 1] = -1
    qg[tuple(idx_lo)] *= -1.0
    qg[tuple(idx_hi)] *= -1.0
    Teg = np.pad(Te, [(1, 1) if d == axis else (0, 0) for d in range(Te.ndim)], mode="edge")
    return qg, Teg


def _divergence(q: np.ndarray, Te: np.ndarray, axis: int, h: float) -> np.ndarray:
    qg, Teg = _with_walls(q, Te, axis)
    n = q.shape[axis + 1]
    lo = [slice(None)] * q.ndim
    hi = [slice(None)] * q.ndim
    lo[axis + 1] = slice(0, n + 1)
    hi[axis + 1] = slice(1, n + 2)
    tlo = [slice(None)] * Te.ndim
    thi = [slice(None)] * Te.ndim
    tlo[axis] = slice(0, n + 1)
    thi[axis] = slice(1, n + 2)
    flux = _llf_flux(qg[tuple(lo)], qg[tuple(hi)], Teg[tuple(tlo)], Teg[tuple(thi)], axis)
    a = [slice(None)] * q.ndim
    b = [slice(None)] * q.ndim
    a[axis + 1] = slice(1, None)
    b[axis + 1] = slice(None, -1)
    return (flux[tuple(a)] - flux[tuple(b)]) / h


def hydro_step(state: PlasmaState, intensity: np.ndarray, dt: float,
               frozen_rows: np.ndarray | None = None) -> PlasmaState:
    """Advance the plasma by ``dt`` under the ponderomotive force of ``intensity``."""
    if not (dt > 0 and np.isfinite(dt)):
        raise ValueError("dt must be positive and finite")
    N = state.N
    if (N <= 0).any():
        raise HydroError("vacuum cells are not supported by the barotropic update")
    q = np.stack([N, N * state.Ux, N * state.Uy])
    rhs = -_divergence(q, state.Te, 0, state.hx) - _divergence(q, state.Te, 1, state.hy)
    sx, sy = ponderomotive_source(state, intensity, frozen_rows)
    rhs[1] += sx
    rhs[2] += sy
    qn = q + dt * rhs
    Nn = qn[0]
    if not np.isfinite(qn).all():
        raise HydroError("non-finite state after hydro step")
    if (Nn <= 0).any():
        i = np.unravel_index(np.argmin(Nn), Nn.shape)
        raise HydroError(f"non-positive density {Nn[i]:.3e} at coarse cell {i}; time step too large?")
    return replace(state, N=Nn, Ux=qn[1] / Nn, Uy=qn[2] / Nn)


def density_decompose(N_fine: np.ndarray, pml_rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split ``N(x, y) = N0(x) + deltaN(x, y)`` with ``N0`` the y-mean outside the PML rows."""
    N_fine = np.asarray(N_fine, dtype=float)
    if not np.isfinite(N_fine).all():
        raise ValueError("density has non-finite entries")
    rows = N_fine if pml_rows is None else N_fine[:, ~np.asarray(pml_rows, dtype=bool)]
    N0 = rows.mean(axis=1)
    delta = N_fine - N0[:, None]
    log.debug("max |deltaN| = %.3e", np.abs(delta).max() if delta.size else 0.0)
    return N0, delta
