"""Grid geometry, two-level meshes, PML profile and incoming beam profiles.

Fields are stored as ``(nx, ny)`` numpy arrays: column ``m`` is the
x-line ``u_m`` at height ``y_m``.  Both the Helmholtz (fine) and the fluid
(coarse) grids are cell centred; every coarse cell holds ``p0 x p0`` fine
cells.

The y-direction is split into three overlapping row ranges::

    [0, nb)            bottom subdomain (PML + a thin Helmholtz strip)
    [c0, c1)           central Helmholtz subdomain, c1 - c0 = 2**k - 1
    [t0, ny)           top subdomain (Helmholtz strip + PML)

with ``nb - c0 = c1 - t0 = overlap``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "GridSpec",
    "PmlProfile",
    "Speckle",
    "SpeckleSpec",
    "build_incoming_profile",
    "build_pml",
    "coarse_intensity",
    "interp_density_to_fine",
    "default_pml_strength",
]


def _is_block_count(n: int) -> bool:
    return n >= 1 and (n + 1) & n == 0


@dataclass(frozen=True)
class GridSpec:
    """Fine (Helmholtz) grid geometry and subdomain layout.

    Lengths are in microns.  ``pml_thickness`` is the number of fine rows in
    the bottom absorbing layer; the top layer has ``pml_thickness + pad_top``
    rows, the extra rows only serving to make ``ny`` divisible by ``p0``.
    """

    lambda0: float
    nx: int
    ny: int
    dx: float
    dy: float
    p0: int
    pml_thickness: int
    overlap: int = 2
    margin: int = 1
    pad_top: int = 0

    def __post_init__(self):
        if self.p0 < 2:
            raise ValueError("p0 must be >= 2")
        if self.nx % self.p0 or self.ny % self.p0:
            raise ValueError(f"nx={self.nx}, ny={self.ny} must be divisible by p0={self.p0}")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("grid steps must be positive")
        if self.dx > self.lambda0 / 10 * (1 + 1e-9) or self.dy > self.lambda0 / 10 * (1 + 1e-9):
            raise ValueError("fine steps must resolve lambda0/10")
        if self.overlap < 1:
            raise ValueError("overlap smaller than 1 row")
        if self.margin < 0 or self.pad_top < 0:
            raise ValueError("margin and pad_top must be non-negative")
        if self.pml_thickness < 3:
            raise ValueError("PML layer needs at least 3 rows")
        if not _is_block_count(self.n_central):
            raise ValueError(f"central row count {self.n_central} is not 2**k - 1")

    # -- construction -------------------------------------------------------

    @classmethod
    def build(
        cls,
        lambda0: float,
        lx: float,
        ly: float,
        ppw: float = 10.0,
        p0: int = 5,
        pml_wavelengths: float = 3.0,
        overlap: int = 2,
        margin: int = 1,
        mode: str = "fit",
    ) -> "GridSpec":
        """Lay out a grid for an ``lx x ly`` physical box (PML not included).

        ``mode="fit"`` shrinks ``dy`` so that the central row count is exactly
        ``2**k - 1``; ``mode="pad"`` keeps ``dy = lambda0/ppw`` and extends the
        box at the top instead.
        """
        h = lambda0 / ppw
        nx = p0 * math.ceil(lx / h / p0 - 1e-9)
        dx = lx / nx
        needed = max(math.ceil(ly / h - 1e-9) - 2 * margin, 1)
        k = max(1, math.ceil(math.log2(needed + 1) - 1e-12))
        nc = 2**k - 1
        if mode == "fit":
            dy = ly / (nc + 2 * margin)
        elif mode == "pad":
            dy = h
        else:
            raise ValueError(f"unknown layout mode {mode!r}")
        npml = max(3, int(round(pml_wavelengths * lambda0 / dy)))
        base = 2 * npml + 2 * margin + nc
        pad = (-base) % p0
        return cls(lambda0, nx, base + pad, dx, dy, p0, npml, overlap, margin, pad)

    # -- derived geometry ---------------------------------------------------

    @property
    def eps(self) -> float:
        return self.lambda0 / (2 * math.pi)

    @property
    def k0(self) -> float:
        return 1.0 / self.eps

    @property
    def n_central(self) -> int:
        return self.ny - 2 * self.pml_thickness - self.pad_top - 2 * self.margin

    @property
    def levels(self) -> int:
        return int(round(math.log2(self.n_central + 1)))

    @property
    def pml_top(self) -> int:
        return self.pml_thickness + self.pad_top

    @property
    def c0(self) -> int:
        return self.pml_thickness + self.margin

    @property
    def c1(self) -> int:
        return self.c0 + self.n_central

    @property
    def nb(self) -> int:
        return self.c0 + self.overlap

    @property
    def t0(self) -> int:
        return self.c1 - self.overlap

    @property
    def nt(self) -> int:
        return self.ny - self.t0

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def lx(self) -> float:
        return self.nx * self.dx

    @property
    def ly(self) -> float:
        return self.ny * self.dy

    @property
    def physical_y(self) -> tuple[float, float]:
        """y-interval outside both absorbing layers."""
        return self.pml_thickness * self.dy, (self.ny - self.pml_top) * self.dy

    @property
    def pml_mask(self) -> np.ndarray:
        """Boolean row mask, True on absorbing-layer rows."""
        mask = np.zeros(self.ny, dtype=bool)
        mask[: self.pml_thickness] = True
        mask[self.ny - self.pml_top:] = True
        return mask

    @property
    def ncx(self) -> int:
        return self.nx // self.p0

    @property
    def ncy(self) -> int:
        return self.ny // self.p0

    @property
    def hx(self) -> float:
        return self.p0 * self.dx

    @property
    def hy(self) -> float:
        return self.p0 * self.dy

    @property
    def h_fluid(self) -> float:
        return min(self.hx, self.hy)

    @property
    def coarse_x(self) -> np.ndarray:
        return (np.arange(self.ncx) + 0.5) * self.hx

    @property
    def coarse_y(self) -> np.ndarray:
        return (np.arange(self.ncy) + 0.5) * self.hy

    @property
    def coarse_pml_mask(self) -> np.ndarray:
        """True on coarse rows touching an absorbing layer."""
        return self.pml_mask.reshape(self.ncy, self.p0).any(axis=1)


# ---------------------------------------------------------------------------
# PML

@dataclass(frozen=True)
class PmlProfile:
    """Damping ``sigma`` and stretch ``eta = 1/(1 + i sigma/k0)`` per row.

    ``*_faces`` hold the same quantities on the ``ny + 1`` horizontal faces;
    face ``m`` lies below row ``m``.
    """

    sigma: np.ndarray
    eta: np.ndarray
    sigma_faces: np.ndarray
    eta_faces: np.ndarray


def default_pml_strength(thickness: float, order: int = 2, reflection: float = 1e-4) -> float:
    """Peak damping giving ``reflection`` at normal incidence for a layer of ``thickness`` microns."""
    return (order + 1) * math.log(1.0 / reflection) / (2.0 * thickness)


def _depth(y: np.ndarray, lo_edge: float, hi_edge: float) -> tuple[np.ndarray, np.ndarray]:
    return np.clip(lo_edge - y, 0.0, None), np.clip(y - hi_edge, 0.0, None)


def build_pml(grid: GridSpec, strength: float | None = None, order: int = 2) -> PmlProfile:
    """Polynomial PML ramp ``sigma = strength * (d/D)**order`` on both y-ends."""
    d_bot = grid.pml_thickness * grid.dy
    d_top = grid.pml_top * grid.dy
    lam = grid.lambda0
    if not (2 * lam * (1 - 1e-9) <= d_bot <= 4 * lam * (1 + 1e-9)):
        raise ValueError(f"PML depth {d_bot / lam:.2f} wavelengths outside [2, 4]")
    if strength is None:
        strength = default_pml_strength(d_bot, order)
    if strength <= 0:
        raise ValueError("PML strength must be positive")
    if order < 1:
        raise ValueError("PML ramp order must be >= 1")

    lo, hi = grid.physical_y

    def sigma_at(y):
        db, dt = _depth(y, lo, hi)
        return strength * ((db / d_bot) ** order + (dt / d_top) ** order)

    sigma = sigma_at(grid.y)
    sigma_f = sigma_at(np.arange(grid.ny + 1) * grid.dy)
    k0 = grid.k0
    return PmlProfile(
        sigma=sigma,
        eta=1.0 / (1.0 + 1j * sigma / k0),
        sigma_faces=sigma_f,
        eta_faces=1.0 / (1.0 + 1j * sigma_f / k0),
    )


# ---------------------------------------------------------------------------
# Incoming beam

@dataclass(frozen=True)
class Speckle:
    center: float
    width: float
    amplitude: float = 1.0
    phase: float = 0.0


@dataclass(frozen=True)
class SpeckleSpec:
    """Gaussian hot spots on the x = 0 boundary and the incidence angle (radians)."""

    speckles: Sequence[Speckle] = field(default_factory=tuple)
    theta: float = 0.0


def build_incoming_profile(spec: SpeckleSpec, grid: GridSpec, cutoff: float = 1e-12,
                           y: np.ndarray | None = None) -> np.ndarray:
    """Boundary trace ``alpha_in(y)`` sampled on the fine rows (or on ``y`` if given)."""
    y = grid.y if y is None else np.asarray(y, dtype=float)
    lo, hi = grid.physical_y
    alpha = np.zeros(y.size, dtype=complex)
    for s in spec.speckles:
        if s.width <= 0:
            raise ValueError("speckle width must be positive")
        if not (0.0 < s.center < grid.ly):
            raise ValueError(f"speckle center {s.center} outside (0, {grid.ly})")
        if s.center < lo or s.center > hi:
            raise ValueError(f"speckle center {s.center} lies inside a PML layer")
        alpha += s.amplitude * np.exp(-((y - s.center) / s.width) ** 2) * np.exp(1j * s.phase)
    alpha[np.abs(alpha) < cutoff] = 0.0
    return alpha


# ---------------------------------------------------------------------------
# Grid coupling

def coarse_intensity(psi: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Mean of ``|psi|**2`` over each ``p0 x p0`` block; PML rows count as zero."""
    if psi.shape != (grid.nx, grid.ny):
        raise ValueError(f"field shape {psi.shape} != {(grid.nx, grid.ny)}")
    inten = np.abs(psi) ** 2
    inten[:, grid.pml_mask] = 0.0
    p = grid.p0
    return inten.reshape(grid.ncx, p, grid.ncy, p).mean(axis=(1, 3))


def _interp_matrix(fine: np.ndarray, coarse: np.ndarray) -> sparse.csr_matrix:
    """Linear-interpolation weights (len(fine), len(coarse)), clamped at the ends."""
    rows = np.arange(fine.size)
    if coarse.size == 1:
        return sparse.csr_matrix((np.ones(fine.size), (rows, np.zeros_like(rows))), shape=(fine.size, 1))
    pos = np.interp(fine, coarse, np.arange(coarse.size, dtype=float))
    i0 = np.minimum(np.floor(pos).astype(int), coarse.size - 2)
    t = pos - i0
    data = np.concatenate([1.0 - t, t])
    cols = np.concatenate([i0, i0 + 1])
    return sparse.csr_matrix((data, (np.tile(rows, 2), cols)), shape=(fine.size, coarse.size))


def interp_density_to_fine(n_coarse: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Bilinear interpolation from coarse cell centres to fine cell centres."""
    if n_coarse.shape != (grid.ncx, grid.ncy):
        raise ValueError(f"coarse shape {n_coarse.shape} != {(grid.ncx, grid.ncy)}")
    wx = _interp_matrix(grid.x, grid.coarse_x)
    wy = _interp_matrix(grid.y, grid.coarse_y)
    return np.asarray((wy @ (wx @ n_coarse).T).T)
