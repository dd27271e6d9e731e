"""Paraxial envelope model marched along x.

With ``psi = E exp(i K.x / eps)`` and ``|K|**2 = 1 - N_av`` the steady
envelope equation reads

    2i Kx dE/dx = -i nu E - eps d2E/dy2 + (N - N_av)/eps E - 2i Ky dE/dy,

which is advanced by Crank-Nicolson steps in x; each step is one tridiagonal
solve in y.  The transverse ends are closed by zero Dirichlet values behind a
multiplicative sponge, or made periodic for plane-wave checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .fields import GridSpec, _interp_matrix

__all__ = ["ParaxialState", "paraxial_march", "march_envelope", "cn_symbol", "couple_to_helmholtz",
           "sponge_profile"]


@dataclass(frozen=True)
class ParaxialState:
    """Envelope ``E`` (x-stations, rows) at positions ``x`` with carrier ``K``."""

    E: np.ndarray
    x: np.ndarray
    y: np.ndarray
    K: tuple[float, float]
    N_av: float

    def __post_init__(self):
        if math.hypot(*self.K) > 1.0 + 1e-12:
            raise ValueError("|K| must not exceed 1")
        if not np.isfinite(self.E).all():
            raise ArithmeticError("paraxial envelope has non-finite entries")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.E) ** 2

    @property
    def E_out(self) -> np.ndarray:
        return self.E[-1]


def sponge_profile(y: np.ndarray, mask: np.ndarray, reflection: float = 1e-4) -> np.ndarray:
    """Quadratic damping rate (per unit x) rising to the outer edges of the masked rows."""
    rate = np.zeros(y.size)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return rate
    inner = y[~mask]
    lo, hi = (inner.min(), inner.max()) if inner.size else (y.min(), y.max())
    depth = np.where(y < lo, lo - y, np.where(y > hi, y - hi, 0.0))
    width = max(depth.max(), 1e-300)
    return 3.0 * math.log(1.0 / reflection) / width * (depth / width) ** 2


def _bands(N: np.ndarray, N_av: float, nu, K, eps: float, dy: float):
    """Tridiagonal coefficients of the x-derivative operator ``L`` with ``dE/dx = L E``."""
    kx, ky = K
    c = 1.0 / (2j * kx)
    diag = c * (-1j * nu + (N - N_av) / eps + 2.0 * eps / dy**2)
    lower = np.full(N.shape, c * (-eps / dy**2 + 1j * ky / dy))
    upper = np.full(N.shape, c * (-eps / dy**2 - 1j * ky / dy))
    return lower, diag, upper


def cn_symbol(q: float, dy: float, dx: float, K, eps: float, nu: float = 0.0) -> complex:
    """Per-step amplification of the mode ``exp(i q y)`` on a uniform periodic slab."""
    kx, ky = K
    d2 = -4.0 / dy**2 * math.sin(0.5 * q * dy) ** 2
    d1 = 1j * math.sin(q * dy) / dy
    ell = (-1j * nu - eps * d2 - 2j * ky * d1) / (2j * kx)
    return (1.0 + 0.5 * dx * ell) / (1.0 - 0.5 * dx * ell)


def march_envelope(E_in: np.ndarray, N: np.ndarray, y: np.ndarray, steps: np.ndarray, K,
                   eps: float, N_av: float, nu=0.0, damping: np.ndarray | None = None,
                   periodic: bool = False) -> np.ndarray:
    """March ``E_in`` through ``len(steps)`` Crank-Nicolson steps.

    ``N`` holds one density row per station, shape ``(len(steps) + 1, ny)``,
    the first row being the density at the starting face.  ``nu`` is a scalar
    or an array of the same shape.  Returns the envelopes at every station.
    """
    kx, _ = K
    if kx <= 0:
        raise ValueError("marching needs Kx > 0")
    E_in = np.asarray(E_in, dtype=complex)
    N = np.asarray(N, dtype=float)
    steps = np.asarray(steps, dtype=float)
    ny = y.size
    if E_in.shape != (ny,) or N.shape != (steps.size + 1, ny):
        raise ValueError("E_in / N shapes do not match the transverse grid and step count")
    nu = np.broadcast_to(np.asarray(nu, dtype=float), N.shape)
    dy = float(y[1] - y[0]) if ny > 1 else 1.0
    out = np.empty((steps.size + 1, ny), dtype=complex)
    out[0] = E_in
    E = E_in.copy()
    for n, h in enumerate(steps):
        Nm = 0.5 * (N[n] + N[n + 1])
        num = 0.5 * (nu[n] + nu[n + 1])
        lo, di, up = _bands(Nm, N_av, num, K, eps, dy)
        # explicit half: (I + h/2 L) E
        rhs = E + 0.5 * h * di * E
        rhs[1:] += 0.5 * h * lo[1:] * E[:-1]
        rhs[:-1] += 0.5 * h * up[:-1] * E[1:]
        if periodic:
            rhs[0] += 0.5 * h * lo[0] * E[-1]
            rhs[-1] += 0.5 * h * up[-1] * E[0]
            A = sparse.diags([-0.5 * h * lo[1:], 1.0 - 0.5 * h * di, -0.5 * h * up[:-1]], [-1, 0, 1],
                             format="lil")
            A[0, ny - 1] = -0.5 * h * lo[0]
            A[ny - 1, 0] = -0.5 * h * up[-1]
            E = splu(A.tocsc()).solve(rhs)
        else:
            ab = np.zeros((3, ny), dtype=complex)
            ab[0, 1:] = -0.5 * h * up[:-1]
            ab[1] = 1.0 - 0.5 * h * di
            ab[2, :-1] = -0.5 * h * lo[1:]
            E = solve_banded((1, 1), ab, rhs)
        if damping is not None:
            E = E * np.exp(-damping * h)
        out[n + 1] = E
    return out


def paraxial_march(E_in: np.ndarray, N: np.ndarray, grid: GridSpec, nu=0.0, theta: float = 0.0,
                   N_av: float | None = None, level: str = "coarse", n_columns: int | None = None,
                   periodic: bool = False, sponge: bool = True, end_face: bool = False) -> ParaxialState:
    """March the incoming trace ``E_in`` across the first ``n_columns`` cells of ``grid``.

    ``level`` selects the coarse (fluid) or fine (wave) cell centres; ``N``
    and ``nu`` are given at those centres, shape ``(n_columns, ny)``.  The
    march starts at the x = 0 face and the stored stations are the cell
    centres.  ``N_av`` defaults to the mean of the first column over the
    physical rows.  With ``end_face`` one extra half step reaches the right
    face of the last cell, where the trace is handed to the wave solver.
    """
    if level == "coarse":
        xs, y, mask = grid.coarse_x, grid.coarse_y, grid.coarse_pml_mask
    elif level == "fine":
        xs, y, mask = grid.x, grid.y, grid.pml_mask
    else:
        raise ValueError(f"unknown level {level!r}")
    n_columns = xs.size if n_columns is None else n_columns
    xs = xs[:n_columns]
    N = np.asarray(N, dtype=float)
    if N.shape != (n_columns, y.size):
        raise ValueError(f"density shape {N.shape} != {(n_columns, y.size)}")
    if N_av is None:
        N_av = float(N[0, ~mask].mean()) if (~mask).any() else float(N[0].mean())
    if N_av >= 1.0:
        raise ValueError("reference density must be below critical")
    k = math.sqrt(1.0 - N_av)
    K = (k * math.cos(theta), k * math.sin(theta))
    if K[0] <= 0:
        raise ValueError("marching needs Kx > 0")
    h = grid.hx if level == "coarse" else grid.dx
    nu = np.asarray(nu, dtype=float)
    if end_face:
        xs = np.append(xs, n_columns * h)
        N = np.vstack([N, N[-1:]])
        nu = np.vstack([nu, nu[-1:]]) if nu.ndim == 2 else nu
    steps = np.diff(np.concatenate([[0.0], xs]))
    Nst = np.vstack([N[:1], N])
    nust = np.vstack([nu[:1], nu]) if nu.ndim == 2 else nu
    damping = sponge_profile(y, mask) if (sponge and not periodic) else None
    E = march_envelope(E_in, Nst, y, steps, K, grid.eps, N_av, nust, damping, periodic)
    return ParaxialState(E[1:], xs, y, K, N_av)


def couple_to_helmholtz(E_out: np.ndarray, grid: GridSpec, y_src: np.ndarray | None = None,
                        ky_shift: float = 0.0) -> np.ndarray:
    """Incoming trace for the wave solver from a paraxial interface trace.

    ``E_out`` is linearly interpolated onto the fine rows of ``grid`` (from
    ``y_src``, the coarse rows by default) and used in place of ``alpha_in``;
    the carrier phase ``exp(i Ky y/eps)`` is applied by the right-hand side
    assembly.  ``ky_shift`` is the paraxial minus the wave-solver carrier
    ``Ky``; the corresponding phase keeps the field itself continuous.
    """
    E_out = np.asarray(E_out, dtype=complex)
    y_src = grid.coarse_y if y_src is None else np.asarray(y_src)
    if E_out.shape != y_src.shape:
        raise ValueError("trace and source rows differ in length")
    if y_src.size == grid.ny and np.allclose(y_src, grid.y):
        alpha = E_out.copy()
    else:
        alpha = _interp_matrix(grid.y, y_src) @ E_out
    if ky_shift:
        alpha = alpha * np.exp(1j * ky_shift * grid.y / grid.eps)
    return alpha
