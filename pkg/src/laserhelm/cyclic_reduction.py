"""Block cyclic reduction for the separable central operator, done in the spectral basis.

In the eigenbasis of ``A0`` every block of the central matrix is diagonal,
so the block recursions turn into independent scalar recursions, one per
eigenvalue.  Level ``r`` holds ``2**(k-r) - 1`` block rows.  The two edge
rows carry the Robin ``B`` diagonal; once a single block is left it is an
edge row on both sides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import SeparableBlocks
from .spectral import SpectralBasis, from_spectral, to_spectral

__all__ = ["PivotBreakdown", "ReductionTables", "build_tables", "bcr_solve", "precond_central_apply"]

_PIVOT_FLOOR = 1e-300


class PivotBreakdown(ArithmeticError):
    def __init__(self, level: int, index: int):
        super().__init__(f"vanishing cyclic-reduction pivot at level {level}, mode {index}")
        self.level = level
        self.index = index


@dataclass(frozen=True)
class ReductionTables:
    """Per-level spectral diagonals.

    ``Lambda[r]`` / ``Gamma[r]`` are the interior diagonal and coupling of
    level ``r`` (the block row reads ``D u_j - T (u_{j-1} + u_{j+1})``);
    ``BLambda[r]`` is the diagonal of the edge rows.
    """

    Lambda: np.ndarray
    Gamma: np.ndarray
    BLambda: np.ndarray

    @property
    def k(self) -> int:
        return self.Lambda.shape[0]

    @property
    def n_blocks(self) -> int:
        return 2**self.k - 1


def _check(vals: np.ndarray, level: int) -> None:
    bad = np.flatnonzero(np.abs(vals) < _PIVOT_FLOOR)
    if bad.size:
        raise PivotBreakdown(level, int(bad[0]))


def build_tables(basis: SpectralBasis, blocks: SeparableBlocks, ny: int) -> ReductionTables:
    """Scalar recursions for ``ny = 2**k - 1`` block rows."""
    k = int(round(np.log2(ny + 1)))
    if ny < 1 or 2**k - 1 != ny:
        raise ValueError(f"block count {ny} is not 2**k - 1")
    n = basis.n
    lam0 = basis.lam + 1j * blocks.mu0 - 2.0 * blocks.T_scalar
    Lam = np.empty((k, n), dtype=complex)
    Gam = np.empty((k, n), dtype=complex)
    BLam = np.empty((k, n), dtype=complex)
    Lam[0] = lam0
    Gam[0] = -blocks.T_scalar
    BLam[0] = lam0 + (2.0 if k == 1 else 1.0) * blocks.beta
    _check(Lam[0], 0)
    _check(BLam[0], 0)
    for r in range(1, k):
        L, G, BL = Lam[r - 1], Gam[r - 1], BLam[r - 1]
        G2 = G * G
        Lam[r] = L - 2.0 * G2 / L
        Gam[r] = G2 / L
        if r < k - 1:
            BLam[r] = L - G2 * (1.0 / L + 1.0 / BL)
        else:
            BLam[r] = L - 2.0 * G2 / BL
        _check(Lam[r], r)
        _check(BLam[r], r)
    return ReductionTables(Lam, Gam, BLam)


def _diag_for(tables: ReductionTables, r: int, count: int, first_edge: bool, last_edge: bool) -> np.ndarray:
    d = np.repeat(tables.Lambda[r][:, None], count, axis=1)
    if first_edge:
        d[:, 0] = tables.BLambda[r]
    if last_edge:
        d[:, -1] = tables.BLambda[r]
    return d


def bcr_solve_spectral(tables: ReductionTables, F: np.ndarray) -> np.ndarray:
    """Solve the reduced-form system for spectral right-hand sides ``F`` (n, 2**k - 1)."""
    k = tables.k
    if F.shape[1] != tables.n_blocks:
        raise ValueError(f"expected {tables.n_blocks} columns, got {F.shape[1]}")
    levels = [F]
    # forward: eliminate the odd (1-based) rows of each level
    for r in range(k - 1):
        Fr = levels[r]
        elim = Fr[:, 0::2]
        kept = Fr[:, 1::2]
        d = _diag_for(tables, r, elim.shape[1], True, True)
        w = elim / d
        G = tables.Gamma[r][:, None]
        levels.append(kept + G * (w[:, :-1] + w[:, 1:]))
    U = levels[k - 1] / tables.BLambda[k - 1][:, None]
    # back-substitution
    for r in range(k - 2, -1, -1):
        Fr = levels[r]
        m = Fr.shape[1]
        full = np.empty_like(Fr)
        full[:, 1::2] = U
        nb = np.zeros((Fr.shape[0], (m + 1) // 2), dtype=Fr.dtype)
        nb[:, 1:] += U
        nb[:, :-1] += U
        g = Fr[:, 0::2] + tables.Gamma[r][:, None] * nb
        full[:, 0::2] = g / _diag_for(tables, r, nb.shape[1], True, True)
        U = full
    return U


def bcr_solve(tables: ReductionTables, basis: SpectralBasis, f: np.ndarray, workers: int = 1) -> np.ndarray:
    """Solve ``A_G Psi = f`` for an ``(nx, 2**k - 1)`` batch of x-lines."""
    ft = to_spectral(basis, f, workers=workers)
    ut = bcr_solve_spectral(tables, ft)
    return from_spectral(basis, ut, workers=workers)


def precond_central_apply(blocks: SeparableBlocks, basis: SpectralBasis, tables: ReductionTables,
                          rhs: np.ndarray, workers: int = 1) -> np.ndarray:
    """Central-subdomain preconditioner solve on an ``(nx, n_central)`` block."""
    if rhs.shape[0] != basis.n:
        raise ValueError("rhs does not match the basis dimension")
    return bcr_solve(tables, basis, rhs, workers=workers)
