"""Block-diagonal preconditioner ``M_D`` and the full operator ``M``.

The two thin PML blocks are factorised once with LAPACK banded LU (y-fastest
ordering, so the bandwidth is the number of rows of the block).  The central
block is inverted by cyclic reduction in the spectral basis of ``A0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import lapack

from .assembly import DdmSystem
from .cyclic_reduction import ReductionTables, bcr_solve, build_tables
from .spectral import SpectralBasis, eigendecompose

__all__ = ["FactorizationError", "BandedLU", "PreconditionerState"]

log = logging.getLogger(__name__)


class FactorizationError(ArithmeticError):
    pass


class BandedLU:
    """LU factors of a banded sparse matrix (partial pivoting within the band)."""

    def __init__(self, A: sparse.spmatrix, bandwidth: int, name: str = ""):
        A = A.tocoo()
        n = A.shape[0]
        kl = ku = bandwidth
        ab = np.zeros((2 * kl + ku + 1, n), dtype=complex)
        ab[kl + ku + A.row - A.col, A.col] = A.data
        lu, piv, info = lapack.zgbtrf(ab, kl, ku)
        if info > 0:
            raise FactorizationError(f"singular pivot {info} in subdomain {name!r}")
        if info < 0:
            raise FactorizationError(f"illegal argument {-info} to zgbtrf ({name})")
        self.lu, self.piv, self.kl, self.ku, self.name = lu, piv, kl, ku, name
        amax = np.abs(A.data).max() if A.nnz else 1.0
        self.growth = float(np.abs(lu[kl:]).max() / amax)
        if self.growth > 1e8:
            log.warning("large LU growth %.2e in subdomain %s", self.growth, name)

    def solve(self, b: np.ndarray) -> np.ndarray:
        x, info = lapack.zgbtrs(self.lu, self.kl, self.ku, b, self.piv)
        if info != 0:
            raise FactorizationError(f"zgbtrs failed ({info}) in subdomain {self.name!r}")
        return x


@dataclass
class PreconditionerState:
    system: DdmSystem
    basis: SpectralBasis
    tables: ReductionTables
    lu_top: BandedLU
    lu_bot: BandedLU
    workers: int = 1

    @classmethod
    def build(cls, system: DdmSystem, basis: SpectralBasis | None = None, workers: int = 1) -> "PreconditionerState":
        g = system.grid
        if basis is None:
            basis = eigendecompose(system.A0)
        tables = build_tables(basis, system.blocks, g.n_central)
        lu_top = BandedLU(system.pml_sparse("top"), g.nt, "top")
        lu_bot = BandedLU(system.pml_sparse("bottom"), g.nb, "bottom")
        return cls(system, basis, tables, lu_top, lu_bot, workers)

    def apply_M(self, v: np.ndarray) -> np.ndarray:
        return self.system.apply_M(v)

    def apply_MD(self, v: np.ndarray) -> np.ndarray:
        return self.system.apply_MD(np.asarray(v, dtype=complex))

    def apply_MD_inverse(self, r: np.ndarray) -> np.ndarray:
        """``z_t = A_P1^-1 r_t``, ``z_c = A_G^-1 r_c`` (cyclic reduction), ``z_b = A_P2^-1 r_b``."""
        t, c, b = self.system.split(np.asarray(r, dtype=complex))
        zt = self.lu_top.solve(np.ascontiguousarray(t).ravel()).reshape(t.shape)
        zb = self.lu_bot.solve(np.ascontiguousarray(b).ravel()).reshape(b.shape)
        zc = bcr_solve(self.tables, self.basis, c, workers=self.workers)
        return self.system.join(zt, zc, zb)
