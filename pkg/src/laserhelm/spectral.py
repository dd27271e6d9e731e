"""Eigenbasis of A0 under the bilinear form ``<u, v> = u^T v`` and the dense transforms.

``Q`` satisfies ``Q^T Q = Q Q^T = I`` (plain transpose) and
``A0 = Q diag(lam) Q^T``.  Transforms of a batch of x-lines are single dense
matrix products, split into row/column tiles computed by worker threads.
"""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import ThreadpoolController

from .assembly import Tridiag

__all__ = [
    "BasisBreakdown",
    "SpectralBasis",
    "eigendecompose",
    "to_spectral",
    "from_spectral",
    "blocked_matmul",
    "tile_partition",
    "save_basis",
    "load_basis",
    "basis_key",
]

DENSE_LIMIT = 2048
TILE = 256

_controller = ThreadpoolController()
_pools: dict[int, ThreadPoolExecutor] = {}


class BasisBreakdown(ArithmeticError):
    """An eigenvector is (numerically) isotropic: ``v^T v ~ 0``."""

    def __init__(self, index: int, ratio: float):
        super().__init__(f"quasi-null eigenvector at index {index} (|v^T v|/|v|^2 = {ratio:.3e})")
        self.index = index


@dataclass(frozen=True)
class SpectralBasis:
    Q: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def orthogonality_error(self) -> float:
        return float(np.abs(self.Q.T @ self.Q - np.eye(self.n)).max())

    def residual(self, A0: Tridiag) -> float:
        """``max |A0 Q - Q diag(lam)|``."""
        return float(np.abs(A0.apply(self.Q) - self.Q * self.lam).max())


# ---------------------------------------------------------------------------
# eigensolver


def _normalise(V: np.ndarray) -> np.ndarray:
    nrm2 = np.einsum("ij,ij->j", V.conj(), V).real
    q = np.einsum("ij,ij->j", V, V)
    ratio = np.abs(q) / nrm2
    bad = np.flatnonzero(ratio < 1e-13)
    if bad.size:
        raise BasisBreakdown(int(bad[0]), float(ratio[bad[0]]))
    V = V / np.sqrt(q)
    # canonical sign: largest entry has positive real part
    idx = np.abs(V).argmax(axis=0)
    lead = V[idx, np.arange(V.shape[1])]
    return V * np.where(lead.real < 0, -1.0, 1.0)


def _clusters(lam: np.ndarray, tol: float) -> list[np.ndarray]:
    out = []
    start = 0
    for i in range(1, lam.size + 1):
        if i == lam.size or abs(lam[i] - lam[i - 1]) > tol:
            if i - start > 1:
                out.append(np.arange(start, i))
            start = i
    return out


def _reorthogonalise_clusters(V: np.ndarray, lam: np.ndarray, tol: float) -> np.ndarray:
    """Modified Gram-Schmidt under ``u^T v`` inside groups of close eigenvalues."""
    for group in _clusters(lam, tol):
        for a, j in enumerate(group):
            v = V[:, j]
            for i in group[:a]:
                v = v - (V[:, i] @ v) * V[:, i]
            q = v @ v
            ratio = abs(q) / np.vdot(v, v).real
            if ratio < 1e-13:
                raise BasisBreakdown(int(j), float(ratio))
            V[:, j] = v / np.sqrt(q)
    return V


def _refine(Q: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Newton-Schulz steps towards ``Q (Q^T Q)^{-1/2}``."""
    n = Q.shape[1]
    for _ in range(sweeps):
        S = Q.T @ Q
        dev = S - np.eye(n)
        if np.abs(dev).max() < 1e-15:
            break
        Q = Q @ (np.eye(n) - 0.5 * dev)
    return Q


def _order(lam: np.ndarray) -> np.ndarray:
    return np.lexsort((lam.imag, lam.real))


def _dense_path(A0: Tridiag):
    lam, V = np.linalg.eig(A0.to_dense())
    return lam, V


def _structured_path(A0: Tridiag):
    from ._tridiag_kernels import inverse_iteration, ql_eigenvalues

    lam, ok = ql_eigenvalues(A0.diag.astype(np.complex128), A0.off.astype(np.complex128))
    if not ok:
        raise ArithmeticError("QL iteration did not converge")
    rng = np.random.default_rng(12345)
    start = (1.0 + 0.1 * rng.standard_normal(A0.n)).astype(np.complex128)
    V, lam = inverse_iteration(A0.diag.astype(np.complex128), A0.off.astype(np.complex128),
                               lam.astype(np.complex128), start)
    return lam, V


def eigendecompose(A0: Tridiag, method: str = "auto", refine: bool = True) -> SpectralBasis:
    """Bilinear-orthonormal eigenbasis of a complex symmetric tridiagonal matrix.

    ``method`` is ``"dense"`` (LAPACK on the assembled matrix), ``"structured"``
    (tridiagonal QL + inverse iteration, O(n^2)) or ``"auto"`` (dense up to
    2048 unknowns).  Eigenvalues are sorted by real part, then imaginary part.
    """
    if method == "auto":
        method = "dense" if A0.n <= DENSE_LIMIT else "structured"
    if A0.n == 1:
        return SpectralBasis(np.ones((1, 1), dtype=complex), A0.diag.astype(complex).copy())
    if method == "dense":
        lam, V = _dense_path(A0)
    elif method == "structured":
        lam, V = _structured_path(A0)
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    order = _order(lam)
    lam, V = lam[order], V[:, order]
    V = _normalise(V)
    scale = A0.norm_max()
    V = _reorthogonalise_clusters(V, lam, 1e-8 * scale)
    if refine and (method == "dense" or A0.n <= DENSE_LIMIT):
        V = _refine(V)
    return SpectralBasis(np.ascontiguousarray(V), lam)


# ---------------------------------------------------------------------------
# transforms


def tile_partition(n: int, tile: int = TILE) -> list[tuple[int, int]]:
    """Fixed partition of ``range(n)`` into tiles of at most ``tile`` entries."""
    return [(i, min(i + tile, n)) for i in range(0, n, tile)] or [(0, 0)]


def _even_partition(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _pool(workers: int) -> ThreadPoolExecutor:
    if workers not in _pools:
        _pools[workers] = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="matmul")
    return _pools[workers]


def blocked_matmul(q: np.ndarray, b: np.ndarray, row_blocks: int | None = None,
                   col_blocks: int | None = None, workers: int = 1) -> np.ndarray:
    """``q @ b`` computed as independent tiles ``Q_i B_j``.

    Each tile is written by exactly one task, and the inner dimension is never
    split, so the result does not depend on ``workers``.  Without explicit
    block counts a fixed tiling of :data:`TILE` rows/columns is used.
    """
    if q.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch {q.shape} x {b.shape}")
    m, n = q.shape[0], b.shape[1]
    rows = tile_partition(m) if row_blocks is None else _even_partition(m, row_blocks)
    cols = tile_partition(n) if col_blocks is None else _even_partition(n, col_blocks)
    out = np.empty((m, n), dtype=np.result_type(q, b))

    def task(rc):
        (r0, r1), (c0, c1) = rc
        out[r0:r1, c0:c1] = q[r0:r1] @ b[:, c0:c1]

    jobs = [(r, c) for r in rows for c in cols]
    with _controller.limit(limits=1, user_api="blas"):
        if workers <= 1 or len(jobs) == 1:
            for job in jobs:
                task(job)
        else:
            list(_pool(workers).map(task, jobs))
    return out


def _batch(basis: SpectralBasis, F: np.ndarray) -> np.ndarray:
    F = np.asarray(F)
    if F.shape[0] != basis.n:
        raise ValueError(f"column length {F.shape[0]} != {basis.n}")
    return F


def to_spectral(basis: SpectralBasis, F: np.ndarray, workers: int = 1) -> np.ndarray:
    """``Q^T F`` for a batch of x-lines (columns)."""
    F = _batch(basis, F)
    if F.ndim == 1:
        return basis.Q.T @ F
    return blocked_matmul(basis.Q.T, F, workers=workers)


def from_spectral(basis: SpectralBasis, U: np.ndarray, workers: int = 1) -> np.ndarray:
    """``Q U`` for a batch of spectral coefficient columns."""
    U = _batch(basis, U)
    if U.ndim == 1:
        return basis.Q @ U
    return blocked_matmul(basis.Q, U, workers=workers)


# ---------------------------------------------------------------------------
# binary cache: b"SPB1", u32 n, Q (row-major), lam; complex as interleaved <f8 pairs


def basis_key(A0: Tridiag) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(A0.diag, dtype="<c16").tobytes())
    h.update(np.ascontiguousarray(A0.off, dtype="<c16").tobytes())
    return h.hexdigest()[:32]


def save_basis(path, basis: SpectralBasis) -> None:
    with open(path, "wb") as fh:
        fh.write(b"SPB1")
        fh.write(struct.pack("<I", basis.n))
        fh.write(np.ascontiguousarray(basis.Q, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(basis.lam, dtype="<c16").tobytes())


def load_basis(path) -> SpectralBasis:
    raw = Path(path).read_bytes()
    if raw[:4] != b"SPB1":
        raise ValueError("not a spectral basis file")
    (n,) = struct.unpack("<I", raw[4:8])
    data = np.frombuffer(raw, dtype="<c16", offset=8)
    if data.size != n * n + n:
        raise ValueError("truncated spectral basis file")
    return SpectralBasis(data[: n * n].reshape(n, n).astype(complex), data[n * n:].astype(complex))
