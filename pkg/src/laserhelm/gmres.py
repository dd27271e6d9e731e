"""Right-preconditioned GMRES without restart.

Arnoldi uses modified Gram-Schmidt with one reorthogonalisation pass and the
Hermitian inner product; the least-squares problem is updated with Givens
rotations so the residual norm is available at every iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["KrylovConfig", "GmresResult", "GmresLog", "KrylovBreakdown", "gmres", "gmres_solve"]

log = logging.getLogger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]


class KrylovBreakdown(ArithmeticError):
    pass


@dataclass(frozen=True)
class KrylovConfig:
    tol: float = 1e-6
    max_iter: int = 100

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class GmresResult:
    x: np.ndarray
    iterations: int
    residuals: list[float]
    converged: bool

    @property
    def final_residual(self) -> float:
        return self.residuals[-1]


@dataclass
class GmresLog:
    """Collects ``time_step,iter,relative_residual`` records."""

    rows: list[tuple[int, int, float]] = field(default_factory=list)

    def record(self, step: int, result: GmresResult) -> None:
        self.rows.extend((step, i, r) for i, r in enumerate(result.residuals))

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time_step,iter,relative_residual\n")
            for step, it, r in self.rows:
                fh.write(f"{step},{it},{r:.6e}\n")


def _givens(a: complex, b: complex) -> tuple[float, complex, complex]:
    """Rotation with ``[c, s; -conj(s), c] [a; b] = [r; 0]``, ``c`` real."""
    if b == 0:
        return 1.0, 0j, a
    if a == 0:
        return 0.0, 1.0 + 0j, b
    na = abs(a)
    nrm = np.hypot(na, abs(b))
    c = na / nrm
    phase = a / na
    s = phase * np.conj(b) / nrm
    return c, s, phase * nrm


def gmres(apply_A: Operator, b: np.ndarray, precond: Operator | None = None,
          x0: np.ndarray | None = None, tol: float = 1e-8, max_iter: int = 200,
          callback: Callable[[int, float], None] | None = None) -> GmresResult:
    """Solve ``A x = b`` with right preconditioning ``A P^{-1} y = b``, ``x = P^{-1} y``.

    ``precond`` applies ``P^{-1}``.  Convergence is declared when
    ``||b - A x|| / ||b|| <= tol``.  Hitting ``max_iter`` returns the best
    iterate with ``converged=False`` instead of raising.
    """
    b = np.asarray(b, dtype=complex)
    n = b.size
    M = precond if precond is not None else (lambda v: v)
    x0 = np.zeros(n, dtype=complex) if x0 is None else np.asarray(x0, dtype=complex).copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return GmresResult(np.zeros(n, dtype=complex), 0, [0.0], True)
    r0 = b - apply_A(x0) if np.any(x0) else b.copy()
    beta = np.linalg.norm(r0)
    residuals = [beta / bnorm]
    if callback:
        callback(0, residuals[0])
    if residuals[0] <= tol:
        return GmresResult(x0, 0, residuals, True)
    m = max_iter
    V: list[np.ndarray] = []  # grown on demand; max_iter may far exceed the iterations used
    H = np.zeros((m + 1, m), dtype=complex)
    cs = np.zeros(m)
    sn = np.zeros(m, dtype=complex)
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    V.append(r0 / beta)
    k = 0
    converged = False
    for j in range(m):
        # copy: operators may return (a view of) their input
        w = np.array(apply_A(M(V[j])), dtype=complex)
        if not np.all(np.isfinite(w)):
            raise KrylovBreakdown(f"non-finite Krylov vector at iteration {j + 1}")
        wnorm0 = np.linalg.norm(w)
        for _ in range(2):
            for i in range(j + 1):
                h = np.vdot(V[i], w)
                H[i, j] += h
                w -= h * V[i]
        hn = np.linalg.norm(w)
        H[j + 1, j] = hn
        for i in range(j):
            a, c2 = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * a + sn[i] * c2
            H[i + 1, j] = -np.conj(sn[i]) * a + cs[i] * c2
        cs[j], sn[j], H[j, j] = _givens(H[j, j], H[j + 1, j])
        H[j + 1, j] = 0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]
        k = j + 1
        res = abs(g[j + 1]) / bnorm
        residuals.append(float(res))
        if callback:
            callback(k, res)
        if res <= tol:
            converged = True
            break
        if hn <= 1e-14 * max(wnorm0, 1e-300):
            # happy breakdown: exact solution lies in the current space
            converged = True
            break
        V.append(w / hn)
    y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0, dtype=complex)
    z = np.zeros(n, dtype=complex)
    for i in range(k):
        z += y[i] * V[i]
    x = x0 + M(z) if k else x0
    if not converged:
        log.warning("GMRES stopped after %d iterations at residual %.3e", k, residuals[-1])
    return GmresResult(x, k, residuals, converged)


def gmres_solve(apply_A: Operator, apply_Pinv: Operator | None, b: np.ndarray,
                cfg: KrylovConfig = KrylovConfig(), x0: np.ndarray | None = None,
                callback: Callable[[int, float], None] | None = None) -> GmresResult:
    """:func:`gmres` driven by a :class:`KrylovConfig`."""
    return gmres(apply_A, b, apply_Pinv, x0=x0, tol=cfg.tol, max_iter=cfg.max_iter, callback=callback)
