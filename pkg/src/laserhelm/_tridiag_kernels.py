"""Compiled kernels for complex symmetric tridiagonal eigenproblems.

The eigenvalues come from an implicit QL iteration with complex orthogonal
rotations (``c**2 + s**2 = 1``, no conjugation), which preserves complex
symmetry.  Eigenvectors are then obtained column by column with inverse
iteration on the shifted tridiagonal matrix (LU with row interchanges).
"""

import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16


@njit(cache=True)
def ql_eigenvalues(diag, off, max_iter=60):
    """Eigenvalues of the complex symmetric tridiagonal ``(diag, off)``.

    Returns ``(d, ok)``; ``ok`` is False when some eigenvalue did not converge
    in ``max_iter`` sweeps.
    """
    n = diag.shape[0]
    d = diag.copy()
    e = np.zeros(n, dtype=np.complex128)
    e[: n - 1] = off
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return d, False
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.sqrt(g * g + 1.0)
            if abs(g - r) > abs(g + r):
                r = -r
            g = d[m] - d[l] + e[l] / (g + r)
            s = 1.0 + 0j
            c = 1.0 + 0j
            p = 0.0 + 0j
            i = m - 1
            deflated = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.sqrt(f * f + g * g)
                e[i + 1] = r
                if abs(r) <= 1e-300 * (abs(f) + abs(g) + 1e-300):
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if deflated and i >= l:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return d, True


@njit(cache=True)
def _shifted_solve(diag, off, sigma, rhs):
    """Solve ``(T - sigma I) x = rhs`` by tridiagonal LU with interchanges."""
    n = diag.shape[0]
    d = diag - sigma
    dl = off.copy()
    du = off.copy()
    du2 = np.zeros(max(n - 2, 0), dtype=np.complex128)
    piv = np.zeros(max(n - 1, 0), dtype=np.int64)
    tiny = 1e-300
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0:
                d[i] = tiny
            fact = dl[i] / d[i]
            dl[i] = fact
            d[i + 1] -= fact * du[i]
            piv[i] = i
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = i + 1
    if d[n - 1] == 0:
        d[n - 1] = tiny
    x = rhs.copy()
    for i in range(n - 1):
        if piv[i] == i:
            x[i + 1] -= dl[i] * x[i]
        else:
            temp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = temp - dl[i] * x[i]
    x[n - 1] /= d[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i]
    return x


@njit(cache=True)
def inverse_iteration(diag, off, lam, start, n_iter=3):
    """Eigenvectors for each shift in ``lam`` (columns), refined eigenvalues."""
    n = diag.shape[0]
    vecs = np.empty((n, lam.shape[0]), dtype=np.complex128)
    vals = lam.copy()
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(diag[i]))
    for i in range(n - 1):
        scale = max(scale, abs(off[i]))
    for j in range(lam.shape[0]):
        sigma = lam[j] + 64.0 * _EPS * scale
        x = start.copy()
        for _ in range(n_iter):
            x = _shifted_solve(diag, off, sigma, x)
            nrm = np.sqrt(np.sum(np.abs(x) ** 2))
            x /= nrm
        # Rayleigh quotient under the bilinear form
        tx = diag * x
        tx[:-1] += off * x[1:]
        tx[1:] += off * x[:-1]
        den = np.sum(x * x)
        if abs(den) > 0:
            vals[j] = np.sum(x * tx) / den
        vecs[:, j] = x
    return vecs, vals
