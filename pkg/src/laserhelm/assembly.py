"""Discrete operators of the time-step Helmholtz problem.

Sign conventions: the field is ``psi(x) ~ exp(+i K.x / eps)`` for a wave
travelling along ``K`` and the absorption enters as ``+i mu``.  Every
absorbing condition (incoming/outgoing Robin rows, PML stretch, Robin
transmission between subdomains) is written so that outgoing waves of this
form are damped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .fields import GridSpec, PmlProfile

__all__ = [
    "C_LIGHT",
    "Tridiag",
    "HelmholtzCoeffs",
    "SeparableBlocks",
    "DdmSystem",
    "assemble_A0",
    "assemble_separable",
    "assemble_ddm",
    "assemble_rhs",
    "boundary_rows",
    "robin_alpha",
]

C_LIGHT = 299.792458  # microns per picosecond


@dataclass(frozen=True)
class Tridiag:
    """Complex symmetric tridiagonal matrix (one shared off-diagonal)."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        if self.off.shape[0] != max(self.diag.shape[0] - 1, 0):
            raise ValueError("off-diagonal must have n - 1 entries")

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Multiply along axis 0 (works for vectors and ``(n, m)`` batches)."""
        d = self.diag if u.ndim == 1 else self.diag[:, None]
        e = self.off if u.ndim == 1 else self.off[:, None]
        out = d * u
        out[:-1] += e * u[1:]
        out[1:] += e * u[:-1]
        return out

    def shifted(self, shift) -> "Tridiag":
        return Tridiag(self.diag + shift, self.off.copy())

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.off, self.diag, self.off], [-1, 0, 1], format="csr")

    def norm_max(self) -> float:
        return float(max(np.abs(self.diag).max(), np.abs(self.off).max() if self.off.size else 0.0))


@dataclass
class HelmholtzCoeffs:
    """Coefficients of one implicit time step.

    ``mu1`` is stored per x-node since the absorption ``nu = nu_C N0**2``
    follows the density profile.  ``delta_n`` is a full fine-grid array; only
    its central rows are used.
    """

    N0: np.ndarray
    mu0: float
    mu1: np.ndarray
    theta: float = 0.0
    delta_n: np.ndarray | None = None
    dispersion_correction: bool = False

    def __post_init__(self):
        self.N0 = np.asarray(self.N0, dtype=float)
        self.mu1 = np.broadcast_to(np.asarray(self.mu1, dtype=float), self.N0.shape).copy()
        if np.any(~np.isfinite(self.N0)):
            raise ValueError("N0 contains non-finite values")
        if self.mu0 < 0 or np.any(self.mu1 < self.mu0 - 1e-15):
            raise ValueError("need mu1 >= mu0 >= 0")
        if self.N0[0] >= 1.0:
            raise ValueError("incoming density must be below critical (N_in < 1)")

    @classmethod
    def from_time_step(cls, grid: GridSpec, N0, dt: float, theta: float = 0.0,
                       nu_c: float = 1.0 / 15.0, c: float = C_LIGHT, delta_n=None,
                       dispersion_correction: bool = False) -> "HelmholtzCoeffs":
        """``mu0 = 2 eps/(c dt)``, ``mu1 = eps (2/(c dt) + nu_C N0**2)``."""
        N0 = np.asarray(N0, dtype=float)
        mu0 = grid.eps * 2.0 / (c * dt) if np.isfinite(dt) else 0.0
        mu1 = mu0 + grid.eps * nu_c * N0**2
        return cls(N0, mu0, mu1, theta, delta_n, dispersion_correction)

    @property
    def N_in(self) -> float:
        return float(self.N0[0])

    @property
    def N_out(self) -> float:
        return float(self.N0[-1])

    @property
    def K(self) -> tuple[float, float]:
        k = math.sqrt(1.0 - self.N_in)
        return k * math.cos(self.theta), k * math.sin(self.theta)

    @property
    def nu_term(self) -> np.ndarray:
        """``mu1 - mu0`` per x-node."""
        return self.mu1 - self.mu0


def robin_alpha(grid: GridSpec) -> float:
    """Transmission Robin coefficient ``0.5 / eps``."""
    return 0.5 / grid.eps


@dataclass(frozen=True)
class BoundaryRows:
    """Ghost-point relations of the two x-ends.

    At x = 0: ``ghost = r_in * psi_0 - s_in * g`` with ``g`` the incoming
    trace; at x = x_max: ``ghost = r_out * psi_last``.
    """

    r_in: complex
    s_in: complex
    r_out: complex


def _face_ratio(k: complex, eps: float, dx: float, corrected: bool) -> complex:
    if corrected:
        return complex(np.exp(1j * k * dx / eps))
    a, b = eps / dx, 0.5 * k
    return (a + 1j * b) / (a - 1j * b)


def boundary_rows(grid: GridSpec, coeffs: HelmholtzCoeffs) -> BoundaryRows:
    """Second-order elimination of the Robin ghost values in x.

    The face value is the mean of the two neighbouring nodes, which keeps
    the matrix symmetric and only touches the corner diagonal entries.  With
    ``dispersion_correction`` the face coefficients are matched to the
    discrete wavenumber so normally incident plane waves enter and leave
    without numerical reflection.
    """
    eps, dx = grid.eps, grid.dx
    kx, _ = coeffs.K
    corrected = coeffs.dispersion_correction
    r_in = _face_ratio(kx, eps, dx, corrected)
    if corrected:
        kap = kx * dx / eps
        s_in = 2j * math.sin(kap) * complex(np.exp(0.5j * kap))
    else:
        s_in = 2j * kx / (eps / dx - 0.5j * kx)
    if coeffs.N_out > 1.0:
        r_out = 1.0 + 0j
    else:
        r_out = _face_ratio(math.sqrt(1.0 - coeffs.N_out), eps, dx, corrected)
    return BoundaryRows(r_in, s_in, r_out)


def _potential(grid: GridSpec, N0: np.ndarray, corrected: bool) -> np.ndarray:
    if not corrected:
        return 1.0 - N0
    kap = np.sqrt((1.0 - N0).astype(complex)) * grid.dx / grid.eps
    return (2.0 * grid.eps**2 / grid.dx**2 * (1.0 - np.cos(kap))).real


def assemble_A0(grid: GridSpec, coeffs: HelmholtzCoeffs) -> Tridiag:
    """Tridiagonal discretisation of ``eps**2 d2/dx2 + (1 - N0(x))`` with the x-end conditions."""
    N0 = coeffs.N0
    if N0.shape != (grid.nx,):
        raise ValueError(f"N0 must have {grid.nx} entries")
    if np.isnan(N0).any():
        raise ValueError("N0 contains NaN")
    s = grid.eps**2 / grid.dx**2
    rows = boundary_rows(grid, coeffs)
    diag = (-2.0 * s + _potential(grid, N0, coeffs.dispersion_correction)).astype(complex)
    diag[0] += s * rows.r_in
    diag[-1] += s * rows.r_out
    return Tridiag(diag, np.full(grid.nx - 1, s, dtype=complex))


@dataclass(frozen=True)
class SeparableBlocks:
    """``A = A0 + i mu0 - 2 eps^2/dy^2``, ``T = -T_scalar I``, ``B = A + beta I``."""

    A: Tridiag
    T_scalar: float
    beta: complex
    mu0: float

    @property
    def B(self) -> Tridiag:
        return self.A.shifted(self.beta)


def assemble_separable(A0: Tridiag, grid: GridSpec, coeffs: HelmholtzCoeffs,
                       alpha_robin: float | None = None) -> SeparableBlocks:
    if grid.dy <= 0:
        raise ValueError("dy must be positive")
    alpha = robin_alpha(grid) if alpha_robin is None else alpha_robin
    t = grid.eps**2 / grid.dy**2
    beta = t + 1j * alpha * grid.eps**2 / grid.dy
    return SeparableBlocks(A0.shifted(1j * coeffs.mu0 - 2.0 * t), t, beta, coeffs.mu0)


# ---------------------------------------------------------------------------
# three-subdomain system


@dataclass
class _YOperator:
    lower: np.ndarray
    center: np.ndarray
    upper: np.ndarray

    def apply(self, w: np.ndarray) -> np.ndarray:
        out = w * self.center
        out[:, 1:] += w[:, :-1] * self.lower[1:]
        out[:, :-1] += w[:, 1:] * self.upper[:-1]
        return out

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.diags([self.lower[1:], self.center, self.upper[:-1]], [-1, 0, 1], format="csr")


def _pml_y_operator(grid: GridSpec, pml: PmlProfile, r0: int, r1: int, tau: complex,
                    wall: str) -> _YOperator:
    """Stretched ``eps^2 eta d/dy(eta d/dy)`` on rows ``[r0, r1)``.

    ``wall`` names the end closed by the outer (Neumann) wall; the other end
    is a Robin transmission face whose ghost relation is ``ghost = tau*edge``.
    """
    s = grid.eps**2 / grid.dy**2
    eta = pml.eta[r0:r1]
    lower = s * eta * pml.eta_faces[r0:r1]
    upper = s * eta * pml.eta_faces[r0 + 1:r1 + 1]
    center = -(lower + upper)
    lower, upper = lower.copy(), upper.copy()
    if wall == "bottom":
        center[0] += lower[0]
        lower[0] = 0.0
        center[-1] += upper[-1] * tau
        upper[-1] = 0.0
    else:
        center[-1] += upper[-1]
        upper[-1] = 0.0
        center[0] += lower[0] * tau
        lower[0] = 0.0
    return _YOperator(lower, center, upper)


@dataclass
class DdmSystem:
    """The coupled system ``M = M_D + M_E`` on the three overlapping subdomains.

    Vectors are flat, ordered ``(Psi_t, Psi_c, Psi_b)``; each block is an
    ``(nx, rows)`` array raveled column by column (Fortran order).
    """

    grid: GridSpec
    A0: Tridiag
    blocks: SeparableBlocks
    mu1: np.ndarray
    a_dn: np.ndarray
    y_top: _YOperator
    y_bot: _YOperator
    tau: complex
    alpha_robin: float
    coupling: bool = True
    sizes: tuple[int, int, int] = field(init=False)

    def __post_init__(self):
        g = self.grid
        self.sizes = (g.nx * g.nt, g.nx * g.n_central, g.nx * g.nb)

    # -- layout -------------------------------------------------------------

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def split(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = self.grid
        nt, nc, _ = self.sizes
        return (v[:nt].reshape(g.nx, g.nt, order="F"),
                v[nt:nt + nc].reshape(g.nx, g.n_central, order="F"),
                v[nt + nc:].reshape(g.nx, g.nb, order="F"))

    @staticmethod
    def join(t: np.ndarray, c: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.concatenate([t.ravel(order="F"), c.ravel(order="F"), b.ravel(order="F")])

    def restrict(self, full: np.ndarray) -> np.ndarray:
        """Copy a full-grid array into the three (overlapping) subdomain blocks."""
        g = self.grid
        return self.join(full[:, g.t0:], full[:, g.c0:g.c1], full[:, :g.nb])

    def prolong(self, v: np.ndarray) -> np.ndarray:
        """Assemble a full-grid field, taking the central block on overlaps."""
        g = self.grid
        t, c, b = self.split(v)
        full = np.empty((g.nx, g.ny), dtype=complex)
        full[:, :g.nb] = b
        full[:, g.t0:] = t
        full[:, g.c0:g.c1] = c
        return full

    # -- block operators ----------------------------------------------------

    def apply_AG(self, u: np.ndarray) -> np.ndarray:
        """Separable central operator on an ``(nx, n_central)`` batch."""
        blk = self.blocks
        out = blk.A.apply(u)
        s = blk.T_scalar
        out[:, 1:] += s * u[:, :-1]
        out[:, :-1] += s * u[:, 1:]
        out[:, 0] += blk.beta * u[:, 0]
        out[:, -1] += blk.beta * u[:, -1]
        return out

    def apply_AP(self, w: np.ndarray, which: str) -> np.ndarray:
        yop = self.y_top if which == "top" else self.y_bot
        return self.A0.apply(w) + 1j * self.mu1[:, None] * w + yop.apply(w)

    def pml_sparse(self, which: str) -> sparse.csr_matrix:
        """A_P1 (``"top"``) or A_P2 (``"bottom"``) in y-fastest ordering ``m + rows*j``."""
        yop = self.y_top if which == "top" else self.y_bot
        rows = yop.center.size
        ax = self.A0.to_sparse() + sparse.diags(1j * self.mu1)
        return (sparse.kron(ax, sparse.identity(rows)) + sparse.kron(sparse.identity(self.grid.nx), yop.to_sparse())).tocsr()

    def _couplings(self, t, c, b):
        """Robin transmission terms (C-blocks) added to the edge rows."""
        g = self.grid
        s = g.eps**2 / g.dy**2
        tau = self.tau
        ov = g.overlap
        # rows of Omega_t from Psi_c (C1), ghost row t0-1
        ct = s * (c[:, g.t0 - 1 - g.c0] - tau * c[:, g.t0 - g.c0])
        # rows of Omega_c from Psi_t (C2) and Psi_b (C3)
        cc_top = s * (t[:, ov] - tau * t[:, ov - 1])
        cc_bot = s * (b[:, g.c0 - 1] - tau * b[:, g.c0])
        # rows of Omega_b from Psi_c (C4), ghost row nb
        cb = s * (c[:, ov] - tau * c[:, ov - 1])
        return ct, cc_top, cc_bot, cb

    def apply_MD(self, v: np.ndarray) -> np.ndarray:
        t, c, b = self.split(v)
        return self.join(self.apply_AP(t, "top"), self.apply_AG(c), self.apply_AP(b, "bottom"))

    def apply_ME(self, v: np.ndarray) -> np.ndarray:
        t, c, b = self.split(v)
        ot = np.zeros_like(t)
        ob = np.zeros_like(b)
        oc = self.a_dn * c
        if self.coupling:
            ct, cc_top, cc_bot, cb = self._couplings(t, c, b)
            ot[:, 0] += ct
            oc[:, -1] += cc_top
            oc[:, 0] += cc_bot
            ob[:, -1] += cb
        return self.join(ot, oc, ob)

    def apply_M(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        return self.apply_MD(v) + self.apply_ME(v)


def assemble_ddm(grid: GridSpec, coeffs: HelmholtzCoeffs, pml: PmlProfile,
                 blocks: SeparableBlocks, A0: Tridiag | None = None,
                 alpha_robin: float | None = None, coupling: bool = True) -> DdmSystem:
    """Build ``M`` for the bottom/central/top decomposition of ``grid``."""
    if grid.overlap < 1:
        raise ValueError("overlap smaller than 1 row")
    if grid.nb < 3 + grid.overlap or grid.nt < 3 + grid.overlap:
        raise ValueError("PML subdomains need at least 3 rows plus the overlap")
    if A0 is None:
        A0 = assemble_A0(grid, coeffs)
    alpha = robin_alpha(grid) if alpha_robin is None else alpha_robin
    tau = 1.0 + 1j * alpha * grid.dy
    # interface faces must lie outside the absorbing layers
    for face in (grid.c0, grid.nb, grid.t0, grid.c1):
        if pml.sigma_faces[face] != 0.0:
            raise ValueError("transmission face inside the PML")
    y_bot = _pml_y_operator(grid, pml, 0, grid.nb, tau, "bottom")
    y_top = _pml_y_operator(grid, pml, grid.t0, grid.ny, tau, "top")
    if coeffs.delta_n is None:
        dn = np.zeros((grid.nx, grid.n_central))
    else:
        dn = np.asarray(coeffs.delta_n)[:, grid.c0:grid.c1]
    a_dn = -dn + 1j * coeffs.nu_term[:, None]
    return DdmSystem(grid, A0, blocks, coeffs.mu1.copy(), a_dn, y_top, y_bot, tau, alpha, coupling)


def assemble_rhs(psi_ini: np.ndarray, coeffs: HelmholtzCoeffs, alpha_in: np.ndarray,
                 grid: GridSpec) -> np.ndarray:
    """Full-grid right-hand side ``i mu0 psi_ini`` plus the incoming-boundary fold-in.

    The x = 0 rows receive ``eps^2/dx^2 * s_in * alpha_in(y) exp(i K_y y/eps)``,
    the term left over after eliminating the ghost node with the incoming
    Robin condition.
    """
    rhs = 1j * coeffs.mu0 * np.asarray(psi_ini, dtype=complex)
    if rhs.shape != (grid.nx, grid.ny):
        raise ValueError("psi_ini has the wrong shape")
    _, ky = coeffs.K
    trace = np.asarray(alpha_in) * np.exp(1j * ky * grid.y / grid.eps)
    rows = boundary_rows(grid, coeffs)
    rhs[0, :] += grid.eps**2 / grid.dx**2 * rows.s_in * trace
    return rhs
