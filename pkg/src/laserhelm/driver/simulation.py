"""The coupled wave/plasma time loop, outputs and checkpoints."""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..assembly import DdmSystem, HelmholtzCoeffs, assemble_A0, assemble_ddm, assemble_rhs, assemble_separable
from ..fields import GridSpec, build_incoming_profile, build_pml, coarse_intensity, interp_density_to_fine
from ..gmres import GmresLog, KrylovConfig, gmres_solve
from ..hydro import PlasmaState, cfl_timestep, density_decompose, hydro_step
from ..paraxial import couple_to_helmholtz, paraxial_march
from ..precond import PreconditionerState
from ..spectral import SpectralBasis, eigendecompose
from .config import SimConfig, dump_config, parse_config
from .io import emit_field_map

__all__ = ["StepRecord", "StepProblem", "Simulation", "run_simulation", "SimulationError", "solve_stationary"]

log = logging.getLogger(__name__)

BASIS_TOL = 1e-12


class SimulationError(RuntimeError):
    pass


@dataclass
class StepRecord:
    step: int
    time: float
    dt: float
    iterations: int
    residual: float
    converged: bool
    max_delta_n: float
    basis_rebuilt: bool
    wall: float


@dataclass
class StepProblem:
    """Everything needed for one GMRES solve."""

    dt: float
    delta_n: np.ndarray
    system: DdmSystem
    prec: PreconditionerState
    b: np.ndarray
    x0: np.ndarray | None
    basis_rebuilt: bool
    intensity: np.ndarray


@dataclass
class _Zones:
    full: GridSpec
    wave: GridSpec
    n_par: int  # coarse columns marched by the paraxial model

    @property
    def fine_offset(self) -> int:
        return self.n_par * self.full.p0


def _zones(cfg: SimConfig, grid: GridSpec) -> _Zones:
    n_par = int(round(cfg.zones.paraxial_fraction * grid.ncx))
    n_par = min(n_par, grid.ncx - 1)
    wave = dataclasses.replace(grid, nx=grid.nx - n_par * grid.p0)
    return _Zones(grid, wave, n_par)


def _dilate(mask: np.ndarray) -> np.ndarray:
    out = mask.copy()
    out[1:] |= mask[:-1]
    out[:-1] |= mask[1:]
    return out


@dataclass
class Simulation:
    """Holds the evolving state; :meth:`step` advances one coupled time step."""

    cfg: SimConfig
    out_dir: Path | None = None
    step_index: int = 0
    time: float = 0.0
    plasma: PlasmaState | None = None
    psi: np.ndarray | None = None
    records: list[StepRecord] = field(default_factory=list)
    gmres_log: GmresLog = field(default_factory=GmresLog)

    def __post_init__(self):
        grid = self.cfg.validate()
        self.zones = _zones(self.cfg, grid)
        self.pml = build_pml(self.zones.wave, self.cfg.solver.pml_strength, self.cfg.solver.pml_order)
        spec = self.cfg.laser.spec(grid)
        self.theta = spec.theta
        self.alpha_in = build_incoming_profile(spec, grid)
        self.alpha_coarse = build_incoming_profile(spec, grid, y=grid.coarse_y)
        self.frozen_rows = _dilate(grid.coarse_pml_mask)
        self._basis_cache: tuple[np.ndarray, SpectralBasis] | None = None
        if self.plasma is None:
            N = np.repeat(self.cfg.density.profile(grid.coarse_x)[:, None], grid.ncy, axis=1)
            self.plasma = PlasmaState.at_rest(N, self.cfg.physics.te, self.cfg.physics.gamma_p, grid)
        if self.psi is None:
            self.psi = np.zeros((self.zones.wave.nx, grid.ny), dtype=complex)
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.last_intensity = np.zeros((grid.ncx, grid.ncy))
        self.last_fine_intensity = np.zeros((grid.nx, grid.ny))

    # -- pieces ----------------------------------------------------------------

    @property
    def grid(self) -> GridSpec:
        return self.zones.full

    def _basis(self, N0: np.ndarray, A0) -> tuple[SpectralBasis, bool]:
        cached = self._basis_cache
        if cached is not None and cached[0].shape == N0.shape and np.abs(cached[0] - N0).max() <= BASIS_TOL:
            return cached[1], False
        basis = eigendecompose(A0, method=self.cfg.solver.eig_method)
        self._basis_cache = (N0.copy(), basis)
        return basis, True

    def _paraxial(self):
        """March the upstream zone; returns the paraxial state and its coarse intensity."""
        z = self.zones
        g = self.grid
        N = self.plasma.N[: z.n_par]
        nu = self.cfg.physics.nu_c * N.mean(axis=1, where=~g.coarse_pml_mask[None, :])[:, None] ** 2
        nu = np.broadcast_to(nu, N.shape)
        st = paraxial_march(self.alpha_coarse, N, g, nu=nu, theta=self.theta, n_columns=z.n_par,
                            end_face=True)
        inten = st.intensity[:-1]
        inten[:, g.coarse_pml_mask] = 0.0
        return st, inten

    def prepare(self) -> "StepProblem":
        """Assemble the linear system of the next step from the current state."""
        cfg, z, g = self.cfg, self.zones, self.grid
        dt = cfl_timestep(self.plasma, cfg.physics.cfl)
        N_fine = interp_density_to_fine(self.plasma.N, g)[z.fine_offset:]
        N0, dN = density_decompose(N_fine, g.pml_mask)
        coeffs = HelmholtzCoeffs.from_time_step(
            z.wave, N0, dt, self.theta, cfg.physics.nu_c, cfg.physics.c, delta_n=dN,
            dispersion_correction=cfg.solver.dispersion_correction)
        A0 = assemble_A0(z.wave, coeffs)
        basis, rebuilt = self._basis(N0, A0)
        blocks = assemble_separable(A0, z.wave, coeffs, cfg.solver.alpha_robin)
        system = assemble_ddm(z.wave, coeffs, self.pml, blocks, A0, cfg.solver.alpha_robin)
        prec = PreconditionerState.build(system, basis, workers=cfg.run.threads)
        inten = np.zeros((g.ncx, g.ncy))
        if z.n_par:
            par, inten[: z.n_par] = self._paraxial()
            ky_shift = par.K[1] - coeffs.K[1]
            alpha_in = couple_to_helmholtz(par.E_out, z.wave, g.coarse_y, ky_shift=ky_shift)
        else:
            alpha_in = self.alpha_in
        rhs = assemble_rhs(self.psi, coeffs, alpha_in, z.wave)
        b = system.restrict(rhs)
        x0 = system.restrict(self.psi) if np.any(self.psi) else None
        return StepProblem(dt, dN, system, prec, b, x0, rebuilt, inten)

    def solve(self, prob: "StepProblem"):
        cfg = self.cfg
        return gmres_solve(prob.system.apply_M, prob.prec.apply_MD_inverse, prob.b,
                           KrylovConfig(cfg.solver.tol, cfg.solver.max_iter), x0=prob.x0)

    def step(self) -> StepRecord:
        t_wall = time.perf_counter()
        z, g = self.zones, self.grid
        k = self.step_index + 1
        try:
            prob = self.prepare()
            res = self.solve(prob)
            self.psi = prob.system.prolong(res.x)
            inten = prob.intensity
            inten[z.n_par:] = coarse_intensity(self.psi, z.wave)
            fine = np.repeat(np.repeat(inten, g.p0, axis=0), g.p0, axis=1)
            fine[z.fine_offset:] = np.abs(self.psi) ** 2
            self.plasma = hydro_step(self.plasma, inten, prob.dt, self.frozen_rows)
        except Exception as exc:
            raise SimulationError(f"step {k} failed: {exc}") from exc
        self.step_index = k
        self.time += prob.dt
        self.last_intensity = inten
        self.last_fine_intensity = fine
        self.gmres_log.record(k, res)
        rec = StepRecord(k, self.time, prob.dt, res.iterations, res.final_residual, res.converged,
                         float(np.abs(prob.delta_n[:, ~g.pml_mask]).max()), prob.basis_rebuilt,
                         time.perf_counter() - t_wall)
        self.records.append(rec)
        log.info("step %d t=%.4g ps dt=%.3g gmres=%d res=%.2e max|dN|=%.3e", k, self.time, prob.dt,
                 rec.iterations, rec.residual, rec.max_delta_n)
        return rec

    # -- outputs ------------------------------------------------------------

    def emit(self) -> None:
        if self.out_dir is None:
            return
        k = self.step_index
        emit_field_map(self.last_fine_intensity, self.out_dir / f"intensity_{k:03d}")
        emit_field_map(self.plasma.N, self.out_dir / f"density_{k:03d}")

    def write_log(self) -> None:
        if self.out_dir is not None:
            self.gmres_log.write(self.out_dir / "gmres_log.csv")

    def save_checkpoint(self, path) -> None:
        p = self.plasma
        np.savez(path, step=self.step_index, time=self.time, N=p.N, Ux=p.Ux, Uy=p.Uy, Te=p.Te,
                 gamma_p=p.gamma_p, psi=self.psi, config=dump_config(self.cfg))

    @classmethod
    def from_checkpoint(cls, path, out_dir=None, cfg: SimConfig | None = None) -> "Simulation":
        with np.load(path, allow_pickle=False) as d:
            cfg = parse_config(str(d["config"])) if cfg is None else cfg
            grid = cfg.grid.build()
            plasma = PlasmaState(d["N"], d["Ux"], d["Uy"], d["Te"], float(d["gamma_p"]), grid.hx, grid.hy)
            return cls(cfg, out_dir, int(d["step"]), float(d["time"]), plasma, d["psi"].copy())

    def run(self, n_steps: int | None = None) -> list[StepRecord]:
        n_steps = self.cfg.run.n_steps if n_steps is None else n_steps
        every = self.cfg.run.output_every
        ck = self.cfg.run.checkpoint_every
        if self.step_index == 0:
            self.emit()
        for _ in range(n_steps):
            self.step()
            if self.step_index % every == 0:
                self.emit()
            if ck and self.out_dir is not None and self.step_index % ck == 0:
                self.save_checkpoint(self.out_dir / f"checkpoint_{self.step_index:03d}.npz")
        self.write_log()
        return self.records


def run_simulation(cfg: SimConfig, out_dir=None, restart=None) -> Simulation:
    """Run ``cfg.run.n_steps`` coupled steps, writing maps and the GMRES log under ``out_dir``."""
    out_dir = Path(cfg.run.output_dir) if out_dir is None else Path(out_dir)
    if restart is not None:
        sim = Simulation.from_checkpoint(restart, out_dir, cfg)
        remaining = max(cfg.run.n_steps - sim.step_index, 0)
    else:
        sim = Simulation(cfg, out_dir)
        remaining = cfg.run.n_steps
    sim.run(remaining)
    return sim


def solve_stationary(grid: GridSpec, N: np.ndarray, alpha_in: np.ndarray, theta: float = 0.0, mu0: float = 0.0,
                     nu: float = 0.0, tol: float = 1e-8, max_iter: int = 200, dispersion_correction: bool = True,
                     pml_strength: float | None = None, workers: int = 1):
    """One frequency-domain solve on ``grid`` with no plasma coupling.

    ``N`` is either an x-profile ``(nx,)`` or a full fine-grid density
    ``(nx, ny)``, split into its y-mean and the remainder.  ``nu`` is a
    uniform absorption rate.  Returns the full-grid field and the GMRES
    result.
    """
    N = np.asarray(N, dtype=float)
    if N.ndim == 1:
        N0, dN = N, None
    else:
        N0, dN = density_decompose(N, grid.pml_mask)
    co = HelmholtzCoeffs(N0, mu0, mu0 + grid.eps * nu, theta, dN, dispersion_correction)
    pml = build_pml(grid, pml_strength)
    A0 = assemble_A0(grid, co)
    system = assemble_ddm(grid, co, pml, assemble_separable(A0, grid, co), A0)
    prec = PreconditionerState.build(system, workers=workers)
    rhs = assemble_rhs(np.zeros((grid.nx, grid.ny), dtype=complex), co, alpha_in, grid)
    res = gmres_solve(system.apply_M, prec.apply_MD_inverse, system.restrict(rhs), KrylovConfig(tol, max_iter))
    return system.prolong(res.x), res
