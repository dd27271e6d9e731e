import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserhelm.hydro import (HydroError, PlasmaState, cfl_timestep, density_decompose, hydro_step,
                             ponderomotive_source, total_mass)


def state(N, Te=0.09, gamma_p=0.01, h=0.2, Ux=0.0, Uy=0.0):
    return PlasmaState(np.asarray(N, dtype=float), Ux, Uy, Te, gamma_p, h, h)


def loop_step(N, Ux, Uy, Te, I, gp, h, dt):
    """Cell-by-cell LLF update with mirrored walls; constant Te."""
    nx, ny = N.shape
    q = np.stack([N, N * Ux, N * Uy])

    def get(i, j):
        ii = min(max(i, 0), nx - 1)
        jj = min(max(j, 0), ny - 1)
        v = q[:, ii, jj].copy()
        if i != ii:
            v[1] = -v[1]
        if j != jj:
            v[2] = -v[2]
        return v

    def flux(v, ax):
        un = v[1 + ax] / v[0]
        f = np.array([v[0] * un, v[1] * un, v[2] * un])
        f[1 + ax] += v[0] * Te
        return f, abs(un) + math.sqrt(Te)

    def llf(a, b, ax):
        fa, sa = flux(a, ax)
        fb, sb = flux(b, ax)
        return 0.5 * (fa + fb) - 0.5 * max(sa, sb) * (b - a)

    out = np.empty_like(q)
    for i in range(nx):
        for j in range(ny):
            c = get(i, j)
            fxp = llf(c, get(i + 1, j), 0)
            fxm = llf(get(i - 1, j), c, 0)
            fyp = llf(c, get(i, j + 1), 1)
            fym = llf(get(i, j - 1), c, 1)
            r = -(fxp - fxm) / h - (fyp - fym) / h
            # centred gradient, one-sided at the ends
            gx = ((I[min(i + 1, nx - 1), j] - I[max(i - 1, 0), j])
                  / (h * (min(i + 1, nx - 1) - max(i - 1, 0))))
            gy = ((I[i, min(j + 1, ny - 1)] - I[i, max(j - 1, 0)])
                  / (h * (min(j + 1, ny - 1) - max(j - 1, 0))))
            r[1] -= gp * c[0] * gx
            r[2] -= gp * c[0] * gy
            out[:, i, j] = c + dt * r
    return out


# -- time step ------------------------------------------------------------------

def test_cfl_at_rest():
    s = state(np.ones((4, 4)), Te=1.0)
    assert cfl_timestep(s, 0.5) == pytest.approx(0.5 * 0.2)


def test_cfl_hotter_plasma():
    a = cfl_timestep(state(np.ones((4, 4)), Te=1.0))
    b = cfl_timestep(state(np.ones((4, 4)), Te=2.0))
    assert b == pytest.approx(a / math.sqrt(2))


def test_cfl_loop_oracle():
    rng = np.random.default_rng(0)
    Ux, Uy = rng.standard_normal((2, 5, 6))
    s = PlasmaState(np.ones((5, 6)), Ux, Uy, 0.3, 0.0, 0.2, 0.1)
    speeds = [math.hypot(Ux[i, j], Uy[i, j]) + math.sqrt(0.3) for i in range(5) for j in range(6)]
    assert cfl_timestep(s, 0.4) == pytest.approx(0.4 * 0.1 / max(speeds))


def test_cfl_bad_number():
    with pytest.raises(ValueError):
        cfl_timestep(state(np.ones((2, 2))), 1.5)


# -- update -----------------------------------------------------------------------

def test_step_matches_loop_oracle():
    rng = np.random.default_rng(1)
    N = 1 + 0.2 * rng.random((6, 5))
    Ux = 0.1 * rng.standard_normal((6, 5))
    Uy = 0.1 * rng.standard_normal((6, 5))
    I = rng.random((6, 5))
    s = PlasmaState(N, Ux, Uy, 0.09, 0.05, 0.2, 0.2)
    dt = 0.5 * cfl_timestep(s)
    got = hydro_step(s, I, dt)
    ref = loop_step(N, Ux, Uy, 0.09, I, 0.05, 0.2, dt)
    assert np.allclose(got.N, ref[0], rtol=1e-13)
    assert np.allclose(got.N * got.Ux, ref[1], atol=1e-14)
    assert np.allclose(got.N * got.Uy, ref[2], atol=1e-14)


def test_uniform_rest_is_fixed_point():
    s = state(np.full((8, 8), 0.4))
    nxt = hydro_step(s, np.full((8, 8), 3.0), cfl_timestep(s))
    assert np.array_equal(nxt.N, s.N)
    assert not nxt.Ux.any() and not nxt.Uy.any()


@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_mass_conserved(seed, gp):
    rng = np.random.default_rng(seed)
    s = PlasmaState(0.5 + rng.random((7, 9)), 0.2 * rng.standard_normal((7, 9)),
                    0.2 * rng.standard_normal((7, 9)), 0.09, gp, 0.2, 0.2)
    m0 = total_mass(s)
    I = rng.random((7, 9))
    for _ in range(5):
        s = hydro_step(s, I, cfl_timestep(s, 0.4))
    assert abs(total_mass(s) - m0) <= 1e-12 * m0


def test_intensity_bump_digs_density():
    n = 21
    x = np.arange(n) * 0.2
    X, Y = np.meshgrid(x, x, indexing="ij")
    c = x[n // 2]
    I = np.exp(-((X - c) ** 2 + (Y - c) ** 2) / 0.5)
    s = state(np.full((n, n), 0.5), gamma_p=0.2)
    for _ in range(20):
        s = hydro_step(s, I, cfl_timestep(s))
    assert s.N[n // 2, n // 2] < 0.5
    assert s.N[n // 2, n // 2] == s.N.min()


def test_zero_intensity_sound_wave_symmetry():
    """A symmetric density bump stays symmetric and spreads."""
    n = 15
    x = np.arange(n)
    N = 1 + 0.1 * np.exp(-((x - 7) ** 2) / 4.0)
    s = state(np.repeat(N[:, None], 3, axis=1))
    peak0 = s.N.max()
    for _ in range(10):
        s = hydro_step(s, np.zeros_like(s.N), cfl_timestep(s))
    assert np.allclose(s.N, s.N[::-1], atol=1e-14)
    assert s.N.max() < peak0
    assert np.allclose(s.Uy, 0.0)


def test_frozen_rows_get_no_force():
    rng = np.random.default_rng(2)
    s = state(np.ones((4, 6)))
    mask = np.array([True, False, False, False, False, True])
    sx, sy = ponderomotive_source(s, rng.random((4, 6)), mask)
    assert not sx[:, mask].any() and not sy[:, mask].any()
    assert sx[:, ~mask].any()


def test_negative_density_reported():
    with pytest.raises(HydroError):
        state(-np.ones((2, 2)))
    s = PlasmaState(np.full((4, 4), 1e-3), 5.0, 0.0, 0.09, 0.0, 0.2, 0.2)
    with pytest.raises(HydroError, match="coarse cell"):
        hydro_step(s, np.zeros((4, 4)), 10.0)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        state(np.ones((2, 2)), Te=0.0)
    with pytest.raises(ValueError):
        hydro_step(state(np.ones((2, 2))), np.zeros((2, 2)), 0.0)
    with pytest.raises(ValueError):
        ponderomotive_source(state(np.ones((2, 2))), np.zeros((3, 2)))


# -- density decomposition -----------------------------------------------------------

def test_decompose_y_independent():
    N = np.repeat(np.linspace(0.1, 0.9, 5)[:, None], 7, axis=1)
    N0, dn = density_decompose(N)
    assert np.allclose(N0, N[:, 0], rtol=1e-15)
    assert np.abs(dn).max() <= 1e-15


def test_decompose_sine_ripple():
    y = (np.arange(32) + 0.5) / 32
    N = 0.3 + 0.05 * np.sin(2 * np.pi * y)[None, :] * np.ones((4, 1))
    N0, dn = density_decompose(N)
    assert np.allclose(N0, 0.3, atol=1e-15)
    assert np.allclose(dn, 0.05 * np.sin(2 * np.pi * y)[None, :], atol=1e-15)


def test_decompose_excludes_pml_rows():
    N = np.ones((3, 6))
    N[:, 0] = N[:, -1] = 100.0
    mask = np.zeros(6, dtype=bool)
    mask[[0, -1]] = True
    N0, _ = density_decompose(N, mask)
    assert np.allclose(N0, 1.0)


@given(st.integers(0, 2**31 - 1))
def test_decompose_reconstructs(seed):
    N = np.random.default_rng(seed).random((5, 11))
    N0, dn = density_decompose(N)
    assert np.abs(N0[:, None] + dn - N).max() <= np.spacing(N.max())
    # mean of the remainder vanishes
    assert np.abs(dn.mean(axis=1)).max() <= 1e-15
