import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserhelm.fields import GridSpec
from laserhelm.paraxial import (ParaxialState, cn_symbol, couple_to_helmholtz, march_envelope, paraxial_march,
                                sponge_profile)

EPS = 0.351 / (2 * math.pi)


def slab(ny=80, dy=0.035):
    return (np.arange(ny) + 0.5) * dy


@pytest.mark.parametrize("theta", [0.0, 0.1])
def test_plane_wave_matches_symbol(theta):
    y = slab()
    dy = y[1] - y[0]
    q = 2 * math.pi / (20 * dy)  # 20 points per transverse wavelength, whole periods in the box
    k = math.sqrt(1 - 0.3)
    K = (k * math.cos(theta), k * math.sin(theta))
    h, n = 0.02, 30
    E0 = np.exp(1j * q * y)
    out = march_envelope(E0, np.full((n + 1, y.size), 0.3), y, np.full(n, h), K, EPS, 0.3, periodic=True)
    ref = cn_symbol(q, dy, h, K, EPS) ** n * E0
    assert np.abs(out[-1] - ref).max() <= 1e-6


def test_symbol_tends_to_paraxial_dispersion():
    """For small steps the phase per unit x approaches the continuous value."""
    K = (0.8, 0.0)
    q, dy = 5.0, 1e-3
    h = 1e-4
    phase = np.angle(cn_symbol(q, dy, h, K, EPS)) / h
    assert phase == pytest.approx(-EPS * q**2 / (2 * K[0]), rel=1e-4)


def test_absorption_ode():
    y = slab(16)
    K, nu, h, n = (0.9, 0.0), 0.4, 0.05, 40
    out = march_envelope(np.ones(16), np.full((n + 1, 16), 0.19), y, np.full(n, h), K, EPS, 0.19,
                         nu=nu, periodic=True)
    a = nu / (2 * K[0])
    g = (1 - 0.5 * h * a) / (1 + 0.5 * h * a)
    assert np.allclose(out[-1], g**n, rtol=1e-12)
    assert np.allclose(out[-1], math.exp(-a * h * n), rtol=1e-3)


def test_zero_input():
    y = slab(20)
    out = march_envelope(np.zeros(20), np.zeros((6, 20)), y, np.full(5, 0.1), (1.0, 0.0), EPS, 0.0)
    assert not out.any()


@given(st.integers(0, 2**31 - 1), st.booleans())
def test_norm_conserved(seed, periodic):
    rng = np.random.default_rng(seed)
    y = slab(40)
    E0 = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    N = 0.3 + 0.05 * rng.standard_normal((11, 40))
    out = march_envelope(E0, N, y, np.full(10, 0.05), (0.8, 0.2), EPS, 0.3, periodic=periodic)
    n0 = np.linalg.norm(E0)
    assert abs(np.linalg.norm(out[-1]) - n0) <= 1e-10 * n0


@given(st.integers(0, 2**31 - 1), st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_linearity(seed, c):
    rng = np.random.default_rng(seed)
    y = slab(24)
    N = 0.2 + 0.02 * rng.random((5, 24))
    a = rng.standard_normal(24) + 0j
    b = rng.standard_normal(24) + 0j
    run = lambda e: march_envelope(e, N, y, np.full(4, 0.1), (0.9, 0.1), EPS, 0.2, nu=0.1)[-1]
    lhs, rhs = run(a + c * b), run(a) + c * run(b)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(np.abs(lhs).max(), 1.0)


def test_rejects_backward_carrier():
    y = slab(8)
    with pytest.raises(ValueError):
        march_envelope(np.ones(8), np.zeros((2, 8)), y, [0.1], (0.0, 1.0), EPS, 0.0)


def test_rejects_bad_shapes():
    with pytest.raises(ValueError):
        march_envelope(np.ones(8), np.zeros((3, 8)), slab(8), [0.1], (1.0, 0.0), EPS, 0.0)


def test_state_validation():
    with pytest.raises(ValueError):
        ParaxialState(np.zeros((1, 2)), np.zeros(1), np.zeros(2), (1.0, 0.5), 0.0)
    with pytest.raises(ArithmeticError):
        ParaxialState(np.full((1, 2), np.nan), np.zeros(1), np.zeros(2), (1.0, 0.0), 0.0)


def test_sponge_shape():
    y = np.arange(10.0)
    mask = np.array([True] * 3 + [False] * 4 + [True] * 3)
    r = sponge_profile(y, mask, 1e-4)
    assert not r[~mask].any()
    assert r[0] == r.max() and r[-1] == r.max()
    # the rate integrated over the layer depth equals log(1/R)
    assert math.exp(-r[0] * 3 / 3) == pytest.approx(1e-4)
    assert not sponge_profile(y, np.zeros(10, dtype=bool)).any()


# -- grid driver and coupling -----------------------------------------------------------

@pytest.fixture(scope="module")
def grid():
    return GridSpec.build(0.351, 3.51, 7.02)


def test_march_on_grid_uniform(grid):
    N = np.full((4, grid.ncy), 0.25)
    phys = ~grid.coarse_pml_mask
    E_in = np.where(phys, 1.0, 0.0) + 0j
    st_ = paraxial_march(E_in, N, grid, n_columns=4)
    assert st_.E.shape == (4, grid.ncy)
    assert st_.N_av == pytest.approx(0.25)
    assert np.allclose(st_.x, grid.coarse_x[:4])
    # centre of the beam stays flat
    mid = grid.ncy // 2
    assert abs(st_.E[-1, mid]) == pytest.approx(1.0, abs=1e-3)


def test_end_face_adds_station(grid):
    N = np.full((3, grid.ny), 0.25)
    st_ = paraxial_march(np.ones(grid.ny), N, grid, level="fine", n_columns=3, end_face=True)
    assert st_.x[-1] == pytest.approx(3 * grid.dx)
    assert st_.E.shape == (4, grid.ny)


def test_bad_level(grid):
    with pytest.raises(ValueError):
        paraxial_march(np.ones(grid.ny), np.zeros((2, grid.ny)), grid, level="medium", n_columns=2)


def test_couple_zero_and_constant(grid):
    assert not couple_to_helmholtz(np.zeros(grid.ncy), grid).any()
    a = couple_to_helmholtz(np.ones(grid.ncy), grid)
    inside = (grid.y >= grid.coarse_y[0]) & (grid.y <= grid.coarse_y[-1])
    assert np.allclose(a[inside], 1.0)


def test_couple_same_rows_is_copy(grid):
    e = np.random.default_rng(0).standard_normal(grid.ny) + 0j
    assert np.array_equal(couple_to_helmholtz(e, grid, y_src=grid.y), e)


def test_couple_phase_shift(grid):
    a = couple_to_helmholtz(np.ones(grid.ny), grid, y_src=grid.y, ky_shift=0.1)
    assert np.allclose(a, np.exp(0.1j * grid.y / grid.eps))


def test_couple_length_mismatch(grid):
    with pytest.raises(ValueError):
        couple_to_helmholtz(np.ones(3), grid)
