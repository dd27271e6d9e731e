import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserhelm.assembly import HelmholtzCoeffs, Tridiag, assemble_A0
from laserhelm.spectral import (BasisBreakdown, SpectralBasis, basis_key, blocked_matmul, eigendecompose,
                                from_spectral, load_basis, save_basis, to_spectral)
from oracles import make_grid


def linear_ramp_A0(n):
    """Linear N0 from 0.1 to 1.1 with a complex incoming corner."""
    g = make_grid(nx=n)
    return assemble_A0(g, HelmholtzCoeffs(np.linspace(0.1, 1.1, n), 0.0, 0.0, theta=0.2))


def test_two_by_two():
    a, b = 3.0, 0.5
    B = eigendecompose(Tridiag(np.array([a, a], dtype=complex), np.array([b], dtype=complex)))
    assert np.allclose(B.lam, [a - b, a + b])
    assert np.allclose(np.abs(B.Q), 1 / np.sqrt(2))
    assert np.isclose(B.Q[0, 0] * B.Q[1, 0], -0.5) and np.isclose(B.Q[0, 1] * B.Q[1, 1], 0.5)


def test_diagonal_case():
    d = np.array([3.0, 1.0, 2.0 + 1j, 5.0], dtype=complex)
    B = eigendecompose(Tridiag(d, np.zeros(3, dtype=complex)))
    order = np.lexsort((d.imag, d.real))
    assert np.allclose(B.lam, d[order])
    assert np.allclose(np.abs(B.Q), np.eye(4)[:, order])


def test_real_symmetric_matches_hermitian_oracle():
    n = 40
    d = np.full(n, -2.0) + 0j
    d[0] = d[-1] = -1.0
    B = eigendecompose(Tridiag(d, np.ones(n - 1, dtype=complex)))
    ref = np.linalg.eigvalsh(np.diag(d.real) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    assert np.allclose(np.sort(B.lam.real), ref, atol=1e-10)
    assert np.abs(B.lam.imag).max() < 1e-10


@pytest.mark.parametrize("method", ["dense", "structured"])
@pytest.mark.parametrize("n", [16, 128, 512])
def test_basis_contract(method, n):
    A0 = linear_ramp_A0(n)
    B = eigendecompose(A0, method=method)
    assert B.orthogonality_error() <= 1e-10
    assert B.residual(A0) <= 1e-10 * A0.norm_max()
    assert np.allclose(np.sum(B.Q * B.Q, axis=0), 1.0, atol=1e-10)
    # deterministic order: by real part, then imaginary part
    assert np.all(np.diff(B.lam.real) >= 0)


def test_structured_agrees_with_dense():
    A0 = linear_ramp_A0(200)
    a = eigendecompose(A0, method="dense")
    b = eigendecompose(A0, method="structured")
    assert np.allclose(a.lam, b.lam, atol=1e-10 * A0.norm_max())


def test_quasi_null_vector_breakdown():
    # [[1, i], [i, -1]] is nilpotent-like: the eigenvector (1, i) has v^T v = 0
    A = Tridiag(np.array([1.0, -1.0], dtype=complex), np.array([1j]))
    with pytest.raises((BasisBreakdown, np.linalg.LinAlgError)):
        eigendecompose(A, method="dense")


def test_bad_method():
    with pytest.raises(ValueError):
        eigendecompose(linear_ramp_A0(8), method="qd")


# -- transforms -------------------------------------------------------------------

def test_transform_identity_columns():
    B = eigendecompose(linear_ramp_A0(32))
    assert np.allclose(to_spectral(B, B.Q), np.eye(32), atol=1e-10)


def test_single_column_matvec():
    B = eigendecompose(Tridiag(np.array([1, 2, 3], dtype=complex) + 0.1j, np.array([0.5, 0.25], dtype=complex)))
    f = np.array([1.0, -2.0, 0.5j])
    ref = np.array([sum(B.Q[i, j] * f[i] for i in range(3)) for j in range(3)])
    assert np.allclose(to_spectral(B, f), ref)
    assert np.allclose(from_spectral(B, f), B.Q @ f)


def test_transform_dimension_mismatch():
    B = eigendecompose(linear_ramp_A0(8))
    with pytest.raises(ValueError):
        to_spectral(B, np.ones((7, 2)))


def test_zero_batch():
    B = eigendecompose(linear_ramp_A0(8))
    assert not from_spectral(B, np.zeros((8, 5))).any()


@given(st.integers(0, 2**31 - 1), st.integers(1, 40))
def test_roundtrip(seed, ncols):
    B = eigendecompose(linear_ramp_A0(24))
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((24, ncols)) + 1j * rng.standard_normal((24, ncols))
    assert np.allclose(from_spectral(B, to_spectral(B, F)), F, atol=1e-10 * np.abs(F).max())


def test_blocked_matmul_one_block_bitwise():
    rng = np.random.default_rng(0)
    q = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    b = rng.standard_normal((64, 32)) + 1j * rng.standard_normal((64, 32))
    assert np.array_equal(blocked_matmul(q, b, 1, 1), q @ b)


def test_blocked_matmul_two_by_two():
    rng = np.random.default_rng(1)
    q = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    b = rng.standard_normal((64, 32)) + 1j * rng.standard_normal((64, 32))
    got = blocked_matmul(q, b, 2, 2)
    ref = np.empty_like(got)
    for r0, r1 in ((0, 32), (32, 64)):
        for c0, c1 in ((0, 16), (16, 32)):
            ref[r0:r1, c0:c1] = q[r0:r1] @ b[:, c0:c1]
    assert np.array_equal(got, ref)
    assert np.allclose(got, q @ b, rtol=1e-13)


@pytest.mark.parametrize("workers", [2, 3, 4])
def test_blocked_matmul_thread_independent(workers):
    rng = np.random.default_rng(2)
    q = rng.standard_normal((300, 300)) + 1j * rng.standard_normal((300, 300))
    b = rng.standard_normal((300, 700)) + 1j * rng.standard_normal((300, 700))
    assert np.array_equal(blocked_matmul(q, b, workers=workers), blocked_matmul(q, b, workers=1))


def test_blocked_matmul_mismatch():
    with pytest.raises(ValueError):
        blocked_matmul(np.ones((3, 4)), np.ones((3, 2)))


# -- cache ---------------------------------------------------------------------------

def test_cache_roundtrip(tmp_path):
    A0 = linear_ramp_A0(16)
    B = eigendecompose(A0)
    path = tmp_path / f"{basis_key(A0)}.spb"
    save_basis(path, B)
    raw = path.read_bytes()
    assert raw[:4] == b"SPB1"
    C = load_basis(path)
    assert np.array_equal(C.Q, B.Q) and np.array_equal(C.lam, B.lam)


def test_cache_key_tracks_entries():
    a = linear_ramp_A0(16)
    b = Tridiag(a.diag.copy(), a.off.copy())
    assert basis_key(a) == basis_key(b)
    b.diag[3] += 1e-9
    assert basis_key(a) != basis_key(b)


def test_cache_rejects_garbage(tmp_path):
    p = tmp_path / "x.spb"
    p.write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        load_basis(p)


def test_permutation_invariance_of_spectrum():
    A0 = linear_ramp_A0(20)
    B = eigendecompose(A0)
    perm = np.random.default_rng(0).permutation(20)
    C = SpectralBasis(B.Q[:, perm], B.lam[perm])
    assert np.allclose(np.sort_complex(C.lam), np.sort_complex(B.lam))
    assert C.residual(A0) == pytest.approx(B.residual(A0))
