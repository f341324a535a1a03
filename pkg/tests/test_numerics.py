import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from symdlra.numerics import (
    OdeProblem,
    StepSizeUnderflow,
    arnoldi_apply_expm,
    expm,
    fft,
    fft_frequencies,
    gaussian,
    ifft,
    qr_thin,
    random_orthonormal,
    random_skew,
    random_spd_lowrank,
    rk4,
    rk45_adaptive,
    seeded_random,
    svd,
    truncate,
)


# --- QR -----------------------------------------------------------------


def test_qr_identity():
    Q, R = qr_thin(np.eye(3))
    np.testing.assert_array_equal(Q, np.eye(3))
    np.testing.assert_array_equal(R, np.eye(3))


def test_qr_permutation_columns():
    M = np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
    Q, R = qr_thin(M)
    assert np.linalg.norm(Q.T @ Q - np.eye(2)) <= 1e-14
    assert np.linalg.norm(Q @ R - M) <= 1e-12


def test_qr_random_reconstruction():
    M = gaussian((100, 10), 1)
    Q, R = qr_thin(M)
    assert np.linalg.norm(Q @ R - M) / np.linalg.norm(M) <= 1e-13


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), shape=st.sampled_from([(5, 2), (50, 10), (128, 5)]), cplx=st.booleans())
def test_qr_properties(seed, shape, cplx):
    M = gaussian(shape, seed, complex_=cplx)
    Q, R = qr_thin(M)
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(shape[1])) <= 1e-12
    assert np.linalg.norm(Q @ R - M) <= 1e-12 * np.linalg.norm(M)
    diag = np.diag(R)
    assert np.all(np.abs(diag.imag) == 0) and np.all(diag.real >= 0)
    assert np.allclose(np.tril(R, -1), 0)


# --- SVD ----------------------------------------------------------------


def test_truncate_diagonal():
    f = truncate(np.diag([3.0, 2.0, 1.0]), 2)
    np.testing.assert_allclose(f.sigma, [3.0, 2.0])
    resid = np.linalg.norm(np.diag([3.0, 2.0, 1.0]) - f.U @ np.diag(f.sigma) @ f.V.T)
    assert resid == pytest.approx(1.0, abs=1e-14)


def test_svd_symmetric_subspaces():
    B = gaussian((12, 12), 3)
    M = B + B.T
    f = svd(M)
    assert np.linalg.norm(f.U @ f.U.T - f.V @ f.V.T) <= 1e-10


def test_truncate_matches_eigen_oracle():
    M = gaussian((20, 20), 2)
    f = truncate(M, 5)
    resid = np.linalg.norm(M - f.U @ np.diag(f.sigma) @ f.V.conj().T)
    evals = np.sort(np.linalg.eigvalsh(M.T @ M))[::-1]
    assert resid == pytest.approx(np.sqrt(evals[5:].sum()), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), r=st.integers(1, 7))
def test_truncation_error_is_tail(seed, r):
    M = gaussian((9, 8), seed)
    s = svd(M).sigma
    f = truncate(M, r)
    err = np.linalg.norm(M - f.U @ np.diag(f.sigma) @ f.V.T)
    assert err == pytest.approx(np.sqrt(np.sum(s[r:] ** 2)), rel=1e-10, abs=1e-13)


# --- expm ---------------------------------------------------------------


def test_expm_zero():
    np.testing.assert_array_equal(expm(np.zeros((4, 4))), np.eye(4))


def test_expm_rotation():
    th = np.pi / 2
    E = expm(np.array([[0.0, -th], [th, 0.0]]))
    assert np.linalg.norm(E - np.array([[0.0, -1.0], [1.0, 0.0]])) <= 1e-12


def test_expm_skew_orthogonal():
    E = expm(random_skew(10, 3))
    assert np.linalg.norm(E.T @ E - np.eye(10)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_expm_inverse(seed):
    A = 0.3 * gaussian((6, 6), seed)
    assert np.linalg.norm(expm(A) @ expm(-A) - np.eye(6)) <= 1e-10


# --- ODE solvers -------------------------------------------------------


def test_rk4_zero_rhs():
    y0 = np.array([1.0, -2.0, 3.0])
    y = rk4(OdeProblem(lambda t, y: np.zeros_like(y), 0.0, 1.0, y0), 10)
    np.testing.assert_array_equal(y, y0)


def test_rk4_exponential():
    y = rk4(OdeProblem(lambda t, y: y, 0.0, 1.0, np.array([1.0])), 100)
    assert abs(y[0] - np.e) <= 1e-8


def test_rk4_stiff_divergence():
    lam = -1e6
    prob = OdeProblem(lambda t, y: lam * y, 0.0, 0.05, np.array([1.0]))
    y = rk4(prob, 5)  # h = 0.01
    assert abs(y[0]) > 1.0


def test_rk4_fourth_order():
    prob = lambda m: rk4(OdeProblem(lambda t, y: np.cos(t) * y, 0.0, 1.0, np.array([1.0])), m)
    exact = np.exp(np.sin(1.0))
    e1, e2 = abs(prob(10)[0] - exact), abs(prob(20)[0] - exact)
    assert np.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)


def test_rk45_matches_scipy():
    A = gaussian((5, 5), 4) - 3 * np.eye(5)
    y0 = gaussian((5,), 5)
    y = rk45_adaptive(OdeProblem(lambda t, y: A @ y + np.sin(t), 0.0, 1.5, y0), 1e-10, 1e-14)
    ref = scipy.integrate.solve_ivp(lambda t, y: A @ y + np.sin(t), (0.0, 1.5), y0, rtol=1e-12, atol=1e-14, method="DOP853").y[:, -1]
    assert np.linalg.norm(y - ref) <= 1e-8 * np.linalg.norm(ref)


def test_rk45_matrix_state_and_complex():
    y0 = np.eye(3, dtype=complex)
    y = rk45_adaptive(OdeProblem(lambda t, y: 1j * y, 0.0, 1.0, y0), 1e-10, 1e-14)
    assert y.shape == (3, 3)
    assert np.linalg.norm(y - np.exp(1j) * np.eye(3)) <= 1e-8


def test_rk45_underflow():
    # finite-time blow-up at t = 1
    with pytest.raises(StepSizeUnderflow):
        rk45_adaptive(OdeProblem(lambda t, y: y**2, 0.0, 2.0, np.array([1.0])), 1e-10, 1e-14)


# --- FFT ----------------------------------------------------------------


def test_fft_constant_is_delta():
    c = fft(np.ones(16, dtype=complex))
    expected = np.zeros(16)
    expected[0] = 16
    assert np.allclose(c, expected, atol=1e-12)


def test_fft_pure_mode():
    K = 32
    x = 2 * np.pi * np.arange(K) / K
    c = fft(np.exp(1j * x))
    k = fft_frequencies(K)
    assert np.count_nonzero(np.abs(c) > 1e-10) == 1
    assert k[np.argmax(np.abs(c))] == 1


def test_fft_roundtrip_and_norm():
    v = gaussian((128,), 4, complex_=True)
    assert np.linalg.norm(ifft(fft(v)) - v) <= 1e-13 * np.linalg.norm(v)
    assert np.linalg.norm(fft(v)) ** 2 == pytest.approx(128 * np.linalg.norm(v) ** 2, rel=1e-13)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        fft(np.ones(12))
    with pytest.raises(ValueError):
        fft_frequencies(12)


# --- Arnoldi -------------------------------------------------------------


def test_arnoldi_zero_operator():
    b = gaussian((7,), 1)
    np.testing.assert_allclose(arnoldi_apply_expm(lambda v: 0 * v, b, 1.0), b, atol=0)


def test_arnoldi_diagonal():
    a = np.linspace(-2, 1, 8)
    b = np.zeros(8)
    b[3] = 1.0
    out = arnoldi_apply_expm(lambda v: a * v, b, 0.7)
    assert np.linalg.norm(out - np.exp(0.7 * a[3]) * b) <= 1e-12


def test_arnoldi_random_matches_dense():
    A = gaussian((50, 50), 5)
    b = gaussian((50,), 6)
    out = arnoldi_apply_expm(lambda v: A @ v, b, 0.01, krylov_dim=30)
    ref = scipy.linalg.expm(0.01 * A) @ b
    assert np.linalg.norm(out - ref) <= 1e-8 * np.linalg.norm(ref)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), scale=st.floats(-1.0, 1.0))
def test_arnoldi_full_dimension(seed, scale):
    n = 12
    A = gaussian((n, n), seed)
    b = gaussian((n,), seed + 1)
    out = arnoldi_apply_expm(lambda v: A @ v, b, scale, krylov_dim=n)
    ref = scipy.linalg.expm(scale * A) @ b
    assert np.linalg.norm(out - ref) <= 1e-10 * max(1.0, np.linalg.norm(ref))


def test_arnoldi_complex_operator_real_vector():
    H = gaussian((10, 10), 8)
    H = H + H.T
    b = gaussian((10,), 9)
    out = arnoldi_apply_expm(lambda v: -1j * (H @ v), b, 0.3)
    ref = scipy.linalg.expm(-0.3j * H) @ b
    assert np.linalg.norm(out - ref) <= 1e-10
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(b), rel=1e-10)


# --- random generators ------------------------------------------------------


def test_random_orthonormal():
    Q = random_orthonormal(100, 10, 1)
    assert np.linalg.norm(Q.conj().T @ Q - np.eye(10)) <= 1e-12


def test_random_skew_exact():
    W = random_skew(100, 2)
    assert np.array_equal(W + W.T, np.zeros_like(W))


def test_random_spd_lowrank():
    A = random_spd_lowrank(100, 5, 3)
    ev = np.linalg.eigvalsh(A)
    assert ev.min() >= -1e-10 * ev.max()
    assert np.linalg.matrix_rank(A) == 5


def test_seeded_random_reproducible():
    a = seeded_random("gaussian", 4, 3, seed=7)
    b = seeded_random("gaussian", 4, 3, seed=7)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, seeded_random("gaussian", 4, 3, seed=8))
    assert seeded_random("orthonormal", 10, 3, seed=1).shape == (10, 3)
    with pytest.raises(ValueError):
        seeded_random("nonsense", 3, seed=1)
