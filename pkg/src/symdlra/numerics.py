"""Dense linear-algebra and time-integration primitives.

Conventions used across the package:

* QR factors are normalized so that ``diag(R)`` is real and nonnegative.
* The FFT is unnormalized in the forward direction and scaled by ``1/K`` in the
  inverse direction (numpy's convention).  Frequencies are laid out in numpy
  order ``0, 1, ..., K/2-1, -K/2, ..., -1``; :func:`fft_frequencies` returns them
  as integers.
* Random inputs come from ``numpy.random.Generator(PCG64(seed))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg


class QRFactors(NamedTuple):
    Q: np.ndarray
    R: np.ndarray


class SvdFactors(NamedTuple):
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray


class StepSizeUnderflow(RuntimeError):
    """Raised when the adaptive integrator cannot meet its tolerances."""


@dataclass(frozen=True)
class OdeProblem:
    """Initial value problem ``y' = rhs(t, y)``, ``y(t0) = y0`` on ``[t0, t1]``.

    ``y0`` may be an array of any shape; ``rhs`` must return the same shape.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    t0: float
    t1: float
    y0: np.ndarray


# ---------------------------------------------------------------------------
# factorizations


def qr_thin(M: np.ndarray) -> QRFactors:
    """Thin QR factorization with a nonnegative real diagonal in ``R``.

    Rank-deficient input is accepted; ``Q`` still has orthonormal columns and
    the corresponding diagonal entries of ``R`` are (near) zero.
    """
    M = np.asarray(M)
    m, r = M.shape
    if m < r:
        raise ValueError(f"qr_thin needs rows >= cols, got {M.shape}")
    Q, R = np.linalg.qr(M, mode="reduced")
    d = np.diagonal(R)
    mag = np.abs(d)
    phase = np.where(mag > 0, d / np.where(mag > 0, mag, 1), 1)
    Q = Q * phase
    R = np.conj(phase)[:, None] * R
    if np.iscomplexobj(R):
        # diagonal is real up to rounding after the phase fix
        R[np.diag_indices(r)] = np.abs(np.diagonal(R))
    return QRFactors(Q, R)


def svd(M: np.ndarray) -> SvdFactors:
    """Economy SVD, ``M = U @ diag(sigma) @ V^H``."""
    U, s, Vh = np.linalg.svd(np.asarray(M), full_matrices=False)
    return SvdFactors(U, s, Vh.conj().T)


def truncate(M: np.ndarray, r: int) -> SvdFactors:
    """Best rank-``r`` approximation in the Frobenius norm (Eckart-Young)."""
    if r > min(np.shape(M)):
        raise ValueError("truncation rank exceeds matrix dimensions")
    U, s, V = svd(M)
    return SvdFactors(U[:, :r], s[:r], V[:, :r])


def expm(M: np.ndarray) -> np.ndarray:
    """Dense matrix exponential (scaling and squaring, Pade)."""
    return scipy.linalg.expm(np.asarray(M))


# ---------------------------------------------------------------------------
# ODE solvers


def rk4(prob: OdeProblem, nsteps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta with ``nsteps`` equal steps."""
    if nsteps < 1:
        raise ValueError("nsteps must be >= 1")
    f = prob.rhs
    h = (prob.t1 - prob.t0) / nsteps
    y = np.array(prob.y0, copy=True)
    t = prob.t0
    for n in range(nsteps):
        t = prob.t0 + n * h
        k1 = f(t, y)
        k2 = f(t + h / 2, y + (h / 2) * k1)
        k3 = f(t + h / 2, y + (h / 2) * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_B4 = np.array(
    [5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_E = _DP_B5 - _DP_B4


def rk45_adaptive(
    prob: OdeProblem,
    rtol: float = 1e-6,
    atol: float = 1e-9,
    h0: float | None = None,
    max_steps: int = 1_000_000,
) -> np.ndarray:
    """Dormand-Prince 5(4) with standard proportional step-size control.

    The fifth-order solution is propagated (local extrapolation).  The error
    norm is the RMS of ``err / (atol + rtol * max(|y|, |y_new|))``.

    Raises
    ------
    StepSizeUnderflow
        If the step size drops below ``1e-14 * (t1 - t0)``.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    f = prob.rhs
    t0, t1 = float(prob.t0), float(prob.t1)
    span = t1 - t0
    y = np.array(prob.y0, copy=True)
    if span == 0:
        return y
    direction = np.sign(span)
    hmin = 1e-14 * abs(span)

    def err_norm(e, ya, yb):
        scale = atol + rtol * np.maximum(np.abs(ya), np.abs(yb))
        return float(np.sqrt(np.mean(np.abs(e / scale) ** 2)))

    k = f(t0, y)
    if h0 is None:
        # Hairer-Norsett-Wanner starting step
        d0 = err_norm(y, y, y)
        d1 = err_norm(k, y, y)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        y1 = y + direction * h * k
        d2 = err_norm(f(t0 + direction * h, y1) - k, y, y) / h
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        h = min(100 * h, h1, abs(span))
    else:
        h = min(abs(h0), abs(span))

    t = t0
    for _ in range(max_steps):
        if direction * (t1 - t) <= 0:
            return y
        h = min(h, abs(t1 - t))
        if h < hmin:
            raise StepSizeUnderflow(f"step size {h:.3e} underflow at t={t:.6g}")
        hs = direction * h
        ks = [k]
        for i in range(1, 7):
            yi = y + hs * sum(a * kj for a, kj in zip(_DP_A[i], ks) if a != 0)
            ks.append(f(t + _DP_C[i] * hs, yi))
        y_new = y + hs * sum(b * kj for b, kj in zip(_DP_B5, ks) if b != 0)
        err = hs * sum(e * kj for e, kj in zip(_DP_E, ks) if e != 0)
        en = err_norm(err, y, y_new)
        if not np.isfinite(en):
            h *= 0.2
            continue
        if en <= 1.0:
            t = t1 if abs(t1 - (t + hs)) < hmin else t + hs
            y = y_new
            k = ks[6]  # FSAL
            fac = 5.0 if en == 0 else min(5.0, 0.9 * en ** (-1 / 5))
            h *= fac
        else:
            h *= max(0.2, 0.9 * en ** (-1 / 5))
    raise StepSizeUnderflow("maximum number of steps exceeded")


# ---------------------------------------------------------------------------
# FFT


def _check_pow2(K: int) -> None:
    if K < 1 or K & (K - 1):
        raise ValueError(f"FFT length must be a power of two, got {K}")


def fft(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """Unnormalized forward DFT along ``axis``."""
    v = np.asarray(v)
    _check_pow2(v.shape[axis])
    return np.fft.fft(v, axis=axis)


def ifft(v: np.ndarray, axis: int = 0) -> np.ndarray:
    """Inverse DFT (scaled by ``1/K``) along ``axis``."""
    v = np.asarray(v)
    _check_pow2(v.shape[axis])
    return np.fft.ifft(v, axis=axis)


def fft_frequencies(K: int) -> np.ndarray:
    """Integer frequencies in numpy FFT order."""
    _check_pow2(K)
    return np.rint(np.fft.fftfreq(K, 1.0 / K)).astype(int)


# ---------------------------------------------------------------------------
# Krylov exponential


def _arnoldi_expm_once(apply, b, scale, m, tol):
    n = b.size
    beta = np.linalg.norm(b)
    first = np.asarray(apply(b / beta)).ravel()
    dtype = np.result_type(b.dtype, first.dtype, np.float64, complex if np.iscomplexobj(scale) else float)
    V = np.zeros((n, m + 1), dtype=dtype)
    H = np.zeros((m + 1, m), dtype=dtype)
    V[:, 0] = b / beta
    for j in range(m):
        w = (first if j == 0 else np.asarray(apply(V[:, j]))).astype(dtype).ravel()
        wnorm = np.linalg.norm(w)
        # modified Gram-Schmidt, repeated once for stability
        for _ in range(2):
            for i in range(j + 1):
                c = np.vdot(V[:, i], w)
                H[i, j] += c
                w = w - c * V[:, i]
        hnext = np.linalg.norm(w)
        k = j + 1
        E = expm(scale * H[:k, :k])
        approx = beta * (V[:, :k] @ E[:, 0])
        if hnext <= 1e-14 * max(wnorm, 1.0) or k == n:
            return approx, 0.0
        err = beta * abs(scale) * hnext * abs(E[k - 1, 0])
        if err <= tol * beta:
            return approx, err
        H[k, j] = hnext
        V[:, k] = w / hnext
    return approx, err


def arnoldi_apply_expm(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    scale: complex,
    krylov_dim: int = 30,
    tol: float = 1e-12,
    _depth: int = 0,
) -> np.ndarray:
    """Approximate ``expm(scale * A) @ b`` from matrix-vector products ``A v``.

    The Arnoldi iteration stops early once the a-posteriori estimate
    ``|scale| * h_{k+1,k} * |e_k^T expm(scale H_k) e_1| * ||b||`` falls below
    ``tol * ||b||``; a happy breakdown returns the exact subspace result.  If
    ``krylov_dim`` vectors are not enough the interval is halved and the
    routine recurses.

    ``b`` may have any shape; ``apply`` receives and returns flat vectors.
    """
    if krylov_dim < 1:
        raise ValueError("krylov_dim must be >= 1")
    b = np.asarray(b)
    shape = b.shape
    flat = b.ravel()
    if not np.any(flat):
        return b.copy()
    m = min(krylov_dim, flat.size)
    out, err = _arnoldi_expm_once(apply, flat, scale, m, tol)
    if err > tol * np.linalg.norm(flat) and _depth < 30:
        half = arnoldi_apply_expm(apply, flat, scale / 2, krylov_dim, tol / 2, _depth + 1)
        out = arnoldi_apply_expm(apply, half, scale / 2, krylov_dim, tol / 2, _depth + 1)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# seeded random inputs


def rng(seed: int) -> np.random.Generator:
    """The package-wide PRNG: PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def gaussian(shape, seed: int, complex_: bool = False) -> np.ndarray:
    g = rng(seed)
    if complex_:
        return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2)
    return g.standard_normal(shape)


def random_orthonormal(n: int, r: int, seed: int, complex_: bool = False) -> np.ndarray:
    return qr_thin(gaussian((n, r), seed, complex_)).Q


def random_skew(n: int, seed: int) -> np.ndarray:
    """Skew-symmetric matrix ``(G - G^T) / 2`` with standard Gaussian ``G``."""
    G = gaussian((n, n), seed)
    return (G - G.T) / 2


def random_spd_lowrank(n: int, k: int, seed: int) -> np.ndarray:
    """Positive semidefinite ``B B^T`` of rank ``k`` (``B`` Gaussian ``n x k``)."""
    B = gaussian((n, k), seed)
    return B @ B.T


def seeded_random(kind: str, *dims: int, seed: int, **kwargs):
    """Dispatch to the seeded generators by name.

    ``kind`` is one of ``orthonormal`` (n, r), ``skew`` (n), ``spd_lowrank``
    (n, k), ``tucker_symmetric`` (n, r, d) or ``gaussian`` (shape...).
    """
    if kind == "orthonormal":
        return random_orthonormal(*dims, seed=seed, **kwargs)
    if kind == "skew":
        return random_skew(*dims, seed=seed)
    if kind == "spd_lowrank":
        return random_spd_lowrank(*dims, seed=seed)
    if kind == "tucker_symmetric":
        from .tucker import random_symmetric_tucker

        return random_symmetric_tucker(*dims, seed=seed, **kwargs)
    if kind == "gaussian":
        return gaussian(dims, seed, **kwargs)
    raise ValueError(f"unknown random kind {kind!r}")
