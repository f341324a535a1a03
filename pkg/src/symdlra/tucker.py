"""Dense tensors, matricization, mode products and Tucker tensors.

Dense tensors are plain ``numpy.ndarray`` objects.  Linearization is
mode-1-fastest (Fortran order): ``vec(Y)`` is ``Y.ravel(order="F")``, and
``matricize(Y, i)`` places mode ``i`` on the rows while the remaining modes
run over the columns in increasing order with the lowest mode fastest.  With
this convention

    matricize(C x_1 U_1 ... x_d U_d, i)
        = U_i @ matricize(C, i) @ kron(U_d, ..., U_{i+1}, U_{i-1}, ..., U_1).T

Modes are numbered from 0 in code.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np

from .numerics import gaussian, random_orthonormal, svd

SYM = "sym"
ANTI = "anti"


def _check_parity(parity: str) -> str:
    if parity in ("sym", "symmetric"):
        return SYM
    if parity in ("anti", "antisymmetric", "skew"):
        return ANTI
    raise ValueError(f"unknown parity {parity!r}")


# ---------------------------------------------------------------------------
# matricization and mode products


def matricize(Y: np.ndarray, i: int) -> np.ndarray:
    """``Mat_i(Y)``: rows indexed by mode ``i``."""
    Y = np.asarray(Y)
    if not 0 <= i < Y.ndim:
        raise ValueError(f"mode {i} out of range for a {Y.ndim}-way tensor")
    return np.moveaxis(Y, i, 0).reshape(Y.shape[i], -1, order="F")


def tensorize(M: np.ndarray, i: int, dims: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize`: ``tensorize(matricize(Y, i), i, Y.shape) == Y``."""
    dims = tuple(int(n) for n in dims)
    M = np.asarray(M)
    rest = dims[:i] + dims[i + 1 :]
    if M.shape != (dims[i], int(np.prod(rest, dtype=int))):
        raise ValueError(f"matrix of shape {M.shape} does not match dims {dims} in mode {i}")
    T = M.reshape((dims[i],) + rest, order="F")
    return np.moveaxis(T, 0, i)


def mode_product(Y: np.ndarray, i: int, M: np.ndarray) -> np.ndarray:
    """``Y x_i M``: contracts mode ``i`` of ``Y`` with the columns of ``M``."""
    Y = np.asarray(Y)
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[1] != Y.shape[i]:
        raise ValueError(f"mode-{i} product: matrix {M.shape} vs tensor {Y.shape}")
    return np.moveaxis(np.tensordot(M, Y, axes=(1, i)), 0, i)


def multi_mode_product(Y: np.ndarray, mats: dict[int, np.ndarray] | Sequence[np.ndarray]) -> np.ndarray:
    """Apply several mode products; ``mats`` maps mode -> matrix (or is a list per mode)."""
    items = mats.items() if isinstance(mats, dict) else enumerate(mats)
    for i, M in items:
        if M is not None:
            Y = mode_product(Y, i, M)
    return Y


def inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Frobenius inner product ``<A, B> = vec(A)^H vec(B)``."""
    return np.vdot(A, B)


# ---------------------------------------------------------------------------
# Tucker tensors


@dataclass(frozen=True)
class TuckerTensor:
    """``core x_1 factors[0] ... x_d factors[d-1]`` with orthonormal factors.

    When ``shared_factor`` is true every mode uses the same basis matrix.
    """

    core: np.ndarray
    factors: tuple[np.ndarray, ...]
    shared_factor: bool = False

    def __post_init__(self):
        if len(self.factors) != self.core.ndim:
            raise ValueError("need one factor per core mode")
        for i, U in enumerate(self.factors):
            if U.shape[1] != self.core.shape[i]:
                raise ValueError(f"factor {i} has {U.shape[1]} columns, core has {self.core.shape[i]}")
        if self.shared_factor and any(U is not self.factors[0] for U in self.factors):
            if any(not np.array_equal(U, self.factors[0]) for U in self.factors):
                raise ValueError("shared_factor requires identical factors")

    @classmethod
    def symmetric(cls, core: np.ndarray, U: np.ndarray) -> "TuckerTensor":
        """Shared-factor Tucker tensor ``core x_i U`` for all modes."""
        return cls(np.asarray(core), (np.asarray(U),) * np.ndim(core), shared_factor=True)

    @property
    def U(self) -> np.ndarray:
        return self.factors[0]

    @property
    def order(self) -> int:
        return self.core.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.shape

    def full(self) -> np.ndarray:
        return assemble(self)

    def norm(self) -> float:
        # valid for orthonormal factors
        return float(np.linalg.norm(self.core))


def assemble(T: TuckerTensor) -> np.ndarray:
    """Dense tensor ``C x_1 U_1 ... x_d U_d``."""
    return multi_mode_product(T.core, list(T.factors))


# ---------------------------------------------------------------------------
# (anti-)symmetry


def permutation_sign(perm: Sequence[int]) -> int:
    """Sign (+1/-1) of a permutation given as a sequence of images."""
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        j, length = start, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@lru_cache(maxsize=None)
def _permutations(d: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    return tuple((p, permutation_sign(p)) for p in itertools.permutations(range(d)))


@lru_cache(maxsize=None)
def _canonical_map(n: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For every multi-index: flat (C-order) index of its sorted version and the sort sign.

    The sign is 0 for multi-indices with repeated entries (these vanish in an
    anti-symmetric tensor).
    """
    idx = np.indices((n,) * d).reshape(d, -1).T
    order = np.argsort(idx, axis=1, kind="stable")
    srt = np.take_along_axis(idx, order, axis=1)
    canon = np.ravel_multi_index(srt.T, (n,) * d)
    signs = np.array([permutation_sign(p) for p in order])
    repeated = np.any(np.diff(srt, axis=1) == 0, axis=1)
    return canon, signs, repeated


def symmetrize(Y: np.ndarray, parity: str = SYM) -> np.ndarray:
    """Orthogonal projection onto (anti-)symmetric tensors.

    Computes ``(1/d!) sum_sigma (+-1)^sign(sigma) permute(Y, sigma)`` and then
    fills every entry from its sorted multi-index, so the result has the
    requested parity exactly (bit for bit) and an input that already has it is
    returned unchanged.
    """
    parity = _check_parity(parity)
    Y = np.asarray(Y)
    d = Y.ndim
    n = Y.shape[0] if d else 1
    if any(m != n for m in Y.shape):
        raise ValueError(f"symmetrize needs equal dimensions, got {Y.shape}")
    if d <= 1:
        return Y.copy()
    diff = np.zeros_like(Y)
    for perm, sign in _permutations(d)[1:]:
        s = sign if parity == ANTI else 1
        diff = diff + (s * np.transpose(Y, perm) - Y)
    avg = Y + diff / factorial(d)
    canon, signs, repeated = _canonical_map(n, d)
    flat = avg.ravel()[canon]
    if parity == ANTI:
        flat = np.where(repeated, 0, signs * flat)
    return flat.reshape(Y.shape).astype(Y.dtype, copy=False)


def parity_defect(Y: np.ndarray, parity: str = SYM) -> float:
    """``||Y - symmetrize(Y, parity)||_F``."""
    return float(np.linalg.norm(Y - symmetrize(Y, parity)))


# ---------------------------------------------------------------------------
# truncation


def hosvd_truncate(A: np.ndarray, ranks: Sequence[int]) -> TuckerTensor:
    """Truncated higher-order SVD."""
    A = np.asarray(A)
    ranks = tuple(ranks)
    if len(ranks) != A.ndim:
        raise ValueError("need one rank per mode")
    factors = tuple(svd(matricize(A, i)).U[:, :r] for i, r in enumerate(ranks))
    core = multi_mode_product(A, [U.conj().T for U in factors])
    return TuckerTensor(core, factors)


def hooi(A: np.ndarray, ranks: Sequence[int], sweeps: int = 20) -> TuckerTensor:
    """Higher-order orthogonal iteration started from the truncated HOSVD."""
    T = hosvd_truncate(A, ranks)
    factors = list(T.factors)
    d = A.ndim
    for _ in range(sweeps):
        for i in range(d):
            proj = {j: factors[j].conj().T for j in range(d) if j != i}
            Z = multi_mode_product(A, proj)
            factors[i] = svd(matricize(Z, i)).U[:, : ranks[i]]
    core = multi_mode_product(A, [U.conj().T for U in factors])
    return TuckerTensor(core, tuple(factors))


def sym_hosvd_truncate(A: np.ndarray, r: int, parity: str = SYM, sweeps: int = 2) -> TuckerTensor:
    """Shared-factor truncation of an (anti-)symmetric tensor.

    The basis is the leading ``r`` left singular vectors of ``Mat_1(A)``,
    refined by ``sweeps`` symmetric HOOI sweeps ``U <- lsv(Mat_1(A x_{i>1} U^H))``.
    The core is scrubbed to the exact parity.
    """
    parity = _check_parity(parity)
    A = np.asarray(A)
    nrm = np.linalg.norm(A)
    if parity_defect(A, parity) > 1e-8 * max(nrm, np.finfo(float).tiny):
        raise ValueError(f"input is not {parity}-symmetric")
    d = A.ndim
    U = svd(matricize(A, 0)).U[:, :r]
    for _ in range(sweeps):
        Z = multi_mode_product(A, {j: U.conj().T for j in range(1, d)})
        U = svd(matricize(Z, 0)).U[:, :r]
    core = multi_mode_product(A, [U.conj().T] * d)
    return TuckerTensor.symmetric(symmetrize(core, parity), U)


# ---------------------------------------------------------------------------
# random instances


def random_symmetric_tucker(
    n: int,
    r: int,
    d: int,
    seed: int,
    parity: str = SYM,
    complex_: bool = False,
) -> TuckerTensor:
    """Shared-factor Tucker tensor with Gaussian (anti-)symmetrized core, unit core norm."""
    parity = _check_parity(parity)
    U = random_orthonormal(n, r, seed, complex_)
    core = symmetrize(gaussian((r,) * d, seed + 1_000_003, complex_), parity)
    core = core / np.linalg.norm(core)
    return TuckerTensor.symmetric(core, U)


def random_tangent(T: TuckerTensor, seed: int, parity: str = SYM) -> np.ndarray:
    """Random dense tangent vector at a shared-factor Tucker tensor, unit norm.

    ``dY = dC x_i U + sum_i C x_i dU x_{j != i} U`` with ``dC`` of the given
    parity and ``U^H dU = 0``; such a direction keeps the parity.
    """
    parity = _check_parity(parity)
    U, C = T.U, T.core
    d = C.ndim
    n, r = U.shape
    cplx = np.iscomplexobj(C) or np.iscomplexobj(U)
    dC = symmetrize(gaussian(C.shape, seed, cplx), parity)
    G = gaussian((n, r), seed + 1, cplx)
    dU = G - U @ (U.conj().T @ G)
    dY = multi_mode_product(dC, [U] * d)
    for i in range(d):
        mats = [U] * d
        mats[i] = dU
        dY = dY + multi_mode_product(C, mats)
    return dY / np.linalg.norm(dY)
