"""Rank-r matrices and the matrix low-rank integrators.

* :func:`ksl_step`, :func:`ksl_strang_step` -- projector-splitting integrator
  (K, S, L substeps) in Lie-Trotter and Strang form.
* :func:`sym_step` -- the (skew-)symmetry preserving integrator: a K-substep
  followed by a Galerkin update of ``S`` in the new basis.
* :func:`dlra_factor_rhs` -- the factored DLRA equations with ``S^{-1}``,
  used as the classical baseline.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import substep as _substep
from .numerics import OdeProblem, qr_thin, rk4
from .substep import SubProblem

SYM = "sym"
SKEW = "skew"


class ParityWarning(RuntimeWarning):
    """The core drifted away from its parity by more than round-off."""


class IllConditionedCoreWarning(RuntimeWarning):
    """``S`` is numerically singular in the factored equations."""


def _parity(p: str) -> str:
    if p in ("sym", "symmetric"):
        return SYM
    if p in ("skew", "anti", "antisymmetric", "skew-symmetric"):
        return SKEW
    raise ValueError(f"unknown parity {p!r}")


@dataclass(frozen=True)
class LowRankMatrix:
    """``U @ S @ V^H`` with orthonormal ``U`` (m x r) and ``V`` (n x r)."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        r = self.S.shape[0]
        if self.S.shape != (r, r) or self.U.shape[1] != r or self.V.shape[1] != r:
            raise ValueError("inconsistent factor shapes")

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    def full(self) -> np.ndarray:
        return assemble(self)


@dataclass(frozen=True)
class SymLowRankMatrix:
    """``U @ S @ U^T`` with ``S`` symmetric or skew-symmetric.

    Skew parity requires an even rank, since real skew-symmetric matrices have
    even rank.
    """

    U: np.ndarray
    S: np.ndarray
    parity: str = SYM

    def __post_init__(self):
        object.__setattr__(self, "parity", _parity(self.parity))
        r = self.U.shape[1]
        if self.S.shape != (r, r):
            raise ValueError("S must be r x r")
        if self.parity == SKEW and r % 2:
            raise ValueError("skew-symmetric low-rank matrices need an even rank")
        sign = 1 if self.parity == SYM else -1
        if np.linalg.norm(self.S - sign * self.S.T) > 1e-12 * max(np.linalg.norm(self.S), 1e-300):
            raise ValueError(f"S is not {self.parity}")

    @property
    def rank(self) -> int:
        return self.S.shape[0]

    def full(self) -> np.ndarray:
        return assemble(self)


@dataclass
class MatrixRhs:
    """Right-hand side ``F(t, Y)`` of a matrix ODE.

    ``is_linear`` declares ``F`` affine in ``Y`` and independent of ``t``
    (``F(Y) = L(Y) + C``); substeps may then be solved exactly.  ``increment``,
    when given, returns ``int_{t0}^{t1} F dt`` for an ``F`` that does not depend
    on ``Y`` (an explicitly given ``A(t)`` with ``F = dA/dt``).
    """

    eval: Callable[[float, np.ndarray], np.ndarray]
    is_linear: bool = False
    preserves_parity: bool = False
    increment: Callable[[float, float], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, t: float, Y: np.ndarray) -> np.ndarray:
        return self.eval(t, Y)


def assemble(Y: LowRankMatrix | SymLowRankMatrix) -> np.ndarray:
    """Dense product ``U S V^H`` (or ``U S U^T``)."""
    if isinstance(Y, SymLowRankMatrix):
        return Y.U @ Y.S @ Y.U.T
    return Y.U @ Y.S @ Y.V.conj().T


def tangent_project(Y: LowRankMatrix, Z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``Z`` onto the tangent space at ``Y``.

    ``P(Y) Z = Z V V^H - U U^H Z V V^H + U U^H Z``.
    """
    U, V = Y.U, Y.V
    ZV = Z @ V
    UhZ = U.conj().T @ Z
    return ZV @ V.conj().T - U @ (UhZ @ V) @ V.conj().T + U @ UhZ


# ---------------------------------------------------------------------------
# projector splitting


def _ksubproblem(F: MatrixRhs, K0, V, t0, t1) -> SubProblem:
    Vh = V.conj().T
    inc = None if F.increment is None else F.increment(t0, t1) @ V
    return SubProblem(lambda t, K: F(t, K @ Vh) @ V, K0, t0, t1, affine=F.is_linear, increment=inc)


def _ssubproblem(F: MatrixRhs, S0, U, V, t0, t1, sign=-1.0) -> SubProblem:
    Uh, Vh = U.conj().T, V.conj().T
    inc = None if F.increment is None else sign * (Uh @ F.increment(t0, t1) @ V)
    return SubProblem(
        lambda t, S: sign * (Uh @ F(t, U @ S @ Vh) @ V), S0, t0, t1, affine=F.is_linear, increment=inc
    )


def _lsubproblem(F: MatrixRhs, L0, U, t0, t1) -> SubProblem:
    Uh = U.conj().T
    inc = None if F.increment is None else F.increment(t0, t1).conj().T @ U
    return SubProblem(
        lambda t, L: F(t, U @ L.conj().T).conj().T @ U, L0, t0, t1, affine=F.is_linear, increment=inc
    )


def _kstep(F, U0, S0, V0, t0, t1, solve):
    K1 = solve(_ksubproblem(F, U0 @ S0, V0, t0, t1))
    return qr_thin(K1)


def _sstep(F, S, U, V, t0, t1, solve):
    return solve(_ssubproblem(F, S, U, V, t0, t1))


def _lstep(F, U, S, V0, t0, t1, solve):
    L1 = solve(_lsubproblem(F, V0 @ S.conj().T, U, t0, t1))
    V1, Sh = qr_thin(L1)
    return V1, Sh.conj().T


def ksl_step(Y0: LowRankMatrix, F: MatrixRhs, t0: float, t1: float, substep_solver=None) -> LowRankMatrix:
    """One Lie-Trotter step of the projector-splitting integrator."""
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    solve = _substep.resolve(substep_solver)
    U1, S_hat = _kstep(F, Y0.U, Y0.S, Y0.V, t0, t1, solve)
    S_tilde = _sstep(F, S_hat, U1, Y0.V, t0, t1, solve)
    V1, S1 = _lstep(F, U1, S_tilde, Y0.V, t0, t1, solve)
    return LowRankMatrix(U1, S1, V1)


def ksl_strang_step(Y0: LowRankMatrix, F: MatrixRhs, t0: float, t1: float, substep_solver=None) -> LowRankMatrix:
    """Strang step: K, S, L over the first half, then L, S, K over the second."""
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    solve = _substep.resolve(substep_solver)
    tm = t0 + (t1 - t0) / 2
    U, S, V = Y0.U, Y0.S, Y0.V
    U, S = _kstep(F, U, S, V, t0, tm, solve)
    S = _sstep(F, S, U, V, t0, tm, solve)
    V, S = _lstep(F, U, S, V, t0, tm, solve)
    # reversed sweep
    V, S = _lstep(F, U, S, V, tm, t1, solve)
    S = _sstep(F, S, U, V, tm, t1, solve)
    U, S = _kstep(F, U, S, V, tm, t1, solve)
    return LowRankMatrix(U, S, V)


# ---------------------------------------------------------------------------
# (skew-)symmetry preserving integrator


def scrub(S: np.ndarray, parity: str) -> np.ndarray:
    """Exact (skew-)symmetric part of ``S``."""
    return (S + S.T) / 2 if _parity(parity) == SYM else (S - S.T) / 2


def sym_step(
    Y0: SymLowRankMatrix,
    F: MatrixRhs,
    t0: float,
    t1: float,
    substep_solver=None,
    *,
    scrub_core: bool = True,
    info: dict | None = None,
) -> SymLowRankMatrix:
    """One step of the (skew-)symmetry preserving integrator.

    K-substep ``K' = F(t, K U0^T) U0`` from ``U0 S0``; QR of ``K(t1)`` gives
    ``U1`` (the triangular factor is dropped).  S-substep
    ``S' = U1^T F(t, U1 S U1^T) U1`` from ``(U1^T U0) S0 (U1^T U0)^T``.

    If ``info`` is a dict it receives ``parity_defect``, the relative
    violation of the parity of ``S1`` before scrubbing, and ``R`` from the QR.
    """
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    solve = _substep.resolve(substep_solver)
    U0, S0 = Y0.U, Y0.S
    U1, R = _kstep(F, U0, S0, U0, t0, t1, solve)
    M = U1.T @ U0
    S1 = solve(_ssubproblem(F, M @ S0 @ M.T, U1, U1, t0, t1, sign=1.0))
    sign = 1 if Y0.parity == SYM else -1
    nrm = np.linalg.norm(S1)
    defect = np.linalg.norm(S1 - sign * S1.T) / nrm if nrm > 0 else 0.0
    if defect > 1e-6:
        warnings.warn(f"S1 parity defect {defect:.2e}: F does not seem to preserve parity", ParityWarning)
    if info is not None:
        info["parity_defect"] = defect
        info["R"] = R
    if scrub_core:
        S1 = scrub(S1, Y0.parity)
        return SymLowRankMatrix(U1, S1, Y0.parity)
    # unscrubbed output cannot pass the constructor's parity check in general
    out = object.__new__(SymLowRankMatrix)
    object.__setattr__(out, "U", U1)
    object.__setattr__(out, "S", S1)
    object.__setattr__(out, "parity", Y0.parity)
    return out


def integrate(step, Y0, F, t0: float, T: float, h: float, substep_solver=None, **kwargs):
    """Run ``step`` with constant step size ``h`` from ``t0`` to ``T``."""
    n = int(round((T - t0) / h))
    if n < 1 or abs(t0 + n * h - T) > 1e-12 * max(1.0, abs(T)):
        raise ValueError(f"step size {h} does not divide [{t0}, {T}]")
    Y = Y0
    for k in range(n):
        Y = step(Y, F, t0 + k * h, t0 + (k + 1) * h, substep_solver, **kwargs)
    return Y


# ---------------------------------------------------------------------------
# truncation


def truncate_to_sym_lowrank(A: np.ndarray, r: int, parity: str = SYM) -> SymLowRankMatrix:
    """Best rank-``r`` approximation with equal left and right factors.

    Symmetric input: the ``r`` eigenpairs of largest modulus.  Skew input:
    the leading ``r`` left singular vectors (singular values come in pairs,
    so ``r`` must be even).
    """
    parity = _parity(parity)
    A = np.asarray(A)
    sign = 1 if parity == SYM else -1
    if np.linalg.norm(A - sign * A.T) > 1e-10 * max(np.linalg.norm(A), 1e-300):
        raise ValueError(f"input matrix is not {parity}")
    if parity == SYM:
        w, Q = np.linalg.eigh((A + A.T) / 2)
        idx = np.argsort(-np.abs(w), kind="stable")[:r]
        U = Q[:, idx]
    else:
        if r % 2:
            raise ValueError("skew truncation needs an even rank")
        U = np.linalg.svd(A)[0][:, :r]
    return SymLowRankMatrix(U, scrub(U.T @ A @ U, parity), parity)


# ---------------------------------------------------------------------------
# factored equations (baseline)


def dlra_factor_rhs(Y: LowRankMatrix, F: MatrixRhs, t: float, cond_limit: float = 1e14):
    """Derivatives ``(U', S', V')`` of the factored DLRA system.

    ``S' = U^H F V``, ``U' = (I - U U^H) F V S^{-1}``,
    ``V' = (I - V V^H) F^H U S^{-H}``.  Warns when ``cond(S) > cond_limit``.
    """
    U, S, V = Y.U, Y.S, Y.V
    FY = F(t, assemble(Y))
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > cond_limit:
        warnings.warn(f"cond(S) = {cond:.2e} in factored DLRA equations", IllConditionedCoreWarning)
    FV = FY @ V
    FhU = FY.conj().T @ U
    Sdot = U.conj().T @ FV
    Udot = np.linalg.solve(S.T, (FV - U @ (U.conj().T @ FV)).T).T
    Vdot = np.linalg.solve(S.conj(), (FhU - V @ (V.conj().T @ FhU)).T).T
    return Udot, Sdot, Vdot


def factored_rk4(
    Y0: LowRankMatrix,
    F: MatrixRhs,
    t0: float,
    T: float,
    h: float,
    blowup: float = 1e8,
) -> tuple[LowRankMatrix | None, bool]:
    """Classical RK4 on the factored system with step ``h``.

    Returns ``(Y, diverged)``; ``diverged`` is set (and ``Y`` is ``None``)
    once the iterate stops being finite or ``||S||`` exceeds ``blowup``.
    """
    m, r = Y0.U.shape
    n = Y0.V.shape[0]
    sizes = (m * r, r * r, n * r)

    def unpack(y):
        a, b = sizes[0], sizes[0] + sizes[1]
        return LowRankMatrix(y[:a].reshape(m, r), y[a:b].reshape(r, r), y[b:].reshape(n, r))

    def rhs(t, y):
        with np.errstate(all="ignore"):
            return np.concatenate([x.ravel() for x in dlra_factor_rhs(unpack(y), F, t)])

    y = np.concatenate([Y0.U.ravel(), Y0.S.ravel(), Y0.V.ravel()])
    nsteps = int(round((T - t0) / h))
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", IllConditionedCoreWarning)
        for k in range(nsteps):
            try:
                y = rk4(OdeProblem(rhs, t0 + k * h, t0 + (k + 1) * h, y), 1)
            except np.linalg.LinAlgError:
                return None, True
            if not np.all(np.isfinite(y)) or np.linalg.norm(unpack(y).S) > blowup:
                return None, True
    return unpack(y), False
