"""(Anti-)symmetry preserving integrator for shared-factor Tucker tensors.

One step updates the basis with a K-substep on ``Mat_1`` and then evolves the
core by Galerkin projection onto the new basis.  For right-hand sides given
as a :class:`MultilinearOperator` the K- and C-substeps are assembled from
``r x r`` contractions and never form the ``n^(d-1) x r`` matrix ``V_0``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import substep as _substep
from .matrix import IllConditionedCoreWarning, ParityWarning
from .numerics import arnoldi_apply_expm, qr_thin
from .substep import SubProblem
from .tucker import (
    TuckerTensor,
    matricize,
    multi_mode_product,
    symmetrize,
    tensorize,
)


@dataclass
class MultilinearOperator:
    """``Y -> shift * Y + sum_k coeff_k * Y x_{l in term_k} M_l``.

    ``terms`` is a list of ``(coeff, {mode: matrix})`` pairs; modes missing from
    a term act as the identity.
    """

    terms: list[tuple[complex, dict[int, np.ndarray]]] = field(default_factory=list)
    shift: complex = 0.0

    def apply(self, Y: np.ndarray) -> np.ndarray:
        out = self.shift * Y
        for coeff, mats in self.terms:
            out = out + coeff * multi_mode_product(Y, mats)
        return out

    __call__ = apply

    def scaled(self, alpha: complex) -> "MultilinearOperator":
        return MultilinearOperator([(alpha * c, m) for c, m in self.terms], alpha * self.shift)

    def __add__(self, other: "MultilinearOperator") -> "MultilinearOperator":
        return MultilinearOperator(self.terms + other.terms, self.shift + other.shift)

    def galerkin(self, U: np.ndarray, W: np.ndarray | None = None) -> "MultilinearOperator":
        """Operator on cores with every matrix replaced by ``W^H M U`` (``W = U`` by default)."""
        W = U if W is None else W
        Wh = W.conj().T
        terms = [(c, {l: Wh @ (M @ U) for l, M in mats.items()}) for c, mats in self.terms]
        return MultilinearOperator(terms, self.shift)


@dataclass
class TensorRhs:
    """Right-hand side ``F(t, Y)`` of a tensor ODE.

    Give ``structured`` (``t -> MultilinearOperator``, a linear ``F``) for the
    fast path, ``black_box`` (``(t, Y) -> dense``) otherwise.  ``increment``
    plays the same role as in :class:`symdlra.matrix.MatrixRhs`.
    ``autonomous`` tells the integrator that ``structured`` does not depend
    on ``t`` within a step, so substeps can use the Krylov exponential.
    """

    black_box: Callable[[float, np.ndarray], np.ndarray] | None = None
    structured: Callable[[float], MultilinearOperator] | None = None
    preserves_parity: bool = False
    increment: Callable[[float, float], np.ndarray] | None = field(default=None, repr=False)
    autonomous: bool = True

    def __post_init__(self):
        if self.black_box is None and self.structured is None and self.increment is None:
            raise ValueError("TensorRhs needs black_box, structured or increment")

    def __call__(self, t: float, Y: np.ndarray) -> np.ndarray:
        if self.black_box is not None:
            return self.black_box(t, Y)
        if self.structured is not None:
            return self.structured(t).apply(Y)
        raise ValueError("increment-only right-hand side cannot be evaluated pointwise")


@dataclass
class KStepState:
    """Implicit ``V_0^T = Q_0^T kron(U_0^T, ..., U_0^T)`` and the current ``K``."""

    K: np.ndarray
    Q0: np.ndarray
    U0: np.ndarray
    order: int

    @property
    def G(self) -> np.ndarray:
        """``Ten_1(Q_0^T)``: the core of ``Ten_1(K V_0^T)``."""
        r = self.U0.shape[1]
        return tensorize(self.Q0.T, 0, (r,) * self.order)

    def dense_V0(self) -> np.ndarray:
        """``V_0`` as an explicit ``n^(d-1) x r`` matrix (small sizes only)."""
        kron = np.ones((1, 1))
        for _ in range(1, self.order):
            kron = np.kron(self.U0, kron)
        return kron @ self.Q0

    def tensor(self, K: np.ndarray | None = None) -> np.ndarray:
        """Dense ``Ten_1(K V_0^T)``."""
        K = self.K if K is None else K
        return multi_mode_product(self.G, [K] + [self.U0] * (self.order - 1))


def prepare_kstep(Y0: TuckerTensor) -> tuple[KStepState, np.ndarray]:
    """QR ``Mat_1(C_0)^T = Q_0 S_0^T``; returns the state with ``K = U_0 S_0`` and ``S_0``."""
    if not Y0.shared_factor:
        raise ValueError("prepare_kstep needs a shared-factor Tucker tensor")
    Q0, R = qr_thin(matricize(Y0.core, 0).T)
    S0 = R.T
    # nothing downstream inverts S_0, so a rank-deficient Mat_1(C_0) is only reported
    # (anti-symmetric cores with r = d + 1 are always rank deficient)
    sv = np.linalg.svd(R, compute_uv=False)
    if sv.size and sv.min() < 1e-12 * sv.max():
        warnings.warn("Mat_1(C_0) is numerically rank deficient", IllConditionedCoreWarning, stacklevel=2)
    return KStepState(Y0.U @ S0, Q0, Y0.U, Y0.order), S0


def _kstep_factors(state: KStepState, op: MultilinearOperator):
    """``K' = shift K + sum_k c_k M1_k K R_k`` with ``R_k = Mat_1(G x_{i>1} U0^H M_i U0) conj(Q0)``."""
    U0, G, Qc = state.U0, state.G, state.Q0.conj()
    U0h = U0.conj().T
    factors = []
    for coeff, mats in op.terms:
        small = {i: U0h @ (M @ U0) for i, M in mats.items() if i != 0}
        R = matricize(multi_mode_product(G, small), 0) @ Qc
        factors.append((coeff, mats.get(0), R))
    return factors


def _apply_kfactors(K, factors, shift):
    out = shift * K
    for coeff, M1, R in factors:
        MK = K if M1 is None else M1 @ K
        out = out + coeff * (MK @ R)
    return out


def kstep_rhs(state: KStepState, F: TensorRhs, t: float, structured: bool = True) -> np.ndarray:
    """``Mat_1(F(t, Ten_1(K V_0^T))) conj(V_0)``.

    The structured path contracts the operator terms against the ``r``-sized
    core ``G = Ten_1(Q_0^T)``; the black-box path builds the dense tensor.
    """
    if structured and F.structured is not None:
        op = F.structured(t)
        return _apply_kfactors(state.K, _kstep_factors(state, op), op.shift)
    Z = F(t, state.tensor())
    # Mat_1(Z) conj(V0) = Mat_1(Z x_{i>1} U0^H) conj(Q0)
    small = multi_mode_product(Z, {i: state.U0.conj().T for i in range(1, state.order)})
    return matricize(small, 0) @ state.Q0.conj()


def cstep_rhs(C: np.ndarray, U1: np.ndarray, F: TensorRhs, t: float, structured: bool = True) -> np.ndarray:
    """``F(t, C x_i U1) x_i U1^H``."""
    if structured and F.structured is not None:
        return F.structured(t).galerkin(U1).apply(C)
    d = C.ndim
    Z = F(t, multi_mode_product(C, [U1] * d))
    return multi_mode_product(Z, [U1.conj().T] * d)


def linear_substep_solver(op, y0: np.ndarray, h: complex, krylov_dim: int = 30, tol: float = 1e-12) -> np.ndarray:
    """``expm(h * op) y0`` by the Arnoldi process; ``op`` maps arrays shaped like ``y0``."""
    y0 = np.asarray(y0)
    shape = y0.shape
    if isinstance(op, MultilinearOperator):
        fn = op.apply
    else:
        fn = op
    dtype = np.result_type(y0, complex if np.iscomplexobj(h) else float)
    return arnoldi_apply_expm(lambda v: np.asarray(fn(v.reshape(shape))).ravel(), y0.astype(dtype), h, krylov_dim, tol)


def sym_tucker_step(
    Y0: TuckerTensor,
    F: TensorRhs,
    t0: float,
    t1: float,
    substep_solver=None,
    parity: str = "sym",
    *,
    scrub_core: bool = True,
    krylov_dim: int = 30,
    tol: float = 1e-12,
    info: dict | None = None,
) -> TuckerTensor:
    """One step of the (anti-)symmetry preserving Tucker integrator.

    Substeps use, in this order of preference: the exact increment, the
    Krylov exponential of the structured operator (``substep_solver`` of
    ``None``/"auto"/"krylov" and an autonomous operator), or
    ``substep_solver`` applied to the dense black-box right-hand sides.

    ``info`` (if a dict) receives ``parity_defect`` -- the relative parity
    violation of the new core before scrubbing -- and ``R``.
    """
    if t1 == t0:
        raise ValueError("need t1 != t0")
    if not Y0.shared_factor:
        raise ValueError("sym_tucker_step needs a shared-factor Tucker tensor")
    h = t1 - t0
    d = Y0.order
    U0, C0 = Y0.U, Y0.core
    state, S0 = prepare_kstep(Y0)
    use_krylov = (
        F.increment is None
        and F.structured is not None
        and F.autonomous
        and (substep_solver is None or substep_solver in ("auto", "krylov"))
    )

    # K-substep
    if F.increment is not None:
        inc = F.increment(t0, t1)
        small = multi_mode_product(inc, {i: U0.conj().T for i in range(1, d)})
        K1 = state.K + matricize(small, 0) @ state.Q0.conj()
    elif use_krylov:
        op = F.structured(t0)
        factors = _kstep_factors(state, op)
        K1 = linear_substep_solver(lambda K: _apply_kfactors(K, factors, op.shift), state.K, h, krylov_dim, tol)
    else:
        solve = _substep.resolve(substep_solver)

        def krhs(t, K):
            return kstep_rhs(KStepState(K, state.Q0, U0, d), F, t)

        K1 = solve(SubProblem(krhs, state.K, t0, t1))
    U1, R = qr_thin(K1)

    # C-substep
    M = U1.conj().T @ U0
    Cinit = multi_mode_product(C0, [M] * d)
    if F.increment is not None:
        C1 = Cinit + multi_mode_product(F.increment(t0, t1), [U1.conj().T] * d)
    elif use_krylov:
        C1 = linear_substep_solver(F.structured(t0).galerkin(U1), Cinit, h, krylov_dim, tol)
    else:
        solve = _substep.resolve(substep_solver)
        C1 = solve(SubProblem(lambda t, C: cstep_rhs(C, U1, F, t), Cinit, t0, t1))

    nrm = np.linalg.norm(C1)
    defect = np.linalg.norm(C1 - symmetrize(C1, parity)) / nrm if nrm > 0 else 0.0
    if defect > 1e-6:
        warnings.warn(f"core parity defect {defect:.2e} before scrubbing", ParityWarning)
    if info is not None:
        info["parity_defect"] = defect
        info["R"] = R
    if scrub_core:
        C1 = symmetrize(C1, parity)
    return TuckerTensor.symmetric(C1, U1)


def dense_kstep_reference(Y0: TuckerTensor, F: TensorRhs, t: float, K: np.ndarray) -> np.ndarray:
    """Literal ``Mat_1(F(t, Ten_1(K V_0^T))) conj(V_0)`` with an explicit ``V_0`` (test oracle)."""
    state, _ = prepare_kstep(Y0)
    V0 = state.dense_V0()
    n = Y0.U.shape[0]
    Y = tensorize(K @ V0.T, 0, (n,) * Y0.order)
    return matricize(F(t, Y), 0) @ V0.conj()
