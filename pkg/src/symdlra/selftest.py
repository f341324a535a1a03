"""Dense-oracle checks of the structured contractions.

Every multilinear operator is also assembled as an explicit ``K^d x K^d``
Kronecker matrix acting on Fortran-ordered vectorizations, which gives an
oracle independent of the mode-product code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quantum
from .symtucker import MultilinearOperator, TensorRhs, cstep_rhs, dense_kstep_reference, kstep_rhs, prepare_kstep
from .tucker import assemble, random_symmetric_tucker

CASES = ((2, 16, 4), (3, 8, 3))
TOLERANCE = 1e-9


def dense_matrix(op: MultilinearOperator, n: int, d: int) -> np.ndarray:
    """Explicit matrix of ``op`` on ``vec_F(Y)`` (mode 1 varies fastest)."""
    N = n**d
    out = op.shift * np.eye(N, dtype=complex)
    I = np.eye(n)
    for coeff, mats in op.terms:
        kron = np.ones((1, 1))
        for mode in range(d):
            kron = np.kron(mats.get(mode, I), kron)
        out = out + coeff * kron
    return out


def dense_apply(A: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return (A @ Y.ravel(order="F")).reshape(Y.shape, order="F")


@dataclass
class CheckResult:
    name: str
    d: int
    K: int
    r: int
    rel_error: float

    @property
    def passed(self) -> bool:
        return self.rel_error <= TOLERANCE


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / (nb if nb > 0 else 1.0))


def oracle_checks(seed: int = 1, parity: str = "anti") -> list[CheckResult]:
    """Structured versus dense results for K-step, C-step, energy and ``W``."""
    results = []
    for d, K, r in CASES:
        grid = quantum.GridOperators(K)
        psi = quantum.initial_wave(grid, d, r, parity, seed)
        Y = psi.Y
        H = quantum.build_hamiltonian(d, grid)
        W = quantum.build_interaction_operator(d, grid)
        Hd = dense_matrix(H, K, d)
        Wd = dense_matrix(W, K, d)
        F_struct = TensorRhs(structured=lambda _t: H)
        F_dense = TensorRhs(black_box=lambda _t, X: dense_apply(Hd, X))

        state, _ = prepare_kstep(Y)
        Kmat = state.K + 0.1 * np.random.default_rng(seed).standard_normal(state.K.shape)
        state.K = Kmat
        ks = kstep_rhs(state, F_struct, 0.0)
        kd = dense_kstep_reference(Y, F_dense, 0.0, Kmat)
        results.append(CheckResult("kstep_rhs", d, K, r, _rel(ks, kd)))

        cs = cstep_rhs(Y.core, Y.U, F_struct, 0.0)
        Uh = Y.U.conj().T
        full = dense_apply(Hd, assemble(Y))
        cd = full
        for mode in range(d):
            cd = np.moveaxis(np.tensordot(Uh, cd, axes=(1, mode)), 0, mode)
        results.append(CheckResult("cstep_rhs", d, K, r, _rel(cs, cd)))

        Es = quantum.energy(psi, grid)
        yv = assemble(Y).ravel(order="F")
        Ed = float((grid.cell**d * np.vdot(yv, Hd @ yv)).real)
        results.append(CheckResult("energy", d, K, r, abs(Es - Ed) / abs(Ed)))

        Yfull = assemble(random_symmetric_tucker(K, r, d, seed + 11, parity))
        results.append(CheckResult("interaction_apply", d, K, r, _rel(W.apply(Yfull), dense_apply(Wd, Yfull))))
    return results
