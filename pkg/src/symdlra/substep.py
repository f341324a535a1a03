"""Solvers for the small matrix ODEs inside one integrator step.

An integrator hands a :class:`SubProblem` to a solver, which returns the
solution at ``t1``.  Solvers are plain callables, so anything with the
signature ``solver(sub) -> ndarray`` works.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import OdeProblem, arnoldi_apply_expm, rk4, rk45_adaptive


@dataclass
class SubProblem:
    """``y' = rhs(t, y)``, ``y(t0) = y0``, solved up to ``t1``.

    ``affine`` marks a right-hand side of the form ``L y + c`` that does not
    depend on ``t``.  ``increment`` is the exact value of ``int_t0^t1 rhs`` for
    a right-hand side that does not depend on ``y``.
    """

    rhs: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    t0: float
    t1: float
    affine: bool = False
    increment: np.ndarray | None = None


class RK4:
    """Classical RK4 with a fixed number of inner steps."""

    def __init__(self, nsteps: int = 1):
        self.nsteps = nsteps

    def __call__(self, sub: SubProblem) -> np.ndarray:
        return rk4(OdeProblem(sub.rhs, sub.t0, sub.t1, sub.y0), self.nsteps)

    def __repr__(self):
        return f"RK4(nsteps={self.nsteps})"


class Adaptive:
    """Dormand-Prince 4(5) to the given tolerances."""

    def __init__(self, rtol: float = 1e-10, atol: float = 1e-14):
        self.rtol, self.atol = rtol, atol

    def __call__(self, sub: SubProblem) -> np.ndarray:
        return rk45_adaptive(OdeProblem(sub.rhs, sub.t0, sub.t1, sub.y0), self.rtol, self.atol)

    def __repr__(self):
        return f"Adaptive(rtol={self.rtol}, atol={self.atol})"


def affine_expm_solve(sub: SubProblem, krylov_dim: int = 30, tol: float = 1e-13) -> np.ndarray:
    """Exact flow of an autonomous affine ODE via the Arnoldi exponential.

    With ``c = rhs(t0, 0)`` and ``L y = rhs(t0, y) - c`` the solution is the
    top block of ``expm(h [[L, c], [0, 0]]) [y0; 1]``.
    """
    y0 = np.asarray(sub.y0)
    shape = y0.shape
    h = sub.t1 - sub.t0
    zero = np.zeros_like(y0)
    c = np.asarray(sub.rhs(sub.t0, zero))
    dtype = np.result_type(y0, c)
    n = y0.size

    def lin(v):
        return np.asarray(sub.rhs(sub.t0, v.reshape(shape)), dtype=dtype).ravel() - c.ravel()

    if not np.any(c):
        return arnoldi_apply_expm(lin, y0.astype(dtype), h, krylov_dim, tol)

    cflat = c.ravel()

    def aug(z):
        out = np.empty_like(z)
        out[:n] = lin(z[:n]) + z[n] * cflat
        out[n] = 0
        return out

    z0 = np.concatenate([y0.astype(dtype).ravel(), np.ones(1, dtype=dtype)])
    z1 = arnoldi_apply_expm(aug, z0, h, krylov_dim, tol)
    return z1[:n].reshape(shape)


class Exact:
    """Exact substep flows.

    Uses ``sub.increment`` when the right-hand side does not depend on the
    unknown, otherwise the Arnoldi exponential for autonomous affine problems.
    """

    def __init__(self, krylov_dim: int = 30, tol: float = 1e-13):
        self.krylov_dim, self.tol = krylov_dim, tol

    def __call__(self, sub: SubProblem) -> np.ndarray:
        if sub.increment is not None:
            return np.asarray(sub.y0) + sub.increment
        if sub.affine:
            return affine_expm_solve(sub, self.krylov_dim, self.tol)
        raise ValueError("exact substep needs an increment or an affine autonomous right-hand side")

    def __repr__(self):
        return f"Exact(krylov_dim={self.krylov_dim}, tol={self.tol})"


class Auto:
    """Exact flow when available, RK4 with ``nsteps`` inner steps otherwise."""

    def __init__(self, nsteps: int = 1, krylov_dim: int = 30, tol: float = 1e-13):
        self.exact = Exact(krylov_dim, tol)
        self.fallback = RK4(nsteps)

    def __call__(self, sub: SubProblem) -> np.ndarray:
        if sub.increment is not None or sub.affine:
            return self.exact(sub)
        return self.fallback(sub)

    def __repr__(self):
        return f"Auto({self.fallback!r}, {self.exact!r})"


def resolve(solver) -> Callable[[SubProblem], np.ndarray]:
    """Accept a solver instance, ``None``/"auto", "exact", "rk4" or "adaptive"."""
    if solver is None or solver == "auto":
        return Auto()
    if isinstance(solver, str):
        return {"exact": Exact, "rk4": RK4, "adaptive": Adaptive}[solver]()
    return solver
