"""Problem builders and sweeps for the four numerical experiments.

Each ``run_*`` function returns ``(columns, rows)`` ready for
:func:`symdlra.cli.write_csv`; rows are lists of labels and floats in a
deterministic order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import quantum
from .matrix import (
    LowRankMatrix,
    MatrixRhs,
    SymLowRankMatrix,
    factored_rk4,
    integrate,
    sym_step,
)
from .numerics import OdeProblem, expm, gaussian, random_orthonormal, random_skew, rk45_adaptive, svd
from .substep import Exact
from .symtucker import TensorRhs, sym_tucker_step
from .tucker import (
    assemble,
    random_symmetric_tucker,
    random_tangent,
    sym_hosvd_truncate,
)

PRESETS = ("paper", "desk")


@dataclass
class ExperimentConfig:
    """Settings of one CLI run; unset fields take the preset defaults."""

    command: str
    preset: str = "desk"
    seed: int = 1
    n: int | None = None
    rank: list[int] | None = None
    d: int | None = None
    h: list[float] | None = None
    T: float | None = None
    rtol: float = 1e-10
    atol: float = 1e-14
    enforce: bool = True
    A0: float | None = None
    timings: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}")
        for name in ("n", "d"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rank is not None and any(r <= 0 for r in self.rank):
            raise ValueError("ranks must be positive")
        if self.h is not None and any(h <= 0 for h in self.h):
            raise ValueError("step sizes must be positive")
        if self.T is not None and self.T <= 0:
            raise ValueError("T must be positive")
        if self.T is not None and self.h is not None:
            for h in self.h:
                m = round(self.T / h)
                if m < 1 or abs(m * h - self.T) > 1e-12 * max(1.0, self.T):
                    raise ValueError(f"step size {h} does not divide T={self.T}")
        if self.n is not None:
            if self.command == "lyapunov" and round(np.sqrt(self.n)) ** 2 != self.n:
                raise ValueError("lyapunov needs n to be a perfect square")
            if self.command in ("ground-state", "laser") and self.n & (self.n - 1):
                raise ValueError("the grid size n must be a power of two")
            if self.rank is not None and max(self.rank) > self.n:
                raise ValueError("ranks cannot exceed n")


DEFAULTS = {
    # command: {preset: (n, ranks, d, h sweep, T)}
    "tucker-add": {"paper": (100, [10], 3, [1.0], 1.0), "desk": (30, [5], 3, [1.0], 1.0)},
    "matrix-explicit": {p: (100, [4, 8, 16], None, [0.1, 0.05, 0.025, 0.0125], 1.0) for p in PRESETS},
    "lyapunov": {p: (100, [2, 4, 6, 8, 10, 12], None, [0.01, 0.005, 0.0025, 0.00125], 0.1) for p in PRESETS},
    "ground-state": {"paper": (128, [5], 3, [0.01], 40.0), "desk": (32, [3], 3, [0.01], 5.0)},
    "laser": {"paper": (128, [5], 3, [0.005], 1.0), "desk": (32, [3], 3, [0.005], 1.0)},
}


def resolve_defaults(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill unset fields from the preset table and validate; modifies ``cfg`` in place."""
    cfg.validate()
    n, ranks, d, hs, T = DEFAULTS[cfg.command][cfg.preset]
    cfg.n = n if cfg.n is None else cfg.n
    cfg.rank = list(ranks) if cfg.rank is None else cfg.rank
    cfg.d = d if cfg.d is None else cfg.d
    cfg.h = list(hs) if cfg.h is None else cfg.h
    cfg.T = T if cfg.T is None else cfg.T
    if cfg.command == "laser":
        cfg.A0 = 100.0 if cfg.A0 is None else cfg.A0
        cfg.extra.setdefault("ground_T", 40.0 if cfg.preset == "paper" else 5.0)
        cfg.extra.setdefault("ground_h", 0.01)
    if cfg.command == "tucker-add":
        cfg.extra.setdefault("scales", [1.0, 1e-1, 1e-2, 1e-3])
    cfg.validate()
    for h in cfg.h:
        _steps(cfg.T, h)
    return cfg


def _steps(T: float, h: float) -> int:
    m = int(round(T / h))
    if m < 1 or abs(m * h - T) > 1e-12 * max(1.0, T):
        raise ValueError(f"step size {h} does not divide T={T}")
    return m


# ---------------------------------------------------------------------------
# addition of symmetric tensors


def addition_problem(n: int, r: int, d: int, seed: int):
    """Symmetric rank-r Tucker ``A`` and a unit tangent direction ``B0`` at ``A``."""
    A = random_symmetric_tucker(n, r, d, seed)
    B0 = random_tangent(A, seed + 7)
    return A, B0


def addition_step(A, B: np.ndarray) -> np.ndarray:
    """One integrator step of ``C' = B`` on ``[0, 1]`` from ``C(0) = A``; dense result."""
    F = TensorRhs(increment=lambda t0, t1: (t1 - t0) * B, preserves_parity=True)
    return assemble(sym_tucker_step(A, F, 0.0, 1.0, parity="sym"))


def run_tucker_add(cfg: ExperimentConfig):
    cfg = resolve_defaults(cfg)
    n, r, d = cfg.n, cfg.rank[0], cfg.d
    scales = cfg.extra["scales"]
    A, B0 = addition_problem(n, r, d, cfg.seed)
    Afull = assemble(A)
    cols = ["norm_B", "err_integrator", "err_retraction"]
    if cfg.timings:
        cols += ["time_integrator", "time_retraction"]
    rows = []
    for s in scales:
        B = s * B0
        exact = Afull + B
        t = time.perf_counter()
        Y1 = addition_step(A, B)
        t_int = time.perf_counter() - t
        t = time.perf_counter()
        X = assemble(sym_hosvd_truncate(exact, r, "sym"))
        t_ret = time.perf_counter() - t
        row = [float(np.linalg.norm(B)), float(np.linalg.norm(Y1 - exact)), float(np.linalg.norm(X - exact))]
        if cfg.timings:
            row += [t_int, t_ret]
        rows.append(row)
    return cols, rows


# ---------------------------------------------------------------------------
# explicitly given symmetric matrix


class ExplicitMatrixProblem:
    """``A(t) = exp(tW) e^t D exp(tW)^T`` with ``D = diag(2^-j)`` and random skew ``W``."""

    def __init__(self, N: int = 100, seed: int = 1):
        self.N = N
        self.W = random_skew(N, seed)
        self.D = np.diag(2.0 ** -np.arange(1, N + 1))

    @lru_cache(maxsize=4096)
    def _rot(self, t: float) -> np.ndarray:
        return expm(t * self.W)

    def A(self, t: float) -> np.ndarray:
        E = self._rot(t)
        return np.exp(t) * (E @ self.D @ E.T)

    def Adot(self, t: float) -> np.ndarray:
        At = self.A(t)
        return self.W @ At - At @ self.W + At

    def rhs(self) -> MatrixRhs:
        return MatrixRhs(
            lambda t, Y: self.Adot(t),
            preserves_parity=True,
            increment=lambda t0, t1: self.A(t1) - self.A(t0),
        )

    def initial(self, r: int) -> SymLowRankMatrix:
        U = np.eye(self.N)[:, :r]
        return SymLowRankMatrix(U, self.D[:r, :r].copy(), "sym")


def run_matrix_explicit(cfg: ExperimentConfig):
    cfg = resolve_defaults(cfg)
    N, ranks, hs, T = cfg.n, cfg.rank, cfg.h, cfg.T
    prob = ExplicitMatrixProblem(N, cfg.seed)
    F = prob.rhs()
    AT = prob.A(T)
    cols = ["rank", "h", "err_sym", "err_rk4", "rk4_diverged"]
    rows = []
    for r in ranks:
        Y0 = prob.initial(r)
        for h in hs:
            _steps(T, h)
            Y = integrate(sym_step, Y0, F, 0.0, T, h)
            err_sym = float(np.linalg.norm(Y.full() - AT))
            Z, diverged = factored_rk4(LowRankMatrix(Y0.U, Y0.S, Y0.U), F, 0.0, T, h)
            err_rk = float("nan") if diverged else float(np.linalg.norm(Z.full() - AT))
            rows.append([r, h, err_sym, err_rk, int(diverged)])
    return cols, rows


# ---------------------------------------------------------------------------
# Lyapunov equation


def tridiag(n: int, a: float, b: float, c: float) -> np.ndarray:
    return np.diag(np.full(n - 1, a), -1) + np.diag(np.full(n, b)) + np.diag(np.full(n - 1, c), 1)


class LyapunovProblem:
    """``X' = A X + X A^T + Q``, ``X(0) = U0 S0 U0^T`` with ``s_11 = 1``.

    ``A = tridiag(-1, 2, -1) (x) I + I (x) tridiag(-1, 2, -1)``; ``Q`` is a
    random positive semidefinite rank-5 matrix scaled to unit Frobenius norm.
    """

    def __init__(self, N: int = 100, seed: int = 1, qrank: int = 5):
        m = int(round(np.sqrt(N)))
        if m * m != N:
            raise ValueError("N must be a perfect square")
        self.N = N
        L = tridiag(m, -1.0, 2.0, -1.0)
        self.A = np.kron(L, np.eye(m)) + np.kron(np.eye(m), L)
        B = gaussian((N, qrank), seed)
        Q = B @ B.T
        self.Q = Q / np.linalg.norm(Q)
        self.U0 = random_orthonormal(N, N, seed + 1)

    def F(self, t: float, X: np.ndarray) -> np.ndarray:
        return self.A @ X + X @ self.A.T + self.Q

    def rhs(self) -> MatrixRhs:
        return MatrixRhs(self.F, is_linear=True, preserves_parity=True)

    def X0(self) -> np.ndarray:
        u = self.U0[:, :1]
        return u @ u.T

    def initial(self, r: int) -> SymLowRankMatrix:
        S = np.zeros((r, r))
        S[0, 0] = 1.0
        return SymLowRankMatrix(self.U0[:, :r].copy(), S, "sym")

    def reference(self, T: float, rtol: float = 1e-10, atol: float = 1e-14) -> np.ndarray:
        return rk45_adaptive(OdeProblem(self.F, 0.0, T, self.X0()), rtol, atol)


def run_lyapunov(cfg: ExperimentConfig):
    cfg = resolve_defaults(cfg)
    N, ranks, hs, T = cfg.n, cfg.rank, cfg.h, cfg.T
    prob = LyapunovProblem(N, cfg.seed)
    F = prob.rhs()
    ref = prob.reference(T, cfg.rtol, cfg.atol)
    sv = svd(ref).sigma
    cols = ["kind", "rank", "h", "value"]
    rows = [["sigma", i + 1, 0.0, float(s)] for i, s in enumerate(sv[:12])]
    solver = Exact(krylov_dim=40, tol=1e-13)
    for r in ranks:
        Y0 = prob.initial(r)
        for h in hs:
            Y = integrate(sym_step, Y0, F, 0.0, T, h, solver)
            rows.append(["error", r, h, float(np.linalg.norm(Y.full() - ref))])
            rows.append(["parity", r, h, float(np.linalg.norm(Y.S - Y.S.T))])
    return cols, rows


# ---------------------------------------------------------------------------
# quantum experiments


def run_ground_state(cfg: ExperimentConfig):
    cfg = resolve_defaults(cfg)
    K, r, d, h, T = cfg.n, cfg.rank[0], cfg.d, cfg.h[0], cfg.T
    grid = quantum.GridOperators(K)
    runs = [("boson", "sym", True), ("fermion_enforced", "anti", True), ("fermion_free", "anti", False)]
    cols = ["run", "t", "energy", "core_norm", "parity_defect", "parity_defect_pre"]
    rows = []
    for label, parity, enforce in runs:
        res = quantum.ground_state_drive(grid, d, r, h, T, parity, enforce, cfg.seed)
        for rec in res.records:
            rows.append([label, rec.t, rec.energy, rec.core_norm, rec.parity_defect, rec.parity_defect_pre])
    return cols, rows


def run_laser(cfg: ExperimentConfig):
    cfg = resolve_defaults(cfg)
    K, r, d, h, T = cfg.n, cfg.rank[0], cfg.d, cfg.h[0], cfg.T
    gs_T, gs_h = cfg.extra["ground_T"], cfg.extra["ground_h"]
    grid = quantum.GridOperators(K)
    gs = quantum.ground_state_drive(grid, d, r, gs_h, gs_T, "anti", True, cfg.seed)
    pulse = quantum.LaserPulse(A0=cfg.A0)
    res = quantum.laser_drive(gs.final, grid, pulse, h, T, cfg.enforce)
    cols = ["t", "omega", "energy", "core_norm", "parity_defect"]
    rows = [[rec.t, pulse(rec.t), rec.energy, rec.core_norm, rec.parity_defect] for rec in res.records]
    return cols, rows


RUNNERS = {
    "tucker-add": run_tucker_add,
    "matrix-explicit": run_matrix_explicit,
    "lyapunov": run_lyapunov,
    "ground-state": run_ground_state,
    "laser": run_laser,
}
