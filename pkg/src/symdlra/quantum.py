"""Fourier-collocation model of d interacting particles on a ring.

Hamiltonian per particle ``-1/2 d^2 + V(x)`` and pair interaction ``-V(x_l - x_k)``
with ``V(x) = 1 - cos x``.  On the grid ``x_j = 2 pi j / K`` (``j = -K/2 ... K/2-1``)
this becomes the multilinear operator

    H[Y] = (3d - d^2)/2 Y + sum_l (Y x_l D - Y x_l Vcos)
           + sum_{l<k} (Y x_l Vcos x_k Vcos + Y x_l Vsin x_k Vsin)

with ``D = F^{-1} diag(k^2/2) F``.  The laser-driven variant replaces the
kinetic term by ``1/2 (-i d - omega(t))^2 = -1/2 d^2 + i omega d + omega^2/2``.

Time stepping is a Lie splitting into the constant shift, one split-step
Fourier update of the shared basis, and the interaction ``-W`` handled by the
(anti-)symmetric Tucker integrator.  Wave tensors are kept at unit discrete
L2 norm ``(2 pi / K)^(d/2) ||C||_F`` in imaginary time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import fft, fft_frequencies, ifft, qr_thin, rng
from .matrix import ParityWarning
from .symtucker import MultilinearOperator, TensorRhs, sym_tucker_step
from .tucker import TuckerTensor, multi_mode_product, parity_defect, symmetrize

IMAGINARY = "imaginary"
REAL = "real"


class NumericalFailure(RuntimeError):
    """A simulation produced a non-finite energy."""


def _mode(mode: str) -> str:
    if mode in (IMAGINARY, "imag"):
        return IMAGINARY
    if mode == REAL:
        return REAL
    raise ValueError(f"unknown propagation mode {mode!r}")


@dataclass(frozen=True)
class GridOperators:
    """One-particle grid quantities for ``K`` Fourier modes."""

    K: int

    def __post_init__(self):
        fft_frequencies(self.K)  # validates power of two

    @cached_property
    def x(self) -> np.ndarray:
        j = np.arange(-self.K // 2, self.K // 2)
        return 2 * np.pi * j / self.K

    @cached_property
    def freqs(self) -> np.ndarray:
        return fft_frequencies(self.K)

    @cached_property
    def T(self) -> np.ndarray:
        """Kinetic symbol ``k^2 / 2`` in FFT order."""
        return 0.5 * self.freqs.astype(float) ** 2

    def fourier_multiplier(self, symbol: np.ndarray) -> np.ndarray:
        """Dense matrix of ``F^{-1} diag(symbol) F``."""
        M = ifft(symbol[:, None] * fft(np.eye(self.K), axis=0), axis=0)
        # the matrix is real exactly when the symbol is real and even in k
        even = np.array_equal(symbol, symbol[-np.arange(self.K) % self.K])
        return M.real if np.isrealobj(symbol) and even else M

    @cached_property
    def D(self) -> np.ndarray:
        return self.fourier_multiplier(self.T)

    @cached_property
    def Dx(self) -> np.ndarray:
        """First derivative ``F^{-1} diag(i k) F``."""
        return self.fourier_multiplier(1j * self.freqs.astype(float))

    @cached_property
    def Vcos(self) -> np.ndarray:
        return np.diag(np.cos(self.x))

    @cached_property
    def Vsin(self) -> np.ndarray:
        return np.diag(np.sin(self.x))

    @property
    def cell(self) -> float:
        return 2 * np.pi / self.K


@dataclass(frozen=True)
class LaserPulse:
    """``omega(t) = A0 exp(-t^2 / tau^2) sin(Omega t)``."""

    A0: float = 100.0
    Omega: float = 100.0
    tau: float = 0.2 * np.pi

    def __call__(self, t: float) -> float:
        return self.A0 * math.exp(-(t**2) / self.tau**2) * math.sin(self.Omega * t)


@dataclass
class WaveTensor:
    """Shared-factor Tucker wave tensor with a particle-exchange parity."""

    Y: TuckerTensor
    parity: str = "anti"

    @property
    def d(self) -> int:
        return self.Y.order

    @property
    def K(self) -> int:
        return self.Y.U.shape[0]

    def l2_norm(self) -> float:
        return float((2 * np.pi / self.K) ** (self.d / 2) * np.linalg.norm(self.Y.core))

    def normalized(self) -> "WaveTensor":
        C = self.Y.core / self.l2_norm()
        return WaveTensor(TuckerTensor.symmetric(C, self.Y.U), self.parity)


# ---------------------------------------------------------------------------
# operators


def shift_constant(d: int) -> float:
    return (3 * d - d * d) / 2


def build_interaction_operator(d: int, grid: GridOperators | int) -> MultilinearOperator:
    """``W[Y] = sum_{l<k} Y x_l Vcos x_k Vcos + Y x_l Vsin x_k Vsin``."""
    if d < 2:
        raise ValueError("interaction needs d >= 2")
    g = grid if isinstance(grid, GridOperators) else GridOperators(grid)
    terms = []
    for l in range(d):
        for k in range(l + 1, d):
            terms.append((1.0, {l: g.Vcos, k: g.Vcos}))
            terms.append((1.0, {l: g.Vsin, k: g.Vsin}))
    return MultilinearOperator(terms, 0.0)


def build_hamiltonian(
    d: int, grid: GridOperators | int, omega: float | None = None, interaction: bool = True
) -> MultilinearOperator:
    """The discrete Hamiltonian as a multilinear operator; ``interaction=False`` drops ``W``."""
    g = grid if isinstance(grid, GridOperators) else GridOperators(grid)
    shift = shift_constant(d)
    terms = []
    for l in range(d):
        terms.append((1.0, {l: g.D}))
        terms.append((-1.0, {l: g.Vcos}))
        if omega:
            terms.append((1j * omega, {l: g.Dx}))
    if omega:
        shift = shift + d * omega**2 / 2
    H = MultilinearOperator(terms, shift)
    if interaction and d >= 2:
        H = H + build_interaction_operator(d, g)
    return H


def build_full_hamiltonian_apply(d: int, grid: GridOperators | int, pulse: LaserPulse | None = None) -> TensorRhs:
    """``H`` as a tensor right-hand side; time dependent through ``pulse``."""
    g = grid if isinstance(grid, GridOperators) else GridOperators(grid)
    if pulse is None:
        H = build_hamiltonian(d, g)
        return TensorRhs(structured=lambda t: H, preserves_parity=True)
    return TensorRhs(structured=lambda t: build_hamiltonian(d, g, pulse(t)), preserves_parity=True, autonomous=False)


# ---------------------------------------------------------------------------
# splitting substeps


def _time_factor(h: float, mode: str) -> complex:
    return h if _mode(mode) == IMAGINARY else 1j * h


def splitstep_sandwich(U0: np.ndarray, h: float, grid: GridOperators, mode: str = IMAGINARY, omega: float = 0.0) -> np.ndarray:
    """``exp(z/2 Vcos) F^{-1} exp(-z T_omega) F exp(z/2 Vcos) U0`` with ``z = h`` or ``i h``.

    ``T_omega = (k - omega)^2 / 2`` is the (driven) kinetic symbol.
    """
    z = _time_factor(h, mode)
    half = np.exp(z / 2 * np.cos(grid.x))[:, None]
    kin = 0.5 * (grid.freqs - omega) ** 2
    out = ifft(np.exp(-z * kin)[:, None] * fft(half * U0, axis=0), axis=0)
    out = half * out
    if _mode(mode) == IMAGINARY and np.isrealobj(U0):
        out = out.real
    return out


def splitstep_basis_update(
    U0: np.ndarray, h: float, grid: GridOperators, mode: str = IMAGINARY, omega: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Split-step update of the shared basis, re-orthonormalized.

    Returns ``(U1, R)`` with ``U1 R`` equal to the propagated basis; the
    caller absorbs ``R`` into the core in every mode.
    """
    return qr_thin(splitstep_sandwich(U0, h, grid, mode, omega))


def core_shift_update(C0: np.ndarray, h: float, d: int, mode: str = IMAGINARY) -> np.ndarray:
    """Flow of the constant part ``(3d - d^2)/2``: ``exp(-z (3d - d^2)/2) C0``."""
    factor = np.exp(-_time_factor(h, mode) * shift_constant(d))
    if _mode(mode) == IMAGINARY:
        factor = factor.real
    return factor * C0


def propagate_step(
    psi: WaveTensor,
    h: float,
    grid: GridOperators,
    mode: str = IMAGINARY,
    pulse: LaserPulse | None = None,
    t: float = 0.0,
    *,
    enforce: bool = True,
    krylov_dim: int = 30,
    tol: float = 1e-12,
    info: dict | None = None,
) -> WaveTensor:
    """One Lie splitting step: shift, split-step basis update, interaction.

    In imaginary time the result is renormalized to unit L2 norm.  ``enforce``
    scrubs the core parity after the interaction substep.  For a driven
    system ``omega`` is frozen at the step midpoint ``t + h/2``.
    """
    mode = _mode(mode)
    Y = psi.Y
    d = Y.order
    C, U = Y.core, Y.U
    if mode == REAL:
        C, U = C.astype(complex), U.astype(complex)
    omega = pulse(t + h / 2) if pulse is not None else 0.0

    C = core_shift_update(C, h, d, mode)
    U1, R = splitstep_basis_update(U, h, grid, mode, omega)
    C = multi_mode_product(C, [R] * d)

    W = build_interaction_operator(d, grid) if d >= 2 else MultilinearOperator()
    alpha = -1.0 if mode == IMAGINARY else -1j
    Fw = W.scaled(alpha)
    rhs = TensorRhs(structured=lambda _t: Fw, preserves_parity=True)
    step_info: dict = {}
    with warnings.catch_warnings():
        if not enforce:
            # the drift is the point of an unenforced run; it is reported through ``info``
            warnings.simplefilter("ignore", ParityWarning)
        X = sym_tucker_step(
            TuckerTensor.symmetric(C, U1),
            rhs,
            t,
            t + h,
            None,
            psi.parity,
            scrub_core=enforce,
            krylov_dim=krylov_dim,
            tol=tol,
            info=step_info,
        )
    out = WaveTensor(X, psi.parity)
    if mode == IMAGINARY:
        out = out.normalized()
    if info is not None:
        info.update(step_info)
    return out


def energy(psi: WaveTensor, grid: GridOperators, omega: float | None = None, interaction: bool = True) -> float:
    """``E(Y) = (2 pi / K)^d <Y, H[Y]>_F`` from core-sized contractions."""
    return float(energy_complex(psi, grid, omega, interaction).real)


def energy_complex(
    psi: WaveTensor, grid: GridOperators, omega: float | None = None, interaction: bool = True
) -> complex:
    Y = psi.Y
    H = build_hamiltonian(Y.order, grid, omega, interaction).galerkin(Y.U)
    return grid.cell**Y.order * np.vdot(Y.core, H.apply(Y.core))


# ---------------------------------------------------------------------------
# drivers


def initial_wave(grid: GridOperators, d: int, r: int, parity: str = "anti", seed: int = 0, noise: float = 0.1) -> WaveTensor:
    """Perturbed (anti-)symmetrized product of ``r`` distinct Gaussians.

    Orbital ``m`` is ``exp(-(x - c_m)^2)`` with centres spread over
    ``[-1.5, 1.5]``, perturbed by ``noise`` times Gaussian entries.  The core is
    the (anti-)symmetrized unit tensor ``e_(0, 1, ..., d-1)`` plus ``noise``
    times a Gaussian tensor.
    """
    if parity == "anti" and r < d:
        raise ValueError("an anti-symmetric core needs rank >= d")
    g = rng(seed)
    centres = np.linspace(-1.5, 1.5, r) if r > 1 else np.zeros(1)
    G = np.exp(-((grid.x[:, None] - centres[None, :]) ** 2))
    G = G + noise * g.standard_normal(G.shape) * G.max()
    U = qr_thin(G).Q
    core = np.zeros((r,) * d)
    core[tuple(i % r for i in range(d))] = 1.0
    core = symmetrize(core + noise * g.standard_normal(core.shape), parity)
    return WaveTensor(TuckerTensor.symmetric(core, U), parity).normalized()


@dataclass
class StepRecord:
    t: float
    energy: float
    core_norm: float
    parity_defect: float
    parity_defect_pre: float


@dataclass
class DriveResult:
    records: list[StepRecord] = field(default_factory=list)
    final: WaveTensor | None = None


def _record(t, psi, grid, omega, pre) -> StepRecord:
    E = energy(psi, grid, omega)
    if not np.isfinite(E):
        raise NumericalFailure(f"non-finite energy at t={t}")
    C = psi.Y.core
    return StepRecord(t, E, float(np.linalg.norm(C)), parity_defect(C, psi.parity), pre)


def ground_state_drive(
    grid: GridOperators,
    d: int = 3,
    r: int = 5,
    h: float = 0.01,
    T: float = 40.0,
    parity: str = "anti",
    enforce: bool = True,
    seed: int = 0,
    psi0: WaveTensor | None = None,
    krylov_dim: int = 30,
) -> DriveResult:
    """Imaginary-time propagation towards the lowest state of the given parity."""
    psi = psi0 if psi0 is not None else initial_wave(grid, d, r, parity, seed)
    nsteps = int(round(T / h))
    res = DriveResult()
    res.records.append(_record(0.0, psi, grid, None, 0.0))
    for n in range(nsteps):
        info: dict = {}
        psi = propagate_step(psi, h, grid, IMAGINARY, None, n * h, enforce=enforce, krylov_dim=krylov_dim, info=info)
        res.records.append(_record((n + 1) * h, psi, grid, None, info.get("parity_defect", 0.0)))
    res.final = psi
    return res


def laser_drive(
    psi0: WaveTensor,
    grid: GridOperators,
    pulse: LaserPulse | None = None,
    h: float = 0.005,
    T: float = 1.0,
    enforce: bool = True,
    krylov_dim: int = 30,
) -> DriveResult:
    """Real-time propagation with ``omega(t)`` frozen at step midpoints."""
    pulse = pulse if pulse is not None else LaserPulse()
    psi = WaveTensor(
        TuckerTensor.symmetric(psi0.Y.core.astype(complex), psi0.Y.U.astype(complex)), psi0.parity
    )
    nsteps = int(round(T / h))
    res = DriveResult()
    res.records.append(_record(0.0, psi, grid, pulse(0.0), 0.0))
    for n in range(nsteps):
        info: dict = {}
        psi = propagate_step(psi, h, grid, REAL, pulse, n * h, enforce=enforce, krylov_dim=krylov_dim, info=info)
        t = (n + 1) * h
        res.records.append(_record(t, psi, grid, pulse(t), info.get("parity_defect", 0.0)))
    res.final = psi
    return res
