import numpy as np
import pytest

from symdlra import experiments as ex
from symdlra.experiments import ExperimentConfig
from symdlra.matrix import integrate, sym_step


def cfg(command, **fields):
    return ExperimentConfig(command=command, **fields)


def test_resolve_defaults_fills_preset():
    c = ex.resolve_defaults(cfg("ground-state", preset="paper"))
    assert (c.n, c.rank, c.d, c.h, c.T) == (128, [5], 3, [0.01], 40.0)
    c = ex.resolve_defaults(cfg("laser", T=0.5))
    assert c.T == 0.5 and c.A0 == 100.0 and c.extra["ground_T"] == 5.0


@pytest.mark.parametrize(
    "fields",
    [{"n": 0}, {"rank": [0]}, {"h": [-0.1]}, {"T": 0.0}, {"h": [0.3]}, {"preset": "huge"}, {"n": 4, "rank": [5]}],
)
def test_config_validation(fields):
    with pytest.raises(ValueError):
        ex.resolve_defaults(cfg("matrix-explicit", **fields))


def test_grid_size_must_be_power_of_two():
    with pytest.raises(ValueError):
        ex.resolve_defaults(cfg("ground-state", n=24))


def test_addition_zero_and_quadratic():
    _, rows = ex.run_tucker_add(cfg("tucker-add", extra={"scales": [0.0, 1e-2, 5e-3]}))
    zero, big, small = rows
    assert zero[1] <= 1e-13 and zero[2] <= 1e-13
    assert 3.2 <= big[1] / small[1] <= 4.8


def test_addition_within_ten_times_retraction():
    _, rows = ex.run_tucker_add(cfg("tucker-add"))
    assert all(r[1] <= 10 * r[2] for r in rows)


def test_addition_timings_columns():
    cols, rows = ex.run_tucker_add(cfg("tucker-add", n=10, rank=[3], timings=True))
    assert cols[-2:] == ["time_integrator", "time_retraction"]
    assert all(len(r) == 5 and r[3] >= 0 for r in rows)


def test_explicit_matrix_definition():
    p = ex.ExplicitMatrixProblem(20, 1)
    np.testing.assert_allclose(p.A(0.0), p.D)
    # A(t) = e^t exp(tW) D exp(tW)^T keeps the singular values e^t 2^-j
    sv = np.linalg.svd(p.A(0.5), compute_uv=False)
    np.testing.assert_allclose(sv, np.exp(0.5) * 2.0 ** -np.arange(1, 21), rtol=1e-10)
    h = 1e-6
    fd = (p.A(0.3 + h) - p.A(0.3 - h)) / (2 * h)
    assert np.linalg.norm(p.Adot(0.3) - fd) <= 1e-6 * np.linalg.norm(fd)


def test_explicit_matrix_full_rank_is_accurate():
    _, rows = ex.run_matrix_explicit(cfg("matrix-explicit", rank=[100], h=[0.0125]))
    assert rows[0][2] <= 1e-6


def test_lyapunov_zero_problem():
    p = ex.LyapunovProblem(16, 1)
    p.Q = np.zeros_like(p.Q)
    Y0 = p.initial(3)
    Y0.S[:] = 0.0
    Y = integrate(sym_step, Y0, p.rhs(), 0.0, 0.02, 0.01)
    assert np.array_equal(Y.full(), np.zeros((16, 16)))


def test_lyapunov_definition():
    p = ex.LyapunovProblem(9, 2)
    L = ex.tridiag(3, -1.0, 2.0, -1.0)
    assert L[0, 0] == 2.0 and L[1, 0] == -1.0 and L[0, 2] == 0.0
    np.testing.assert_array_equal(p.A, np.kron(L, np.eye(3)) + np.kron(np.eye(3), L))
    assert np.linalg.norm(p.Q) == pytest.approx(1.0)
    assert np.linalg.matrix_rank(p.Q) == 5
    np.testing.assert_allclose(p.initial(4).full(), p.X0(), atol=1e-15)


def test_lyapunov_rows():
    _, rows = ex.run_lyapunov(cfg("lyapunov", n=16, rank=[2], h=[0.01], T=0.02))
    sigmas = [r[3] for r in rows if r[0] == "sigma"]
    assert len(sigmas) == 12 and sigmas == sorted(sigmas, reverse=True)
    assert [r[0] for r in rows[12:]] == ["error", "parity"]
    assert rows[-1][3] == 0.0


def test_ground_state_rows_and_parity():
    _, rows = ex.run_ground_state(cfg("ground-state", n=16, d=2, rank=[2], T=0.2))
    runs = {r[0] for r in rows}
    assert runs == {"boson", "fermion_enforced", "fermion_free"}
    assert all(r[4] == 0.0 for r in rows if r[0] != "fermion_free")
    assert all(np.isfinite(r[2]) for r in rows)


def test_laser_rows():
    cols, rows = ex.run_laser(cfg("laser", n=16, d=2, rank=[2], T=0.05, extra={"ground_T": 0.1}))
    assert cols[:3] == ["t", "omega", "energy"]
    assert len(rows) == 11 and rows[0][1] == 0.0
