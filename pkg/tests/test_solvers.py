import numpy as np
import pytest

from anita import harness, oracle, schedules, solvers
from anita.dataio import SynthConfig, generate_synthetic
from anita.problems import DiagonalQuadratic, LeastSquares, LogisticRegression
from anita.schedules import ScheduleParams, StageState
from anita.solvers import AnitaState, DivergenceError, anita_step
from anita.vrgrad import GradCounter

# recorded once from a deterministic run on the bundled synthetic
GD_GAP_200_PASSES = 0.09609004762792733


@pytest.fixture(scope="module")
def small_logistic():
    p = LogisticRegression(generate_synthetic(SynthConfig(60, 8, 4, 0.1, 1.0)), 0.02)
    return p, oracle.solve_reference(p)


def one_step(problem, x0, params, mu, coin_seed=0):
    ctr = GradCounter()
    st = AnitaState.start(problem, np.asarray(x0, float), np.random.default_rng(coin_seed),
                          StageState(), ctr)
    moved = anita_step(problem, st, params, mu, ctr)
    return st, moved, ctr


def test_step_collapses_without_strong_convexity():
    # x = w = 0 so the estimator returns grad f(0) = -s; x1 = -(eta/theta) g = -2g
    s = np.array([1.0, -3.0])
    p = DiagonalQuadratic([1.0, 1.0], centers=s, n=1)
    st, _, _ = one_step(p, [0.0, 0.0], ScheduleParams(p=0.5, theta=0.5, eta=1.0, alpha=0.5), 0.0)
    np.testing.assert_array_equal(st.x, -2 * (-s))


@pytest.mark.parametrize("seed", range(6))
def test_hand_computed_quadratic_step(seed):
    # f(x) = x^2/2, x0 = 1, stage-1 parameters for n=1: p = 1/2, theta = 1/2, eta = 1/3.
    # x_under = 1, g = 1, x1 = 1 - (1/3)/(1/2) = 1/3, x_bar = (1/3 + 1)/2 = 2/3.
    p = DiagonalQuadratic([1.0], n=1)
    prm = schedules.stage1_params(1, 1.0)
    assert (prm.p, prm.theta, prm.eta) == (0.5, 0.5, pytest.approx(1 / 3))
    st, moved, ctr = one_step(p, [1.0], prm, 0.0, seed)
    assert st.x[0] == pytest.approx(1 / 3, abs=1e-16)
    assert st.x_bar[0] == pytest.approx(2 / 3, abs=1e-15)
    assert st.w[0] == (pytest.approx(2 / 3, abs=1e-15) if moved else 1.0)
    assert ctr.total == 1 + 2 + (1 if moved else 0)


def test_single_component_is_deterministic_momentum():
    # with n = 1 the estimator is the exact gradient, so coin and index draws cannot
    # change x; only the snapshot (and hence x_under) depends on the seed
    p = LeastSquares(np.array([[1.0, 0.5]]), np.array([2.0]), lam=0.1)
    prm = schedules.stage1_params(1, p.smoothness_L)
    x0 = np.array([0.3, -0.3])
    for seed in range(4):
        st, _, _ = one_step(p, x0, prm, 0.0, seed)
        expected = x0 - prm.eta / prm.alpha * p.full_grad(x0)
        np.testing.assert_allclose(st.x, expected, atol=1e-15)


def test_divergence_is_reported():
    p = DiagonalQuadratic([1.0], n=1)
    huge = ScheduleParams(p=1e-9, theta=0.5, eta=1e308, alpha=0.5)
    ctr = GradCounter()
    st = AnitaState.start(p, np.array([1e10]), np.random.default_rng(0), StageState(), ctr)
    with pytest.raises(DivergenceError) as err:
        anita_step(p, st, huge, 0.0, ctr)
    assert err.value.iteration == 0


def test_budget_of_one_pass(small_logistic):
    p, ref = small_logistic
    r = solvers.run_anita(p, solvers.GENERAL_CONVEX, p.n, 0, 0, ref.f_star)
    assert r.iterations == 0
    np.testing.assert_array_equal(r.output, np.zeros(p.d))
    assert r.final_gap() == pytest.approx(p.value(np.zeros(p.d)) - ref.f_star)


@pytest.mark.parametrize("runner", [
    lambda p: solvers.run_anita(p, solvers.GENERAL_CONVEX, p.n - 1, 0),
    lambda p: solvers.run_gd(p, p.n - 1),
    lambda p: solvers.run_agd(p, p.n - 1),
    lambda p: solvers.run_svrg_loopless(p, p.n - 1, 0),
])
def test_budget_below_one_pass(small_logistic, runner):
    with pytest.raises(ValueError):
        runner(small_logistic[0])


@pytest.mark.parametrize("mode", [solvers.GENERAL_CONVEX, solvers.STRONGLY_CONVEX])
@pytest.mark.parametrize("stage1", [schedules.PROBABILISTIC, schedules.DERANDOMIZED])
def test_anita_is_deterministic(small_logistic, mode, stage1):
    p, ref = small_logistic
    runs = [solvers.run_anita(p, mode, 30 * p.n, 5, 13, ref.f_star, stage1=stage1) for _ in range(2)]
    assert runs[0].trace == runs[1].trace
    np.testing.assert_array_equal(runs[0].output, runs[1].output)


@pytest.mark.parametrize("mode", [solvers.GENERAL_CONVEX, solvers.STRONGLY_CONVEX])
def test_anita_converges_and_accounts(small_logistic, mode):
    p, ref = small_logistic
    r = solvers.run_anita(p, mode, 150 * p.n, 3, 0, ref.f_star)
    assert r.grad_total == 2 * r.iterations + p.n * (1 + r.refreshes)
    assert r.grad_total - 150 * p.n <= p.n + 1
    assert 0 <= r.final_gap() < 1e-8


def test_strongly_convex_needs_mu():
    p = LogisticRegression(generate_synthetic(SynthConfig(20, 3, 0)), 0.0)
    with pytest.raises(ValueError):
        solvers.run_anita(p, solvers.STRONGLY_CONVEX, 100, 0)


def test_derandomized_first_refresh_costs_4n(small_logistic):
    p, ref = small_logistic
    r = solvers.run_anita(p, solvers.GENERAL_CONVEX, 4 * p.n, 9, 0, ref.f_star,
                          stage1=schedules.DERANDOMIZED)
    assert r.t1 == p.n - 1
    assert r.iterations == p.n and r.grad_total == 4 * p.n and r.refreshes == 1


def test_probes_record_distance(small_logistic):
    p, ref = small_logistic
    r = solvers.run_anita(p, solvers.STRONGLY_CONVEX, 10**9, 0, 0, ref.f_star, x_star=ref.x_star,
                          probe_at=(0, 10, 50), max_iter=50)
    assert [q.t for q in r.probes] == [0, 10, 50]
    assert r.probes[0].x_dist2 == pytest.approx(float(ref.x_star @ ref.x_star))
    with pytest.raises(ValueError):
        solvers.run_anita(p, solvers.STRONGLY_CONVEX, 10**9, 0, probe_at=(1,), max_iter=5)


def test_gd_exact_on_scalar_quadratic():
    p = DiagonalQuadratic([4.0], n=1)
    r = solvers.run_gd(p, 1, x0=[3.0])
    assert r.iterations == 1 and r.output.tolist() == [0.0]


def test_gd_monotone(small_logistic):
    p, ref = small_logistic
    gaps = [t.gap for t in solvers.run_gd(p, 100 * p.n, ref.f_star).trace]
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


def test_gd_golden_on_bundled():
    p = harness.build_problem("bundled")
    ref = oracle.solve_reference(p)
    r = solvers.run_gd(p, 200 * p.n, ref.f_star)
    assert r.final_gap() == pytest.approx(GD_GAP_200_PASSES, rel=1e-12)


def test_agd_linear_rate_on_diagonal_quadratic():
    c = np.linspace(0.01, 1.0, 10)
    q = DiagonalQuadratic(c, centers=np.ones(10), n=1)
    r = solvers.run_agd(q, 200, q.value(q.solve()))
    L, mu = q.constants()
    gaps = [t.gap for t in r.trace]
    assert gaps[200] / gaps[100] <= (1 - 0.5 * np.sqrt(mu / L)) ** 100


def test_agd_first_step_is_gd(small_logistic):
    p, _ = small_logistic
    a = solvers.run_agd(p, p.n)
    g = solvers.run_gd(p, p.n)
    np.testing.assert_array_equal(a.output, g.output)


def test_agd_deterministic(small_logistic):
    p, ref = small_logistic
    assert solvers.run_agd(p, 20 * p.n, ref.f_star).trace == solvers.run_agd(p, 20 * p.n, ref.f_star).trace


def test_svrg_single_component_is_gd():
    p = LeastSquares(np.array([[1.0, 2.0]]), np.array([1.0]), lam=0.0)
    r = solvers.run_svrg_loopless(p, 41, 3)
    x = np.zeros(2)
    for _ in range(r.iterations):
        x = x - p.full_grad(x) / (4 * p.smoothness_L)
    np.testing.assert_allclose(r.output, x, atol=1e-15)


def test_svrg_deterministic_and_converges(small_logistic):
    p, ref = small_logistic
    a = solvers.run_svrg_loopless(p, 100 * p.n, 7, ref.f_star, 17)
    b = solvers.run_svrg_loopless(p, 100 * p.n, 7, ref.f_star, 17)
    assert a.trace == b.trace
    assert a.final_gap() < 1e-6
    assert a.grad_total == 2 * a.iterations + p.n * (1 + a.refreshes)


def test_timing_is_opt_in(small_logistic):
    p, _ = small_logistic
    assert all(t.wall_ns == 0 for t in solvers.run_gd(p, 5 * p.n).trace)
    timed = solvers.run_gd(p, 5 * p.n, record_time=True).trace
    assert timed[-1].wall_ns > 0
