import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptseek import analysis, dynamics, fields, timewarp
from ptseek.fields import BoundConstants
from ptseek.scenario import load_scenario, run_scenario
from ptseek.sim import SimConfig, Trajectory, integrate
from ptseek.timewarp import TimeWarp

COSQUAD = fields.builtin("cosine-quadratic")
QUAD = fields.builtin("quadratic-demo")
QUAD_EXACT = BoundConstants(0.5, 0.5, 1.0, 1.0)


def averaged_traj(times, xs):
    xs = np.asarray(xs, dtype=float)
    return Trajectory("averaged", np.asarray(times, dtype=float), xs, ("x1", "x2"))


def test_summarize_constant_at_source():
    tr = averaged_traj([0.0, 0.5, 1.0], np.zeros((3, 2)))
    rep = analysis.summarize(tr, QUAD, 0.3, 0.1)
    assert rep.final_distance == 0.0
    assert rep.time_to_neighborhood == 0.0
    assert rep.peak_field_reach_time == 0.0
    assert not rep.diverged
    assert rep.max_input_norms is None


def test_summarize_neighborhood_must_not_be_left():
    xs = [[1, 0], [0.1, 0], [0.5, 0], [0.2, 0], [0.1, 0]]
    rep = analysis.summarize(averaged_traj([0, 1, 2, 3, 4], xs), QUAD, 0.3, 0.1)
    assert rep.time_to_neighborhood == 3.0
    assert rep.peak_field_reach_time == 1.0
    xs = [[1, 0], [0.1, 0], [0.5, 0]]
    rep = analysis.summarize(averaged_traj([0, 1, 2], xs), QUAD, 0.3, 0.1)
    assert rep.time_to_neighborhood is None


@given(st.lists(st.floats(0, 3), min_size=1, max_size=30))
def test_time_to_neighborhood_invariant(radii):
    t = np.arange(len(radii), dtype=float)
    tr = averaged_traj(t, np.column_stack((radii, np.zeros(len(radii)))))
    rep = analysis.summarize(tr, QUAD, 0.5, 0.1)
    if rep.time_to_neighborhood is not None:
        assert rep.time_to_neighborhood <= t[-1]
        assert all(r <= 0.5 for r, ti in zip(radii, t) if ti >= rep.time_to_neighborhood)


def test_report_serialisations():
    rep = analysis.summarize(averaged_traj([0.0, 1.0], [[1.0, 0.0], [0.0, 0.0]]), QUAD, 0.3, 0.1)
    text = analysis.report_text(rep, [("name", "demo")])
    assert text.splitlines()[0] == "name = demo"
    assert "diverged = false" in text
    csv = analysis.report_csv(rep).splitlines()
    assert len(csv) == 2 and csv[0].split(",")[0] == "t_start"


def test_lyapunov_values():
    tr = averaged_traj([0.0, 1.0], [[0.0, 0.0], [-2.0, -2.0]])
    V = analysis.lyapunov_series(tr, COSQUAD)
    assert V[0] == 0.0
    assert V[1] == 3.0 - fields.eval_field(COSQUAD, (-2.0, -2.0))
    assert np.all(V >= 0)


def test_lyapunov_quadratic_gradient_flow_is_exponential():
    k = 1.3
    sys_ = dynamics.averaged_system(k, None, QUAD, None, "tau")
    tr = integrate(sys_, [2.0, -1.0], SimConfig(0.0, 5.0, 1e-3))
    V = analysis.lyapunov_series(tr, QUAD)
    assert np.allclose(V, V[0] * np.exp(-k * tr.times), rtol=1e-9)


@pytest.mark.parametrize("kind,x0", [("quadratic-demo", (2.0, 2.0)), ("cosine-quadratic", (-2.0, -2.0)),
                                     ("cosine-quartic", (1.0, -1.0))])
def test_lyapunov_nonincreasing_frame_tau(kind, x0):
    f = fields.builtin(kind)
    sys_ = dynamics.averaged_system(1.0, TimeWarp(0, 1, 0), f, None, "tau")
    tr = integrate(sys_, list(x0), SimConfig(0.0, 10.0, 1e-3))
    assert np.max(np.diff(analysis.lyapunov_series(tr, f))) <= 1e-9


def exact_quadratic_traj(k, w, d0=2.0, n=300):
    t = np.linspace(w.t0, timewarp.stop_time(w), n)
    s = t - w.t0
    d = d0 * np.exp(-0.5 * k * s / (1 - s / w.T))
    return averaged_traj(t, np.column_stack((d, np.zeros(n))))


def test_envelope_quadratic_exact_solution_is_tight():
    # exact constants give envelope rate k c1^2 / 4 = k / 2, the exact rate
    c1, _ = fields.comparison_constants(QUAD_EXACT, 1)
    assert c1 * c1 == pytest.approx(2.0)
    w = TimeWarp(0, 1, 0)
    tr = exact_quadratic_traj(1.0, w)
    res = analysis.check_envelope_bound(tr, QUAD, 0.0, w, 1.0, QUAD_EXACT, rtol=1e-12)
    assert res.passed
    assert res.decay_rate == pytest.approx(0.5)
    assert np.allclose(res.bound, res.distance, rtol=1e-12, atol=1e-300)


def test_envelope_checker_soundness_by_mutation():
    w = TimeWarp(0, 1, 0)
    tr = exact_quadratic_traj(1.0, w)
    # the envelope scales with the initial distance, so keep the first sample
    xs = np.array(tr.states)
    xs[1:] *= 2.0
    doubled = averaged_traj(tr.times, xs)
    res = analysis.check_envelope_bound(doubled, QUAD, 0.0, w, 1.0, QUAD_EXACT)
    assert not res.passed
    assert res.min_slack < 0


@settings(max_examples=50)
@given(st.integers(1, 298), st.floats(1.0001, 10.0))
def test_envelope_checker_flags_any_single_violation(i, factor):
    w = TimeWarp(0, 1, 0)
    tr = exact_quadratic_traj(1.0, w)
    xs = np.array(tr.states)
    xs[i] *= factor
    res = analysis.check_envelope_bound(averaged_traj(tr.times, xs), QUAD, 0.0, w, 1.0, QUAD_EXACT)
    if res.distance[i] >= np.finfo(float).tiny:
        assert not res.passed


def test_envelope_preconditions():
    w = TimeWarp(0, 1, 0)
    tr = exact_quadratic_traj(1.0, w)
    with pytest.raises(ValueError):
        analysis.check_envelope_bound(tr, fields.builtin("cosine-quartic"), 0.0, w, 1.0, QUAD_EXACT)
    with pytest.raises(ValueError):
        analysis.check_envelope_bound(tr, QUAD, 0.0, TimeWarp(0, 1, 0.3), 1.0, QUAD_EXACT)
    with pytest.raises(ValueError):
        analysis.check_envelope_bound(tr, QUAD, 0.0, w, 1.0)  # no constants, unbounded region


def test_envelope_on_s71_averaged_run():
    res = run_scenario(load_scenario("s71_averaged"))
    assert res.envelope.passed
    assert res.failures == ()


def test_convergence_threshold_values():
    cond = analysis.convergence_condition_k(QUAD, np.zeros((2, 2)), constants=QUAD_EXACT)
    assert cond.threshold == 0.0
    cond = analysis.convergence_condition_k(QUAD, -np.eye(2), k=1.8, constants=QUAD_EXACT)
    assert cond.threshold == pytest.approx(2.0)
    assert cond.satisfied is False
    with pytest.raises(ValueError):
        analysis.convergence_condition_k(fields.builtin("cosine-quartic"), np.eye(2))


def test_convergence_threshold_s71_field():
    cond = analysis.convergence_condition_k(COSQUAD, -np.eye(2), k=1.8)
    c = fields.estimate_bound_constants(COSQUAD, 3.0, 201)
    c1, c2 = c.b1 / math.sqrt(c.a1), c.b2 / math.sqrt(c.a2)
    assert cond.threshold == pytest.approx(2 * (c2 / c1) ** 2, rel=1e-12)
    # the gain used in the experiment is far below the sufficient threshold
    assert cond.satisfied is False


BLOWUP = BoundConstants(2.0, 0.5, 1.0, 3.0)
W = TimeWarp(0.0, 1.0, 0.0)


def s_form_denominator(V0, k, kappa, E, w, consts, tau):
    """Independent form of the denominator, written in s = tau - t0."""
    q = (2 * kappa - 1) / (2 * kappa)
    sigma = 2 * q - 1
    c1, c2 = consts.b1 / consts.a1**q, consts.b2 / consts.a2**q
    A = sigma * V0**sigma
    s, T = tau - w.t0, w.T
    return (T + s) - A * c2 * c2 * E * T * s + A * 0.5 * k * c1 * c1 * s * (T + s)


@settings(max_examples=100)
@given(st.floats(0.01, 10), st.floats(0.1, 5), st.floats(0, 5), st.floats(0, 20),
       st.floats(0, 3), st.floats(0.2, 4), st.integers(2, 4))
def test_blowup_polynomial_matches_direct_formula(V0, k, E, tau_off, t0, T, kappa):
    w = TimeWarp(t0, T, 0.0)
    g = analysis.blowup_coefficients(V0, k, kappa, E, w, BLOWUP)
    tau = t0 + tau_off
    direct = s_form_denominator(V0, k, kappa, E, w, BLOWUP, tau)
    scale = abs(g.gamma2) * tau * tau + abs(g.gamma1) * tau + abs(g.gamma0)
    assert abs(g.denominator(tau) - direct) <= 1e-9 * max(scale, abs(direct), 1.0)


def test_gamma2_positive():
    for V0 in (1e-3, 1.0, 50.0):
        assert analysis.blowup_coefficients(V0, 1.0, 2, 0.5, W, BLOWUP).gamma2 > 0


@pytest.mark.parametrize("tau_star", [0.5, 1.0, 2.0, 7.5])
def test_critical_V0_zeroes_denominator(tau_star):
    E = 2 * analysis.blowup_E_threshold(tau_star, 1.0, 2, W, BLOWUP)
    V0 = analysis.critical_V0(tau_star, 1.0, 2, E, W, BLOWUP)
    g = analysis.blowup_coefficients(V0, 1.0, 2, E, W, BLOWUP)
    scale = abs(g.gamma2) * tau_star**2 + abs(g.gamma1) * tau_star + abs(g.gamma0)
    assert abs(g.denominator(tau_star)) / scale < 1e-9
    assert abs(s_form_denominator(V0, 1.0, 2, E, W, BLOWUP, tau_star)) / scale < 1e-9


def test_critical_V0_absent_below_threshold():
    E = 0.5 * analysis.blowup_E_threshold(1.0, 1.0, 2, W, BLOWUP)
    assert analysis.critical_V0(1.0, 1.0, 2, E, W, BLOWUP) is None
    with pytest.raises(ValueError):
        analysis.blowup_coefficients(1.0, 1.0, 1, 1.0, W, BLOWUP)


def test_boundary_layer():
    zero = analysis.boundary_layer_decay(0.0, 2.0)
    assert np.all(zero.ytilde == 0.0)
    one = analysis.boundary_layer_decay(1.0, 1.0)
    assert one.ytilde[-1] == pytest.approx(math.exp(-1), abs=1e-10)
    assert one.max_error < 1e-10
    assert one.V_nonincreasing
    with pytest.raises(ValueError):
        analysis.boundary_layer_decay(1.0, 0.0)


def test_sweep_result_helpers():
    d = np.array([[0.3, 0.2], [0.25, 0.21], [0.19, 0.3]])
    res = analysis.SweepResult((1.0, 2.0, 3.0), (2e-3, 1e-3), d, np.zeros_like(d, bool))
    assert res.monotone_rows() is False
    assert np.array_equal(res.row_best, [0.2, 0.21, 0.19])
    # 0.21 is within the one-cell band of the row above (its second best 0.3)
    assert res.banded_findings() == []
    d2 = np.array([[0.3, 0.2], [0.4, 0.35]])
    res2 = analysis.SweepResult((1.0, 2.0), (2e-3, 1e-3), d2, np.zeros_like(d2, bool))
    assert len(res2.banded_findings()) == 1
    lines = res.to_long_csv().splitlines()
    assert lines[0] == "omega,mu,final_distance,diverged" and len(lines) == 7
    assert res.to_matrix_csv().splitlines()[0].startswith("omega\\mu,")


def test_sweep_rejects_unsorted_lists():
    base = load_scenario("s71_driftfree")
    with pytest.raises(ValueError):
        analysis.sweep_practical_convergence(base, [20, 10], [1e-3])
    with pytest.raises(ValueError):
        analysis.sweep_practical_convergence(base, [10], [1e-3, 2e-3])


def test_single_cell_sweep_equals_run():
    base = replace(load_scenario("s71_driftfree"), warp=TimeWarp(0.0, 0.2, 0.3))
    res = analysis.sweep_practical_convergence(base, [30.0], [1e-3], tolerances=[1e-9])
    direct = run_scenario(base)
    assert res.distances[0, 0] == direct.report.final_distance
    assert res.tolerances == {1e-9: False}
    res = analysis.sweep_practical_convergence(base, [30.0], [1e-3],
                                               tolerances=[10 * direct.report.final_distance])
    assert all(res.tolerances.values())


def test_worker_count_honours_env(monkeypatch):
    monkeypatch.setenv("PTSEEK_THREADS", "1")
    assert analysis.worker_count(12) == 1
    monkeypatch.delenv("PTSEEK_THREADS")
    assert 1 <= analysis.worker_count(12) <= 12
    assert analysis.worker_count(1) == 1


# Regression fixture: drift-free sweep final distances (omega rows x mu
# columns), RK4 at the per-cell step size.
SWEEP_FIXTURE = np.array([
    [0.32244249, 0.32160760, 0.32118836],
    [0.22600527, 0.22527399, 0.22488866],
    [0.18350858, 0.18266468, 0.18220685],
    [0.15894043, 0.15817277, 0.15772516],
])


@pytest.mark.slow
def test_drift_free_sweep_regression(monkeypatch):
    monkeypatch.setenv("PTSEEK_THREADS", "2")
    res = analysis.sweep_practical_convergence(load_scenario("s71_driftfree"), [10, 20, 30, 40],
                                               [4e-3, 2e-3, 1e-3])
    assert np.allclose(res.distances, SWEEP_FIXTURE, atol=1e-8)
    assert res.monotone_rows()
    assert res.distances[-1, -1] < res.distances[0, 0]
    assert res.banded_findings() == []
