import math

import numpy as np
import pytest

from ptseek import dynamics, fields, drift
from ptseek.dynamics import SeekerParams, System
from ptseek.sim import (CSV_COLUMNS, DivergenceError, NonFiniteStateError, SimConfig, Trajectory,
                        TrajectoryFormatError, integrate, read_csv, step_size_for, write_csv)
from ptseek.timewarp import TimeWarp
from ptseek.acceptance import scalar_demo_error


def scalar(rhs):
    return System("scalar", lambda t, y: np.array([rhs(t, y[0])]), lambda t, y: (), ("x",))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, -0.1)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 0.1, record_every=0)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 0.1, terminal_margin=0.1)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 0.1, mesh="dilated")


def test_config_enforces_dither_resolution():
    # h must stay below 2 pi / (20 omega G)
    limit = 2 * math.pi / (20 * 30 * (1 / 0.09))
    SimConfig(0.0, 1.0, 0.99 * limit, omega=30.0, max_gain=1 / 0.09)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 1.01 * limit, omega=30.0, max_gain=1 / 0.09)


def test_step_size_examples():
    w = TimeWarp(0.0, 1.0, 0.3)
    assert step_size_for(SeekerParams(30.0, 1.8, 1e-3), w) == 5e-5
    assert step_size_for(SeekerParams(50.0, 1.0, 1e-3), w) == 5e-5
    assert 2 * math.pi / (50 * 50 / 0.09) == pytest.approx(2.26e-4, rel=1e-3)
    assert step_size_for(SeekerParams(50.0, 1.0, 1.0), TimeWarp(0, 1, 1.0)) == pytest.approx(
        2 * math.pi / 2500)
    assert step_size_for(SeekerParams(50.0, 1.0, 1.0), w) == pytest.approx(2 * math.pi * 0.09 / 2500)


def test_nodes_end_exactly():
    cfg = SimConfig(0.0, 1.0, 0.3)
    assert cfg.nodes()[-1] == 1.0
    assert np.all(np.diff(cfg.nodes()) > 0)
    w = TimeWarp(0.0, 1.0, 0.0)
    cfg = SimConfig(0.0, 0.9999, 0.5, mesh="dilated", warp=w)
    t = cfg.nodes()
    assert t[-1] == 0.9999 and np.all(np.diff(t) > 0)
    # graded towards the horizon
    assert np.diff(t)[-1] < np.diff(t)[0]


def test_constant_trajectory():
    tr = integrate(scalar(lambda t, x: 0.0), [3.25], SimConfig(0.0, 2.0, 0.01))
    assert np.all(tr.states == 3.25)


def test_record_every_keeps_final_step():
    tr = integrate(scalar(lambda t, x: -x), [1.0], SimConfig(0.0, 1.0, 0.03, record_every=7))
    assert tr.times[-1] == 1.0
    assert len(tr) == 1 + 34 // 7 + 1


def test_trajectory_is_read_only():
    tr = integrate(scalar(lambda t, x: -x), [1.0], SimConfig(0.0, 1.0, 0.1))
    with pytest.raises(ValueError):
        tr.states[0, 0] = 2.0


def test_divergence_is_reported_with_escape_time():
    with pytest.raises(DivergenceError) as info:
        integrate(scalar(lambda t, x: x), [1.0], SimConfig(0.0, 30.0, 0.01))
    err = info.value
    assert err.escape_time == pytest.approx(math.log(1e9), abs=0.02)
    assert err.trajectory.status == "diverged"
    assert err.trajectory.times[-1] == err.escape_time


def test_non_finite_state_is_reported():
    def rhs(t, x):
        return math.nan if t > 0.5 else 1.0
    with pytest.raises(NonFiniteStateError) as info:
        integrate(scalar(rhs), [0.0], SimConfig(0.0, 1.0, 0.1))
    assert info.value.last_finite_time == pytest.approx(0.5, abs=0.11)
    assert np.all(np.isfinite(info.value.trajectory.states))


def test_bad_initial_state():
    with pytest.raises(ValueError):
        integrate(scalar(lambda t, x: 0.0), [math.inf], SimConfig(0.0, 1.0, 0.1))
    with pytest.raises(ValueError):
        integrate(scalar(lambda t, x: 0.0), [1.0, 2.0], SimConfig(0.0, 1.0, 0.1))


def test_scalar_demo_against_closed_form():
    assert scalar_demo_error(1e-4) < 1e-8


def test_rk4_order_on_scalar_demo():
    for h in (1e-3, 5e-4, 2.5e-4):
        ratio = scalar_demo_error(h) / scalar_demo_error(h / 2)
        assert 12 <= ratio <= 20


def _s71_system():
    p = SeekerParams(30.0, 1.8, 1e-3)
    f = fields.builtin("cosine-quadratic")
    return (dynamics.pt_seeker_system(p, TimeWarp(0, 1, 0.3), f, drift.gradient_drift(-np.eye(2))),
            dynamics.initial_state(f, (-2.0, -2.0)))


def test_determinism_bit_identical():
    sys_, x0 = _s71_system()
    cfg = SimConfig(0.0, 0.05, 5e-5, omega=30.0, max_gain=1 / 0.09)
    a, b = integrate(sys_, x0, cfg), integrate(sys_, x0, cfg)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.inputs, b.inputs)


@pytest.mark.slow
def test_step_halving_on_s71_pt_run():
    sys_, x0 = _s71_system()
    ends = []
    for h in (2e-6, 1e-6):
        cfg = SimConfig(0.0, 1.0, h, record_every=100_000, omega=30.0, max_gain=1 / 0.09)
        ends.append(integrate(sys_, x0, cfg).positions[-1])
    assert np.linalg.norm(ends[0] - ends[1]) < 1e-3


def test_csv_roundtrip_is_bit_exact(tmp_path):
    sys_, x0 = _s71_system()
    tr = integrate(sys_, x0, SimConfig(0.0, 0.01, 5e-5, omega=30.0, max_gain=1 / 0.09))
    path = write_csv(tr, tmp_path / "a.csv")
    assert path.read_text().splitlines()[0] == "t,x1,x2,theta,z,u1,u2,y"
    back = read_csv(path)
    assert back.kind == "seeker"
    for name in CSV_COLUMNS["seeker"]:
        assert np.array_equal(back.column(name), tr.column(name))


def test_csv_saturated_and_averaged_headers(tmp_path):
    f = fields.builtin("quadratic-demo")
    p = SeekerParams(30.0, 1.4, 1e-3, epsilon=4e-4, S=4.0)
    sys_ = dynamics.saturated_seeker_system(p, TimeWarp(0, 1, 0.3), f)
    x0 = dynamics.initial_state(f, (2.0, 2.0), saturated=True)
    tr = integrate(sys_, x0, SimConfig(0.0, 0.01, 5e-5))
    path = write_csv(tr, tmp_path / "s.csv")
    assert path.read_text().splitlines()[0] == "t,x1,x2,theta,z,u1,u2,y,u2dot_sat"
    back = read_csv(path)
    assert np.array_equal(back.states, tr.states)
    assert np.array_equal(back.extras["u2dot_sat"], tr.extras["u2dot_sat"])

    avg = integrate(dynamics.averaged_system(1.0, None, f, None, "tau"), [1.0, 1.0],
                    SimConfig(0.0, 1.0, 0.1))
    path = write_csv(avg, tmp_path / "a.csv")
    assert path.read_text().splitlines()[0] == "t,x1,x2,y"
    assert np.array_equal(read_csv(path).states, avg.states)


def test_csv_seventeen_significant_digits(tmp_path):
    tr = Trajectory("scalar", np.array([0.0, 0.1]), np.array([[1 / 3], [2 / 3]]), ("x",))
    text = write_csv(tr, tmp_path / "x.csv").read_text().splitlines()
    assert text[1:] == ["0,0.33333333333333331", "0.10000000000000001,0.66666666666666663"]


@pytest.mark.parametrize("content", [
    "t,x1,x2,theta,z,u1,u2,y\n",
    "time,x\n0,1\n",
    "t,x\n0,1\n0,2\n",
    "t,x\n0,abc\n",
    "t,x\n0,1,2\n",
])
def test_read_csv_rejects_malformed(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(TrajectoryFormatError):
        read_csv(path)


def test_trajectory_lengths_must_match():
    with pytest.raises(ValueError):
        Trajectory("scalar", np.array([0.0, 1.0]), np.zeros((3, 1)), ("x",))
