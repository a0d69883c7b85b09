"""The acceptance suite: ten numbered checks run by ``ptseek verify`` and the test suite.

Each check returns a :class:`CriterionResult` whose ``detail`` carries only
deterministic numbers, so two runs print identical tables.  Wall-clock
times are measured separately and shown only on request.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import analysis, dynamics, fields, timewarp
from .fields import BoundConstants
from .scenario import RunResult, load_scenario, run_scenario
from .sim import SimConfig, Trajectory, integrate
from .timewarp import TimeWarp

EPS_Y = 0.1
CLIP_GAIN_CAP = 1.0 / 0.09


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    budget_s: float
    check: object  # () -> (passed, detail)


_runs: dict[tuple[str, int | None], RunResult] = {}


def clear_cache() -> None:
    _runs.clear()


def scenario_run(name: str, record_every: int | None = None) -> RunResult:
    """Run a bundled scenario once per process (optionally recording every step)."""
    key = (name, record_every)
    if key not in _runs:
        scn = load_scenario(name)
        if record_every is not None:
            scn = replace(scn, record_every=record_every)
        _runs[key] = run_scenario(scn)
    return _runs[key]


def _y_at(run: RunResult, t: float) -> float:
    traj = run.trajectory
    i = int(np.searchsorted(traj.times, t - 1e-12))
    return float(traj.field_values[min(i, len(traj) - 1)])


def _fmt(v) -> str:
    return "none" if v is None else f"{v:.6g}"


# Criteria

def scalar_demo_error(h: float, k: float = 1.0, warp: TimeWarp = TimeWarp(0.0, 1.0, 0.0),
                      span: float = 0.9) -> float:
    """Max abs RK4 error of the scalar PT example against its closed form on ``[t0, t0 + span T]``."""
    cfg = SimConfig(warp.t0, warp.t0 + span * warp.T, h, mesh="uniform")
    traj = integrate(dynamics.scalar_demo_system(k, warp), [1.0], cfg)
    exact = np.array([dynamics.scalar_pt_demo(1.0, k, warp, t) for t in traj.times])
    return float(np.max(np.abs(traj.states[:, 0] - exact)))


def roundtrip_error(taus, warp: TimeWarp) -> float:
    return max(abs(timewarp.dilate(warp, timewarp.contract(warp, tau)) - tau) for tau in taus)


def check_timewarp_exactness():
    w = TimeWarp(0.0, 1.0, 0.0)
    taus = np.linspace(w.t0, w.t0 + 100.0 * w.T, 1000)
    rt = float(roundtrip_error(taus, w))
    err = scalar_demo_error(1e-4)
    ok = rt < 1e-12 and err < 1e-8
    return ok, f"roundtrip max {rt:.3g} (tau in [t0, t0+100T]); scalar demo max err {err:.3g}"


def check_s71():
    pt = scenario_run("s71_vanishing")
    asym = scenario_run("s71_asymptotic")
    T = pt.scenario.warp.t_end
    yT = _y_at(pt, T)
    reach = pt.report.peak_field_reach_time
    d0 = math.hypot(*pt.scenario.x0)
    d_asym = asym.report.final_distance
    ok = (yT >= 3.0 - EPS_Y and reach is not None and reach <= T
          and (asym.report.diverged or d_asym > d0))
    return ok, (f"PT y(T)={yT:.4f} reach={_fmt(reach)}; asymptotic final dist {d_asym:.4f} "
                f"vs initial {d0:.4f}")


def check_s72():
    pt = scenario_run("s72_nonvanishing")
    asym = scenario_run("s72_asymptotic")
    T = pt.scenario.warp.t_end
    yT = _y_at(pt, T)
    tr = asym.trajectory
    tail = tr.times >= tr.times[0] + 0.75 * (tr.times[-1] - tr.times[0])
    tail_max = float(tr.field_values[tail].max())
    ok = yT >= 2.0 - EPS_Y and not asym.report.diverged and tail_max < 2.0 - EPS_Y
    return ok, (f"PT y(T)={yT:.4f}; asymptotic diverged={asym.report.diverged} "
                f"final-quarter max y={tail_max:.4f}")


def check_s73():
    tv = scenario_run("s73_saturated", record_every=1)
    const = scenario_run("s73_constant", record_every=1)
    S = tv.scenario.params.S
    r_tv = tv.report.peak_field_reach_time
    r_c = const.report.peak_field_reach_time
    sat = max(float(np.abs(r.trajectory.extras["u2dot_sat"]).max()) for r in (tv, const))
    ok = (r_tv is not None and r_tv <= 1.2 and r_c is not None and 2.0 <= r_c <= 4.0
          and sat <= S)
    return ok, f"time-varying reach={_fmt(r_tv)}; constant reach={_fmt(r_c)}; max|sat|={sat:.6g} (S={S:g})"


def check_input_boundedness():
    names = ["s71_vanishing", "s72_nonvanishing", "s73_saturated", "s73_constant"]
    worst = -math.inf
    finite = True
    for name in names:
        run = scenario_run(name, record_every=1 if name.startswith("s73") else None)
        omega = run.scenario.params.omega
        cap = math.sqrt(omega) * CLIP_GAIN_CAP
        u1 = np.abs(run.trajectory.column("u1"))
        worst = max(worst, float(u1.max() - cap) / cap)
        finite &= bool(np.all(np.isfinite(run.trajectory.column("u2"))))
    ok = worst <= 4 * np.finfo(float).eps and finite
    return ok, f"max relative excess of |u1| over sqrt(omega)/0.09: {worst:.3g}; u2 finite={finite}"


def quadratic_envelope_slack(k: float = 1.0, warp: TimeWarp = TimeWarp(0.0, 1.0, 0.0),
                             d0: float = 2.0, n: int = 200):
    """Exponent ratio and exact-sample check of the envelope on ``-|x|^2 / 2`` with no drift.

    Exact constants for that field are a1 = a2 = 1/2 and b1 = b2 = 1, so the
    envelope rate k c1^2 / 4 equals k/2, the exact gradient-flow rate.  The
    returned ratio (exact rate over envelope rate) must be at least one.
    """
    field = fields.builtin("quadratic-demo")
    consts = BoundConstants(0.5, 0.5, 1.0, 1.0)
    c1, _ = fields.comparison_constants(consts, 1)
    envelope_rate = 0.25 * k * c1 * c1
    exact_rate = 0.5 * k
    t = np.linspace(warp.t0, timewarp.stop_time(warp), n)
    s = t - warp.t0
    dist = d0 * np.exp(-exact_rate * s / (1.0 - s / warp.T))
    traj_states = np.column_stack((dist, np.zeros_like(dist)))
    traj = Trajectory("averaged", t, traj_states, ("x1", "x2"))
    check = analysis.check_envelope_bound(traj, field, 0.0, warp, k, consts, rtol=1e-12)
    return exact_rate / envelope_rate, check.passed


def check_averaged_envelope():
    run = scenario_run("s71_averaged")
    env = run.envelope
    ratio, exact_ok = quadratic_envelope_slack()
    ok = env is not None and env.passed and ratio >= 1.0 and exact_ok
    if env is None:
        return False, "averaged run produced no envelope check"
    return ok, (f"s71 averaged: pass={env.passed} samples={len(env.distance)} "
                f"underflowed={env.samples_underflowed}; quadratic exponent ratio {ratio:.6g}, "
                f"exact samples pass={exact_ok}")


LYAPUNOV_STARTS = {"quadratic-demo": (2.0, 2.0), "cosine-quadratic": (-2.0, -2.0),
                   "cosine-quartic": (1.0, -1.0)}


def lyapunov_increase(kind: str, k: float = 1.0, horizon: float = 10.0, h: float = 1e-3) -> float:
    """Largest per-step increase of V along a drift-free averaged run in dilated time."""
    field = fields.builtin(kind)
    warp = TimeWarp(0.0, 1.0, 0.0)
    system = dynamics.averaged_system(k, warp, field, None, "tau")
    traj = integrate(system, list(LYAPUNOV_STARTS[kind]), SimConfig(0.0, horizon, h))
    V = analysis.lyapunov_series(traj, field)
    return float(np.max(np.diff(V)))


def check_lyapunov():
    worst = {kind: lyapunov_increase(kind) for kind in LYAPUNOV_STARTS}
    ok = all(v <= 1e-9 for v in worst.values())
    return ok, "max dV per step: " + ", ".join(f"{k} {v:.3g}" for k, v in worst.items())


BLOWUP_TAU_STARS = (0.5, 1.0, 2.0)


# Quartic-type test constants.  Grid estimates for the built-in quartic field
# are resolution dependent (it is locally quadratic at the source), so the
# algebra is exercised on fixed, well-conditioned values instead.
BLOWUP_CONSTANTS = BoundConstants(a1=2.0, a2=0.5, b1=1.0, b2=3.0)


def blowup_residuals(k: float = 1.0, warp: TimeWarp = TimeWarp(0.0, 1.0, 0.0),
                     consts: BoundConstants = BLOWUP_CONSTANTS):
    E_norm = 2.0 * max(analysis.blowup_E_threshold(ts, k, 2, warp, consts) for ts in BLOWUP_TAU_STARS)
    out = []
    for ts in BLOWUP_TAU_STARS:
        V0 = analysis.critical_V0(ts, k, 2, E_norm, warp, consts)
        g = analysis.blowup_coefficients(V0, k, 2, E_norm, warp, consts)
        scale = abs(g.gamma2) * ts * ts + abs(g.gamma1) * ts + abs(g.gamma0)
        out.append(abs(g.denominator(ts)) / scale)
    return E_norm, out


def check_blowup():
    E_norm, res = blowup_residuals()
    ok = all(r < 1e-9 for r in res)
    return ok, f"|E|={E_norm:.4g}; relative residuals " + ", ".join(f"{r:.2g}" for r in res)


SWEEP_OMEGAS = (10.0, 20.0, 30.0, 40.0)
SWEEP_MUS = (4e-3, 2e-3, 1e-3)


def check_sweep():
    res = analysis.sweep_practical_convergence(load_scenario("s71_driftfree"), SWEEP_OMEGAS, SWEEP_MUS)
    ok = res.monotone_rows() and not res.diverged.any()
    findings = res.banded_findings()
    return ok, ("row best " + ", ".join(f"{b:.4f}" for b in res.row_best)
                + (f"; findings: {'; '.join(findings)}" if findings else ""))


ORDER_STEPS = (1e-3, 5e-4, 2.5e-4)


def check_integrator_order():
    ratios = [scalar_demo_error(h) / scalar_demo_error(h / 2) for h in ORDER_STEPS]
    ok = all(12.0 <= r <= 20.0 for r in ratios)
    return ok, "error ratios " + ", ".join(f"{r:.3f}" for r in ratios)


CRITERIA = (
    Criterion(1, "timewarp-exactness", 1.0, check_timewarp_exactness),
    Criterion(2, "s71-vanishing", 60.0, check_s71),
    Criterion(3, "s72-nonvanishing", 90.0, check_s72),
    Criterion(4, "s73-saturated", 60.0, check_s73),
    Criterion(5, "input-boundedness", 60.0, check_input_boundedness),
    Criterion(6, "averaged-envelope", 5.0, check_averaged_envelope),
    Criterion(7, "lyapunov-monotonicity", 5.0, check_lyapunov),
    Criterion(8, "blowup-algebra", 1.0, check_blowup),
    Criterion(9, "practical-sweep", 600.0, check_sweep),
    Criterion(10, "integrator-order", 1.0, check_integrator_order),
)


def select(filter_text: str | None = None) -> list[Criterion]:
    if not filter_text:
        return list(CRITERIA)
    if filter_text.strip().isdigit():
        return [c for c in CRITERIA if c.number == int(filter_text)]
    return [c for c in CRITERIA if filter_text in c.name]


def run_criterion(c: Criterion) -> tuple[CriterionResult, float]:
    start = time.perf_counter()
    try:
        passed, detail = c.check()
    except Exception as exc:  # a crash is a failed criterion, reported in the table
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(c.number, c.name, bool(passed), detail), time.perf_counter() - start


def format_line(r: CriterionResult, seconds: float | None = None) -> str:
    status = "PASS" if r.passed else "FAIL"
    timing = f" [{seconds:.2f}s]" if seconds is not None else ""
    return f"{r.number:>2} {r.name:<22} {status}{timing}  {r.detail}"


def run_all(filter_text: str | None = None, timings: bool = False, stream=None):
    """Run the selected criteria, printing a line each; returns the results."""
    results = []
    for c in select(filter_text):
        r, secs = run_criterion(c)
        results.append(r)
        if stream is not None:
            print(format_line(r, secs if timings else None), file=stream, flush=True)
    return results
