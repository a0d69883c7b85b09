"""Trajectory metrics and numerical checks of the convergence analysis.

Everything here works on recorded trajectories or on closed-form expressions;
nothing proves anything, it measures.  Checks that need the polynomial bound
constants use grid estimates, so their verdicts hold "with estimated
constants" only.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .dynamics import System
from .fields import BoundConstants, ScalarField, comparison_constants, estimate_bound_constants, field_callables
from .drift import spectral_norm
from .sim import SimConfig, Trajectory, integrate
from .timewarp import TimeWarp


@dataclass(frozen=True)
class ConvergenceReport:
    final_distance: float
    time_to_neighborhood: float | None
    peak_field_reach_time: float | None
    diverged: bool
    max_input_norms: tuple[float, float] | None
    eps_x: float
    eps_y: float
    t_start: float
    t_end: float

    def rows(self) -> list[tuple[str, object]]:
        u1, u2 = self.max_input_norms if self.max_input_norms else (None, None)
        return [
            ("t_start", self.t_start),
            ("t_end", self.t_end),
            ("final_distance", self.final_distance),
            ("eps_x", self.eps_x),
            ("time_to_neighborhood", self.time_to_neighborhood),
            ("eps_y", self.eps_y),
            ("peak_field_reach_time", self.peak_field_reach_time),
            ("diverged", self.diverged),
            ("max_abs_u1", u1),
            ("max_abs_u2", u2),
        ]


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def report_text(report: ConvergenceReport, header: list[tuple[str, object]] = ()) -> str:
    lines = [f"{k} = {_fmt(v)}" for k, v in [*header, *report.rows()]]
    return "\n".join(lines) + "\n"


def report_csv(report: ConvergenceReport) -> str:
    rows = report.rows()
    return ",".join(k for k, _ in rows) + "\n" + ",".join(_fmt(v) for _, v in rows) + "\n"


def summarize(traj: Trajectory, field: ScalarField, eps_x: float, eps_y: float) -> ConvergenceReport:
    """Fill a :class:`ConvergenceReport` from the recorded samples."""
    t = traj.times
    dist = np.hypot(traj.positions[:, 0] - field.source[0], traj.positions[:, 1] - field.source[1])
    if traj.field_values is not None:
        y = traj.field_values
    else:
        value, _ = field_callables(field)
        y = np.array([value(a, b) for a, b in traj.positions])

    outside = np.flatnonzero(dist > eps_x)
    if len(outside) == 0:
        t_nbhd = float(t[0])
    elif outside[-1] == len(t) - 1:
        t_nbhd = None
    else:
        t_nbhd = float(t[outside[-1] + 1])

    reached = np.flatnonzero(y >= field.peak - eps_y)
    t_peak = float(t[reached[0]]) if len(reached) else None

    norms = None
    if traj.inputs is not None:
        norms = (float(np.abs(traj.inputs[:, 0]).max()), float(np.abs(traj.inputs[:, 1]).max()))
    return ConvergenceReport(float(dist[-1]), t_nbhd, t_peak, traj.status != "ok", norms,
                             float(eps_x), float(eps_y), float(t[0]), float(t[-1]))


def lyapunov_series(traj: Trajectory, field: ScalarField) -> np.ndarray:
    """``V(xbar) = F(x*) - F(xbar)`` along the recorded positions."""
    value, _ = field_callables(field)
    return np.array([field.peak - value(a, b) for a, b in traj.positions])


def _constants_for(field: ScalarField, constants: BoundConstants | None,
                   region_radius: float | None = None, grid_n: int = 201) -> BoundConstants:
    if constants is not None:
        return constants
    if field.bound_constants is not None:
        return field.bound_constants
    radius = region_radius if region_radius is not None else field.validity_radius
    if not math.isfinite(radius):
        raise ValueError("missing bound constants: field has none and no finite region to estimate on")
    return estimate_bound_constants(field, radius, grid_n)


@dataclass(frozen=True)
class EnvelopeCheck:
    passed: bool
    min_slack: float
    slack: np.ndarray
    bound: np.ndarray
    distance: np.ndarray
    samples_outside_region: int
    decay_rate: float  # exponent rate in (t - t0)/nu, i.e. in dilated time
    samples_underflowed: int = 0


def envelope_bound(times, d0: float, consts: BoundConstants, E_norm: float, warp: TimeWarp,
                   k: float) -> np.ndarray:
    """Distance envelope for kappa = 1 with gradient drift, evaluated in physical time."""
    c1, c2 = comparison_constants(consts, 1)
    s = np.asarray(times, dtype=float) - warp.t0
    with np.errstate(divide="ignore"):
        dilated = s / (1.0 - s / warp.T)
    pre = math.sqrt(consts.a1 / consts.a2) * d0 * math.exp(0.5 * c2 * c2 * E_norm * warp.T)
    return pre * np.exp(-0.25 * k * c1 * c1 * dilated)


def check_envelope_bound(traj: Trajectory, field: ScalarField, E_norm: float, warp: TimeWarp,
                         k: float, constants: BoundConstants | None = None,
                         rtol: float = 0.0) -> EnvelopeCheck:
    """Test ``|xbar(t) - x*| <= envelope(t)`` at every sample of an averaged frame-t run.

    ``rtol`` widens the envelope multiplicatively; the default demands the
    inequality exactly.  Samples where both the distance and the envelope sit
    below the smallest normal float are not comparable (the state has decayed
    into subnormal numbers and stopped resolving the dynamics); they are
    counted in ``samples_underflowed`` and excluded from the verdict.
    """
    if field.kappa != 1:
        raise ValueError("the distance envelope is stated for kappa = 1 only")
    consts = _constants_for(field, constants)
    if warp.clipped:
        raise ValueError("envelope check expects an unclipped run")
    dist = np.hypot(traj.positions[:, 0] - field.source[0], traj.positions[:, 1] - field.source[1])
    bound = envelope_bound(traj.times, float(dist[0]), consts, E_norm, warp, k)
    slack = bound * (1.0 + rtol) - dist
    c1, _ = comparison_constants(consts, 1)
    outside = int(np.count_nonzero(dist > field.validity_radius))
    tiny = np.finfo(float).tiny
    comparable = (dist >= tiny) | (bound >= tiny)
    return EnvelopeCheck(bool(np.all(slack[comparable] >= 0.0)), float(slack[comparable].min()),
                         slack, bound, dist, outside, 0.25 * k * c1 * c1,
                         int(np.count_nonzero(~comparable)))


@dataclass(frozen=True)
class ConvergenceCondition:
    threshold: float
    c1: float
    c2: float
    E_norm: float
    k: float | None = None

    @property
    def satisfied(self) -> bool | None:
        if self.k is None:
            return None
        return self.k > self.threshold


def convergence_condition_k(field: ScalarField, E, k: float | None = None,
                            constants: BoundConstants | None = None,
                            region_radius: float | None = None) -> ConvergenceCondition:
    """Gain threshold ``2 (c2/c1)^2 |E|`` above which the asymptotic seeker provably converges."""
    if field.kappa != 1:
        raise ValueError("convergence condition is stated for kappa = 1 only")
    consts = _constants_for(field, constants, region_radius)
    c1, c2 = comparison_constants(consts, 1)
    e = spectral_norm(E)
    return ConvergenceCondition(2.0 * (c2 / c1) ** 2 * e, c1, c2, e, k)


@dataclass(frozen=True)
class BlowupCoefficients:
    gamma0: float
    gamma1: float
    gamma2: float
    sigma: float
    c1: float
    c2: float

    def denominator(self, tau):
        return (self.gamma2 * tau + self.gamma1) * tau + self.gamma0


def _sigma(kappa: int) -> float:
    if kappa < 2:
        raise ValueError("blow-up analysis applies to kappa >= 2")
    q = (2 * kappa - 1) / (2 * kappa)
    return 2.0 * q - 1.0


def blowup_coefficients(V0: float, k: float, kappa: int, E_norm: float, warp: TimeWarp,
                        constants: BoundConstants) -> BlowupCoefficients:
    """Coefficients of the quadratic denominator in the comparison bound on V(tau)."""
    sigma = _sigma(kappa)
    c1, c2 = comparison_constants(constants, kappa)
    t0, T = warp.t0, warp.T
    A = sigma * V0**sigma
    g0 = A * t0 * (c2 * c2 * E_norm * T + 0.5 * k * c1 * c1 * (t0 - T)) - t0 + T
    g1 = 1.0 - A * (c2 * c2 * E_norm * T - 0.5 * k * c1 * c1 * (T - 2.0 * t0))
    g2 = A * 0.5 * k * c1 * c1
    return BlowupCoefficients(g0, g1, g2, sigma, c1, c2)


def blowup_E_threshold(tau_star: float, k: float, kappa: int, warp: TimeWarp,
                       constants: BoundConstants) -> float:
    """Drift norm above which a finite critical V0 exists for ``tau_star``."""
    c1, c2 = comparison_constants(constants, kappa)
    return k * c1 * c1 / (2.0 * c2 * c2) * ((tau_star - warp.t0) / warp.T + 1.0)


def critical_V0(tau_star: float, k: float, kappa: int, E_norm: float, warp: TimeWarp,
                constants: BoundConstants) -> float | None:
    """Initial Lyapunov value that zeroes the denominator at ``tau_star``.

    Returns ``None`` when ``E_norm`` is at or below the threshold: no blow-up
    branch exists for that ``tau_star``.
    """
    if not tau_star > warp.t0:
        raise ValueError("tau_star must exceed t0")
    sigma = _sigma(kappa)
    if not E_norm > blowup_E_threshold(tau_star, k, kappa, warp, constants):
        return None
    c1, c2 = comparison_constants(constants, kappa)
    r = (tau_star - warp.t0) / warp.T + 1.0
    base = r / (sigma * (tau_star - warp.t0) * (c2 * c2 * E_norm - 0.5 * k * c1 * c1 * r))
    return base ** (1.0 / sigma)


@dataclass(frozen=True)
class BoundaryLayerDecay:
    times: np.ndarray
    ytilde: np.ndarray
    V: np.ndarray
    max_error: float
    V_nonincreasing: bool


def boundary_layer_decay(y0: float, horizon: float, h: float = 1e-3) -> BoundaryLayerDecay:
    """Integrate the fast filter error ``dy/ds = -y`` and its Lyapunov pair ``y^2/2``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    system = System("scalar", lambda s, y: -y, lambda s, y: (), ("x",))
    traj = integrate(system, [y0], SimConfig(0.0, horizon, h))
    yt = traj.states[:, 0]
    exact = y0 * np.exp(-traj.times)
    V = 0.5 * yt * yt
    return BoundaryLayerDecay(traj.times, yt, V, float(np.max(np.abs(yt - exact))),
                              bool(np.all(np.diff(V) <= 0.0)))


@dataclass(frozen=True)
class SweepResult:
    omegas: tuple[float, ...]
    mus: tuple[float, ...]
    distances: np.ndarray  # (len(omegas), len(mus)); nan where a run diverged
    diverged: np.ndarray
    tolerances: dict = dc_field(default_factory=dict)  # tolerance -> achievable

    @property
    def row_best(self) -> np.ndarray:
        return np.array([np.nanmin(r) if np.any(np.isfinite(r)) else np.inf for r in self.distances])

    @property
    def best(self) -> float:
        return float(np.nanmin(self.distances))

    def monotone_rows(self) -> bool:
        """Best distance per frequency row is non-increasing in frequency."""
        b = self.row_best
        return bool(np.all(np.diff(b) <= 0.0))

    def banded_findings(self) -> list[str]:
        """Rows whose best exceeds the previous row's best by more than one cell.

        A row may beat only the previous row's second-best cell (oscillatory
        residue); anything worse is reported.
        """
        findings = []
        for i in range(1, len(self.omegas)):
            prev = np.sort(self.distances[i - 1][np.isfinite(self.distances[i - 1])])
            if len(prev) == 0:
                continue
            band = prev[min(1, len(prev) - 1)]
            if self.row_best[i] > band:
                findings.append(f"omega={self.omegas[i]:g}: best {self.row_best[i]:.6g} "
                                f"exceeds previous row band {band:.6g}")
        return findings

    def to_long_csv(self) -> str:
        lines = ["omega,mu,final_distance,diverged"]
        for i, w in enumerate(self.omegas):
            for j, m in enumerate(self.mus):
                lines.append(f"{w:.17g},{m:.17g},{self.distances[i, j]:.17g},"
                             f"{'true' if self.diverged[i, j] else 'false'}")
        return "\n".join(lines) + "\n"

    def to_matrix_csv(self) -> str:
        lines = ["omega\\mu," + ",".join(f"{m:.17g}" for m in self.mus)]
        for i, w in enumerate(self.omegas):
            lines.append(f"{w:.17g}," + ",".join(f"{d:.17g}" for d in self.distances[i]))
        return "\n".join(lines) + "\n"


def worker_count(cells: int) -> int:
    cap = os.environ.get("PTSEEK_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, cells))


def _sweep_cell(scenario) -> tuple[float, bool]:
    from .scenario import run_scenario

    result = run_scenario(scenario)
    return result.report.final_distance, result.report.diverged


def sweep_practical_convergence(base, omega_list, mu_list, tolerances=(), workers: int | None = None
                                ) -> SweepResult:
    """Final distance over an (omega, mu) grid built from ``base``.

    ``omega_list`` must ascend and ``mu_list`` descend, mirroring the "large
    enough frequency, then small enough filter constant" order of the
    practical-stability property.  Each cell recomputes its step size.
    Diverged cells record ``nan`` and are flagged, never raised.
    """
    omegas = tuple(float(w) for w in omega_list)
    mus = tuple(float(m) for m in mu_list)
    if not omegas or not mus:
        raise ValueError("empty sweep grid")
    if list(omegas) != sorted(omegas) or list(mus) != sorted(mus, reverse=True):
        raise ValueError("omega_list must ascend and mu_list must descend")
    if base.params is None:
        raise ValueError("sweep needs a seeker scenario with omega and mu")

    cells = [replace(base, name=f"{base.name}_w{w:g}_mu{m:g}", h=None,
                     params=replace(base.params, omega=w, mu=m))
             for w in omegas for m in mus]
    n = worker_count(len(cells)) if workers is None else max(1, int(workers))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            out = list(pool.map(_sweep_cell, cells))
    else:
        out = [_sweep_cell(c) for c in cells]

    dist = np.array([d for d, _ in out]).reshape(len(omegas), len(mus))
    div = np.array([v for _, v in out]).reshape(len(omegas), len(mus))
    dist = np.where(div, np.nan, dist)
    finite = dist[np.isfinite(dist)]
    best = float(finite.min()) if finite.size else math.inf
    achievable = {float(tol): bool(best <= tol) for tol in tolerances}
    return SweepResult(omegas, mus, dist, div, achievable)
