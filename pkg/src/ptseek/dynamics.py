"""Closed-loop vector fields for the seekers, the averaged models and the scalar demo.

Each model comes in two forms.  The ``*_rhs`` functions evaluate one
derivative from full descriptions and are meant for checks and tests.  The
``*_system`` builders bind the same formulas into a :class:`System` whose
``rhs(t, y)`` closure is what the integrator calls thousands of times.

State vector layouts:

* seeker (PT and asymptotic): ``[x1, x2, theta, z]``
* saturated seeker:           ``[x1, x2, theta, u2, z]``
* averaged models:            ``[x1, x2]``
* scalar demo:                ``[x]``
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import timewarp
from .drift import DriftModel, drift_callable, no_drift
from .fields import ScalarField, field_callables
from .timewarp import TimeWarp


@dataclass(frozen=True)
class SeekerParams:
    omega: float
    k: float
    mu: float
    epsilon: float | None = None
    S: float | None = None
    k_h: float | None = None

    def __post_init__(self):
        for name in ("omega", "k", "mu"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("epsilon", "S", "k_h"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive when given")
        if self.epsilon is not None and self.epsilon >= self.mu:
            warnings.warn(f"epsilon={self.epsilon} is not small relative to mu={self.mu}; "
                          "the acceleration loop may not track the angular velocity law",
                          stacklevel=3)


@dataclass(frozen=True)
class SeekerState:
    x: tuple[float, float]
    theta: float = 0.0
    z: float = 0.0
    u2: float | None = None

    def as_array(self) -> np.ndarray:
        if self.u2 is None:
            return np.array([self.x[0], self.x[1], self.theta, self.z], dtype=float)
        return np.array([self.x[0], self.x[1], self.theta, self.u2, self.z], dtype=float)

    @classmethod
    def from_array(cls, y) -> "SeekerState":
        y = [float(v) for v in y]
        if len(y) == 4:
            return cls((y[0], y[1]), y[2], y[3])
        if len(y) == 5:
            return cls((y[0], y[1]), y[2], y[4], y[3])
        raise ValueError(f"seeker state has 4 or 5 components, got {len(y)}")


def initial_state(field: ScalarField, x0, theta0: float = 0.0, z0: float | None = None,
                  saturated: bool = False, u20: float = 0.0) -> SeekerState:
    """Seeker initial condition; the filter starts quasi-steady (z0 = F(x0)) unless given."""
    value, _ = field_callables(field)
    x0 = (float(x0[0]), float(x0[1]))
    z = value(*x0) if z0 is None else float(z0)
    return SeekerState(x0, float(theta0), z, float(u20) if saturated else None)


@dataclass(frozen=True)
class System:
    """A vector field bound for integration, plus what to record along the way.

    ``observe(t, y)`` returns ``(u1, u2, y_field, *extras)`` for seekers,
    ``(y_field,)`` for averaged models and ``()`` for the scalar demo.
    """
    kind: str  # "seeker" | "saturated" | "averaged" | "scalar"
    rhs: Callable[[float, np.ndarray], np.ndarray]
    observe: Callable[[float, np.ndarray], tuple]
    state_names: tuple[str, ...]
    extra_names: tuple[str, ...] = ()


def _pt_gain_of(warp: TimeWarp):
    gain = timewarp.gain

    def gain_of(t):
        return gain(warp, t)
    return gain_of


def _unit_gain(t):
    return 1.0


def _seeker_system(params: SeekerParams, gain_of, field: ScalarField, drift: DriftModel) -> System:
    value, _ = field_callables(field)
    f = drift_callable(drift, field)
    omega, k, mu = params.omega, params.k, params.mu
    sqrt_w = math.sqrt(omega)
    cos, sin = math.cos, math.sin

    def rhs(t, s):
        x1, x2, th, z = s
        g = gain_of(t)
        e = (value(x1, x2) - z) / mu
        f1, f2 = f(t, x1, x2)
        u1 = g * sqrt_w
        return np.array((f1 + u1 * cos(th), f2 + u1 * sin(th), g * (omega - k * e), g * e))

    def observe(t, s):
        x1, x2, th, z = s
        g = gain_of(t)
        y = value(x1, x2)
        return g * sqrt_w, g * (omega - k * ((y - z) / mu)), y

    return System("seeker", rhs, observe, ("x1", "x2", "theta", "z"))


def pt_seeker_system(params: SeekerParams, warp: TimeWarp, field: ScalarField,
                     drift: DriftModel | None = None) -> System:
    return _seeker_system(params, _pt_gain_of(warp), field, drift or no_drift())


def asymptotic_seeker_system(params: SeekerParams, field: ScalarField,
                             drift: DriftModel | None = None) -> System:
    return _seeker_system(params, _unit_gain, field, drift or no_drift())


def pt_seeker_rhs(state, t, params: SeekerParams, warp: TimeWarp, field: ScalarField,
                  drift: DriftModel | None = None) -> np.ndarray:
    """``(dx/dt, dtheta/dt, dz/dt)`` of the prescribed-time seeker."""
    return pt_seeker_system(params, warp, field, drift).rhs(t, _as_vector(state))


def asymptotic_seeker_rhs(state, t, params: SeekerParams, field: ScalarField,
                          drift: DriftModel | None = None) -> np.ndarray:
    """Same loop with the gain frozen at one."""
    return asymptotic_seeker_system(params, field, drift).rhs(t, _as_vector(state))


def saturation(v: float, level: float) -> float:
    return min(level, max(-level, v))


def saturated_seeker_system(params: SeekerParams, gain_source, field: ScalarField) -> System:
    """Seeker whose angular velocity follows a saturated acceleration loop.

    ``gain_source`` is either a :class:`TimeWarp` (clipped PT gain) or a
    positive constant (the constant high-gain comparison).  The recorded extra
    ``u2dot_sat`` is the saturated acceleration command ``sat(.)``, so
    ``du2/dt = u2dot_sat / epsilon``.
    """
    if params.epsilon is None or params.S is None:
        raise ValueError("saturated seeker needs epsilon and S")
    if isinstance(gain_source, TimeWarp):
        gain_of = _pt_gain_of(gain_source)
    else:
        c = float(gain_source)
        if not c > 0:
            raise ValueError("constant gain must be positive")

        def gain_of(t):
            return c

    value, _ = field_callables(field)
    omega, k, mu, eps, S = params.omega, params.k, params.mu, params.epsilon, params.S
    sqrt_w = math.sqrt(omega)
    cos, sin = math.cos, math.sin

    def command(t, s):
        x1, x2, th, u2, z = s
        c = gain_of(t)
        y = value(x1, x2)
        e = (y - z) / mu
        return c, y, e, min(S, max(-S, -u2 + c * (omega - k * e)))

    def rhs(t, s):
        c, _, e, sat = command(t, s)
        th, u2 = s[2], s[3]
        u1 = c * sqrt_w
        return np.array((u1 * cos(th), u1 * sin(th), u2, sat / eps, c * e))

    def observe(t, s):
        c, y, _, sat = command(t, s)
        return c * sqrt_w, s[3], y, sat

    return System("saturated", rhs, observe, ("x1", "x2", "theta", "u2", "z"), ("u2dot_sat",))


def saturated_seeker_rhs(state, t, params: SeekerParams, gain_source, field: ScalarField) -> np.ndarray:
    """``(dx/dt, dtheta/dt, du2/dt, dz/dt)``; drift-free by construction."""
    return saturated_seeker_system(params, gain_source, field).rhs(t, _as_vector(state))


def averaged_system(k: float, warp: TimeWarp | None, field: ScalarField,
                    drift: DriftModel | None = None, frame: str = "t") -> System:
    """Lie-bracket averaged position dynamics: drift plus scaled gradient ascent.

    Frame ``"tau"`` integrates in dilated time, where the drift is attenuated by
    ``dt/dtau`` and the ascent rate is ``k/2``.  The drift's own time argument
    is the physical time ``contract(tau)``.  Frame ``"t"`` multiplies the ascent
    by the (possibly clipped) PT gain.
    """
    if frame not in ("t", "tau"):
        raise ValueError("frame must be 't' or 'tau'")
    drift = drift or no_drift()
    value, grad = field_callables(field)
    f = drift_callable(drift, field)
    half_k = 0.5 * k

    if frame == "t":
        if warp is None:
            raise ValueError("frame 't' needs a time warp")
        gain_of = _pt_gain_of(warp)

        def rhs(t, s):
            x1, x2 = s
            g1, g2 = grad(x1, x2)
            f1, f2 = f(t, x1, x2)
            c = gain_of(t) * half_k
            return np.array((f1 + c * g1, f2 + c * g2))
    elif warp is None:
        def rhs(tau, s):
            x1, x2 = s
            g1, g2 = grad(x1, x2)
            f1, f2 = f(tau, x1, x2)
            return np.array((f1 + half_k * g1, f2 + half_k * g2))
    else:
        t0, T = warp.t0, warp.T

        def rhs(tau, s):
            x1, x2 = s
            g1, g2 = grad(x1, x2)
            r = 1.0 + (tau - t0) / T
            f1, f2 = f(t0 + (tau - t0) / r, x1, x2)
            a = 1.0 / (r * r)
            return np.array((a * f1 + half_k * g1, a * f2 + half_k * g2))

    def observe(t, s):
        return (value(s[0], s[1]),)

    return System("averaged", rhs, observe, ("x1", "x2"))


def averaged_rhs(state, t, k: float, warp: TimeWarp | None, field: ScalarField,
                 drift: DriftModel | None = None, frame: str = "t") -> np.ndarray:
    return averaged_system(k, warp, field, drift, frame).rhs(t, _as_vector(state))


def scalar_demo_system(k: float, warp: TimeWarp) -> System:
    """``dx/dt = -gain(t) k x``; with an unclipped warp it reaches 0 at ``t0 + T``."""
    gain_of = _pt_gain_of(warp)

    def rhs(t, s):
        return np.array((-gain_of(t) * k * s[0],))

    def observe(t, s):
        return ()

    return System("scalar", rhs, observe, ("x",))


def scalar_pt_demo(x0: float, k: float, warp: TimeWarp, t: float) -> float:
    """Closed-form ``x0 exp(-k (t - t0) / nu)`` of the scalar PT example."""
    if t < warp.t0 or t >= warp.t_end:
        raise timewarp.WarpDomainError(f"t={t} outside [{warp.t0}, {warp.t_end})")
    return x0 * math.exp(-k * (t - warp.t0) / timewarp.nu(warp, t))


def scalar_tau_solution(x0: float, k: float, t0: float, tau: float) -> float:
    """The same signal in dilated time: ``x0 exp(-k (tau - t0))``."""
    return x0 * math.exp(-k * (tau - t0))


def conserved_phase(state, k: float) -> float:
    """``p = theta + k z``; advances at ``gain(t) * omega`` along any seeker trajectory."""
    if isinstance(state, SeekerState):
        return state.theta + k * state.z
    y = np.asarray(state, dtype=float)
    z = y[..., 4] if y.shape[-1] == 5 else y[..., 3]
    return y[..., 2] + k * z


def _as_vector(state) -> np.ndarray:
    if isinstance(state, SeekerState):
        return state.as_array()
    return np.asarray(state, dtype=float)
