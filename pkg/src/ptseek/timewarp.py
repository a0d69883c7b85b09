"""Time dilation/contraction between [t0, t0 + T) and [t0, inf), and the PT gain.

The arithmetic is precision-generic: feeding ``numpy.longdouble`` (or
``fractions.Fraction``) values keeps the whole computation in that type, which
matters for roundtrips near the terminal time where float64 runs out of
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_CLIP_FLOOR = 0.3
DEFAULT_TERMINAL_MARGIN = 1e-4


class WarpDomainError(ValueError):
    """Time argument outside the domain of a warp operation."""


@dataclass(frozen=True)
class TimeWarp:
    t0: float = 0.0
    T: float = 1.0
    clip_floor: float = DEFAULT_CLIP_FLOOR  # 0 disables clipping, 1 disables amplification

    def __post_init__(self):
        if self.t0 < 0:
            raise ValueError("t0 must be non-negative")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0.0 <= self.clip_floor <= 1.0:
            raise ValueError("clip_floor must lie in [0, 1]")

    @property
    def t_end(self):
        return self.t0 + self.T

    @property
    def clipped(self) -> bool:
        return self.clip_floor > 0

    @property
    def max_gain(self) -> float:
        if not self.clipped:
            return float("inf")
        return 1.0 / (self.clip_floor * self.clip_floor)


def nu(w: TimeWarp, t):
    """Blow-up function ``1 - (t - t0)/T`` on ``[t0, t0 + T]``."""
    if t < w.t0 or t > w.t_end:
        raise WarpDomainError(f"t={t} outside [{w.t0}, {w.t_end}]")
    if t == w.t0:
        return t * 0 + 1
    if t == w.t_end:
        return t * 0
    return 1 - (t - w.t0) / w.T


def dilate(w: TimeWarp, t):
    """Map ``t`` in ``[t0, t0 + T)`` to dilated time ``tau`` in ``[t0, inf)``."""
    if t < w.t0 or t >= w.t_end:
        raise WarpDomainError(f"dilation undefined at t={t} (domain [{w.t0}, {w.t_end}))")
    return w.t0 + (t - w.t0) / nu(w, t)


def contract(w: TimeWarp, tau):
    """Inverse of :func:`dilate`: map ``tau >= t0`` back into ``[t0, t0 + T)``."""
    if tau < w.t0:
        raise WarpDomainError(f"tau={tau} precedes t0={w.t0}")
    s = tau - w.t0
    return w.t0 + s / (1 + s / w.T)


def dt_dtau(w: TimeWarp, tau):
    s = tau - w.t0
    return 1 / (1 + s / w.T) ** 2


def dtau_dt(w: TimeWarp, t):
    n = nu(w, t)
    if n == 0:
        raise WarpDomainError("dtau/dt is singular at t0 + T")
    return 1 / (n * n)


def gain(w: TimeWarp, t):
    """Time-varying PT gain ``1/nu^2``, capped at ``1/clip_floor^2`` when clipped.

    With clipping the cap also applies past ``t0 + T`` (the clipped blow-up
    function ``max(floor, nu)`` is defined for all ``t >= t0``).
    """
    if t < w.t0:
        raise WarpDomainError(f"t={t} precedes t0={w.t0}")
    if w.clip_floor > 0:
        if t >= w.t_end:
            return w.max_gain
        n = nu(w, t)
        return min(w.max_gain, 1 / (n * n))
    n = nu(w, t)
    if n == 0:
        raise WarpDomainError("unclipped gain is infinite at t0 + T")
    return 1 / (n * n)


def stop_time(w: TimeWarp, margin: float = DEFAULT_TERMINAL_MARGIN) -> float:
    """Latest simulated time for a run: the horizon end, pulled in by ``margin * T`` when unclipped."""
    if w.clipped:
        return w.t_end
    return w.t0 + w.T * (1.0 - margin)


def peak_gain(w: TimeWarp, margin: float = DEFAULT_TERMINAL_MARGIN) -> float:
    """Largest gain a run will see: the cap when clipped, else the gain at the stop time."""
    if w.clipped:
        return w.max_gain
    return 1.0 / (margin * margin)
