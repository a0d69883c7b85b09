"""Fixed-step RK4 integration and trajectory recording/export."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import timewarp
from .dynamics import SeekerParams, SeekerState, System
from .timewarp import TimeWarp

DIVERGENCE_THRESHOLD = 1e9

CSV_COLUMNS = {
    "seeker": ("t", "x1", "x2", "theta", "z", "u1", "u2", "y"),
    "saturated": ("t", "x1", "x2", "theta", "z", "u1", "u2", "y", "u2dot_sat"),
    "averaged": ("t", "x1", "x2", "y"),
    "scalar": ("t", "x"),
}


class SimulationError(RuntimeError):
    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


class DivergenceError(SimulationError):
    """A state component crossed the divergence threshold; ``escape_time`` says when."""

    def __init__(self, message, trajectory, escape_time):
        super().__init__(message, trajectory)
        self.escape_time = escape_time


class NonFiniteStateError(SimulationError):
    def __init__(self, message, trajectory, last_finite_time):
        super().__init__(message, trajectory)
        self.last_finite_time = last_finite_time


class TrajectoryFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    t_start: float
    t_end: float
    h: float
    record_every: int = 1
    terminal_margin: float = timewarp.DEFAULT_TERMINAL_MARGIN
    # "dilated" takes steps of size h in dilated time (needs warp); the
    # resulting t-mesh is graded towards t0 + T, which keeps the unclipped
    # 1/nu^2 stiffness inside RK4's stability region.
    mesh: str = "uniform"
    warp: TimeWarp | None = None
    omega: float | None = None
    max_gain: float = 1.0

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be a positive integer")
        if not 0.0 <= self.terminal_margin <= 1e-2:
            raise ValueError("terminal_margin must lie in [0, 1e-2]")
        if self.mesh not in ("uniform", "dilated"):
            raise ValueError("mesh must be 'uniform' or 'dilated'")
        if self.mesh == "dilated" and self.warp is None:
            raise ValueError("dilated mesh needs a warp")
        if self.mesh == "uniform" and self.omega is not None:
            limit = 2.0 * math.pi / (20.0 * self.omega * self.max_gain)
            if not self.h < limit:
                raise ValueError(f"step {self.h:g} does not resolve the dither "
                                 f"(need h < {limit:.3g} at gain {self.max_gain:g})")

    def nodes(self) -> np.ndarray:
        """Integration time nodes, first ``t_start``, last exactly ``t_end``."""
        if self.mesh == "uniform":
            span = self.t_end - self.t_start
            n = max(1, math.ceil(span / self.h - 1e-9))
            t = self.t_start + self.h * np.arange(n + 1, dtype=float)
        else:
            w = self.warp
            tau_a, tau_b = timewarp.dilate(w, self.t_start), timewarp.dilate(w, self.t_end)
            n = max(1, math.ceil((tau_b - tau_a) / self.h - 1e-9))
            tau = tau_a + self.h * np.arange(n + 1, dtype=float)
            s = tau - w.t0
            t = w.t0 + s / (1.0 + s / w.T)
        # drop nodes that rounding put at (or past) the end, then pin the end exactly
        tol = 1e-12 * max(1.0, abs(self.t_end))
        t = t[t < self.t_end - tol]
        return np.append(t, self.t_end)


def step_size_for(params: SeekerParams, warp: TimeWarp | None,
                  margin: float = timewarp.DEFAULT_TERMINAL_MARGIN) -> float:
    """Step resolving >= 50 steps per dither period at peak gain and >= 20 per filter constant."""
    G = 1.0 if warp is None else timewarp.peak_gain(warp, margin)
    return min(2.0 * math.pi / (50.0 * params.omega * G), params.mu / 20.0)


def _readonly(a):
    if a is not None:
        a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    kind: str
    times: np.ndarray
    states: np.ndarray
    state_names: tuple[str, ...]
    inputs: np.ndarray | None = None
    field_values: np.ndarray | None = None
    extras: dict = dc_field(default_factory=dict)
    status: str = "ok"
    escape_time: float | None = None

    def __post_init__(self):
        n = len(self.times)
        arrays = [self.states, self.inputs, self.field_values, *self.extras.values()]
        if any(a is not None and len(a) != n for a in arrays):
            raise ValueError("trajectory series have unequal lengths")
        for a in (self.times, *arrays):
            _readonly(a)

    def __len__(self):
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :2]

    def column(self, name: str) -> np.ndarray:
        if name == "t":
            return self.times
        if name in self.state_names:
            return self.states[:, self.state_names.index(name)]
        if name in ("u1", "u2") and self.inputs is not None:
            return self.inputs[:, 0 if name == "u1" else 1]
        if name == "y" and self.field_values is not None:
            return self.field_values
        if name in self.extras:
            return self.extras[name]
        raise KeyError(name)

    def final_state(self):
        if self.kind in ("seeker", "saturated"):
            return SeekerState.from_array(self.states[-1])
        return self.states[-1].copy()


def _build(system: System, times, states, obs, status="ok", escape_time=None) -> Trajectory:
    times = np.array(times, dtype=float)
    states = np.array(states, dtype=float).reshape(len(times), len(system.state_names))
    obs = np.array(obs, dtype=float).reshape(len(times), -1)
    inputs = field_values = None
    extras = {}
    if system.kind in ("seeker", "saturated"):
        inputs, field_values = obs[:, :2], obs[:, 2]
        extras = {name: obs[:, 3 + i] for i, name in enumerate(system.extra_names)}
    elif system.kind == "averaged":
        field_values = obs[:, 0]
    return Trajectory(system.kind, times, states, system.state_names, inputs,
                      field_values, extras, status, escape_time)


def integrate(system: System, initial, cfg: SimConfig) -> Trajectory:
    """Classical RK4 over ``cfg.nodes()``, recording every ``record_every`` steps and the last.

    Raises :class:`DivergenceError` when any component exceeds the divergence
    threshold and :class:`NonFiniteStateError` on NaN/inf; both carry the
    trajectory recorded so far.
    """
    if isinstance(initial, SeekerState):
        y = initial.as_array()
    else:
        y = np.array(initial, dtype=float).ravel()
    if y.shape != (len(system.state_names),):
        raise ValueError(f"initial state has shape {y.shape}, expected ({len(system.state_names)},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state is not finite")

    nodes = cfg.nodes()
    rhs, observe = system.rhs, system.observe
    every = int(cfg.record_every)
    last = len(nodes) - 1

    rec_t, rec_y, rec_o = [nodes[0]], [y], [observe(nodes[0], y)]
    t = float(nodes[0])
    for i in range(1, last + 1):
        t_next = float(nodes[i])
        h = t_next - t
        half = 0.5 * h
        k1 = rhs(t, y)
        k2 = rhs(t + half, y + half * k1)
        k3 = rhs(t + half, y + half * k2)
        k4 = rhs(t_next, y + h * k3)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        peak = np.abs(y_new).max()
        if not peak <= DIVERGENCE_THRESHOLD:
            if not np.all(np.isfinite(y_new)):
                partial = _build(system, rec_t, rec_y, rec_o, "non-finite", None)
                raise NonFiniteStateError(
                    f"state became non-finite after t={t:.9g}", partial, t)
            rec_t.append(t_next)
            rec_y.append(y_new)
            rec_o.append(observe(t_next, y_new))
            partial = _build(system, rec_t, rec_y, rec_o, "diverged", t_next)
            raise DivergenceError(
                f"|state| exceeded {DIVERGENCE_THRESHOLD:g} at t={t_next:.9g}", partial, t_next)

        y, t = y_new, t_next
        if i % every == 0 or i == last:
            rec_t.append(t)
            rec_y.append(y)
            rec_o.append(observe(t, y))

    return _build(system, rec_t, rec_y, rec_o)


def write_csv(traj: Trajectory, path) -> Path:
    """Write the trajectory with 17 significant digits, one row per recorded sample."""
    cols = CSV_COLUMNS[traj.kind]
    data = np.column_stack([traj.column(c) for c in cols])
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return path


def read_csv(path) -> Trajectory:
    path = Path(path)
    try:
        with path.open() as fh:
            header = tuple(fh.readline().strip().split(","))
            rows = [line for line in fh if line.strip()]
    except OSError as exc:
        raise TrajectoryFormatError(f"cannot read {path}: {exc}") from exc
    kind = next((k for k, cols in CSV_COLUMNS.items() if cols == header), None)
    if kind is None:
        raise TrajectoryFormatError(f"{path}: unrecognised header {','.join(header)!r}")
    if not rows:
        raise TrajectoryFormatError(f"{path}: trajectory has no samples")
    try:
        data = np.array([[float(v) for v in line.split(",")] for line in rows])
    except ValueError as exc:
        raise TrajectoryFormatError(f"{path}: {exc}") from exc
    if data.shape[1] != len(header):
        raise TrajectoryFormatError(f"{path}: ragged rows")
    col = {name: data[:, i] for i, name in enumerate(header)}
    if np.any(np.diff(col["t"]) <= 0):
        raise TrajectoryFormatError(f"{path}: times are not strictly increasing")

    if kind == "scalar":
        return Trajectory(kind, col["t"], col["x"][:, None].copy(), ("x",))
    if kind == "averaged":
        return Trajectory(kind, col["t"], np.column_stack((col["x1"], col["x2"])), ("x1", "x2"),
                          field_values=col["y"])
    inputs = np.column_stack((col["u1"], col["u2"]))
    if kind == "seeker":
        states = np.column_stack((col["x1"], col["x2"], col["theta"], col["z"]))
        return Trajectory(kind, col["t"], states, ("x1", "x2", "theta", "z"), inputs, col["y"])
    states = np.column_stack((col["x1"], col["x2"], col["theta"], col["u2"], col["z"]))
    return Trajectory(kind, col["t"], states, ("x1", "x2", "theta", "u2", "z"), inputs, col["y"],
                      {"u2dot_sat": col["u2dot_sat"]})
