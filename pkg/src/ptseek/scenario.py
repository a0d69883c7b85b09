"""Scenario files: INI text with one section per concern, and the runner that executes them.

Example::

    [scenario]
    name = s71_vanishing
    variant = pt

    [field]
    kind = cosine-quadratic

    [drift]
    kind = gradient-vanishing
    E = -1, 0, 0, -1

    [params]
    omega = 30
    k = 1.8
    mu = 0.001

    [warp]
    t0 = 0
    T = 1
    clip_floor = 0.3

    [initial]
    x = -2, -2

The full key list lives in ``docs/scenario-format.md``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, dynamics, fields, timewarp
from .drift import DriftModel, spectral_norm
from .dynamics import SeekerParams
from .fields import BoundConstants, ScalarField
from .sim import DivergenceError, NonFiniteStateError, SimConfig, Trajectory, integrate
from .timewarp import TimeWarp

VARIANTS = ("pt", "asymptotic", "saturated-pt", "saturated-const", "averaged-tau", "averaged-t",
            "scalar-demo")
SEEKER_VARIANTS = ("pt", "asymptotic", "saturated-pt", "saturated-const")

_REQUIRED_PARAMS = {
    "pt": ("omega", "k", "mu"),
    "asymptotic": ("omega", "k", "mu"),
    "saturated-pt": ("omega", "k", "mu", "epsilon", "S"),
    "saturated-const": ("omega", "k", "mu", "epsilon", "S", "k_h"),
    "averaged-tau": ("k",),
    "averaged-t": ("k",),
    "scalar-demo": ("k",),
}

_SCHEMA = {
    "scenario": ("name", "variant"),
    "field": ("kind", "source", "kappa", "validity_radius", "terms", "a1", "a2", "b1", "b2"),
    "drift": ("kind", "E", "bound_d"),
    "params": ("omega", "k", "mu", "epsilon", "S", "k_h"),
    "warp": ("t0", "T", "clip_floor"),
    "initial": ("x", "theta", "z", "u2"),
    "sim": ("t_end", "h", "record_every", "terminal_margin", "mesh"),
    "analysis": ("eps_x", "eps_y", "expect_peak_by", "check_envelope"),
}


class ScenarioError(ValueError):
    """Scenario text could not be parsed or is inconsistent."""


@dataclass(frozen=True)
class Scenario:
    name: str
    variant: str
    field: ScalarField
    drift: DriftModel
    k: float
    warp: TimeWarp
    x0: tuple[float, ...]
    params: SeekerParams | None = None
    theta0: float = 0.0
    z0: float | None = None
    u20: float = 0.0
    t_end: float | None = None
    h: float | None = None
    record_every: int = 1
    terminal_margin: float = timewarp.DEFAULT_TERMINAL_MARGIN
    mesh: str | None = None
    eps_x: float = 0.3
    eps_y: float = 0.1
    expect_peak_by: float | None = None
    check_envelope: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ScenarioError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.variant in SEEKER_VARIANTS and self.params is None:
            raise ScenarioError(f"variant {self.variant} needs omega, k and mu")
        if self.params is not None and self.params.k != self.k:
            raise ScenarioError("params.k disagrees with scenario k")
        if self.variant.startswith("saturated") and self.drift.kind != "none":
            raise ScenarioError("saturated seekers are drift-free")
        want = 1 if self.variant == "scalar-demo" else 2
        if len(self.x0) != want:
            raise ScenarioError(f"initial.x needs {want} value(s) for variant {self.variant}")
        if self.check_envelope and self.variant != "averaged-t":
            raise ScenarioError("check_envelope applies to averaged-t runs only")


# Parsing

def _floats(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ScenarioError(f"{key}: expected comma-separated numbers, got {text!r}") from None


def _float(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ScenarioError(f"{sec.name}.{key}: expected a number, got {sec[key]!r}") from None


def _bool(sec, key, default=False):
    if key not in sec:
        return default
    v = sec[key].strip().lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ScenarioError(f"{sec.name}.{key}: expected true/false, got {sec[key]!r}")


def _parse_terms(text: str) -> tuple[tuple[int, int, float], ...]:
    terms = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ScenarioError(f"field.terms: expected 'i j coeff' triples, got {chunk!r}")
        try:
            terms.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError:
            raise ScenarioError(f"field.terms: bad triple {chunk!r}") from None
    return tuple(terms)


def _parse_field(sec) -> ScalarField:
    kind = sec.get("kind", "").strip()
    source = _floats(sec.get("source", "0, 0"), "field.source")
    if len(source) != 2:
        raise ScenarioError("field.source needs two coordinates")
    if kind == "custom-polynomial":
        if "terms" not in sec:
            raise ScenarioError("custom-polynomial field needs field.terms")
        radius = _float(sec, "validity_radius", math.inf)
        f = fields.custom_polynomial(_parse_terms(sec["terms"]), source,
                                     int(_float(sec, "kappa", 1)), radius)
    else:
        f = fields.builtin(kind, source)
        if "kappa" in sec:
            f = replace(f, kappa=int(_float(sec, "kappa")))
        if "validity_radius" in sec:
            f = replace(f, validity_radius=_float(sec, "validity_radius"))
    consts = [_float(sec, k) for k in ("a1", "a2", "b1", "b2")]
    if any(c is not None for c in consts):
        if any(c is None for c in consts):
            raise ScenarioError("field bound constants need all of a1, a2, b1, b2")
        f = replace(f, bound_constants=BoundConstants(*consts))
    return f


def _parse_drift(sec) -> DriftModel:
    kind = sec.get("kind", "none").strip()
    E = ((0.0, 0.0), (0.0, 0.0))
    if "E" in sec:
        vals = _floats(sec["E"], "drift.E")
        if len(vals) != 4:
            raise ScenarioError("drift.E needs four entries (row-major)")
        E = (vals[:2], vals[2:])
    elif kind == "gradient-vanishing":
        raise ScenarioError("gradient-vanishing drift needs drift.E")
    return DriftModel(kind, E, _float(sec, "bound_d"))


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from None
    for name in cp.sections():
        if name not in _SCHEMA:
            raise ScenarioError(f"unknown section [{name}]")
        for key in cp[name]:
            if key not in _SCHEMA[name]:
                raise ScenarioError(f"unknown key {name}.{key}")
    for required in ("scenario", "field", "params", "initial"):
        if required not in cp:
            raise ScenarioError(f"missing section [{required}]")

    empty = configparser.SectionProxy(cp, "DEFAULT")
    sec = {name: cp[name] if name in cp else empty for name in _SCHEMA}
    name = sec["scenario"].get("name", "").strip()
    variant = sec["scenario"].get("variant", "").strip()
    if not name:
        raise ScenarioError("scenario.name is required")
    if variant not in VARIANTS:
        raise ScenarioError(f"scenario.variant must be one of {', '.join(VARIANTS)}")

    try:
        field = _parse_field(sec["field"])
        drift = _parse_drift(sec["drift"])
        p = sec["params"]
        missing = [k for k in _REQUIRED_PARAMS[variant] if k not in p]
        if missing:
            raise ScenarioError(f"variant {variant} needs params {', '.join(missing)}")
        k = _float(p, "k")
        params = None
        if variant in SEEKER_VARIANTS:
            params = SeekerParams(_float(p, "omega"), k, _float(p, "mu"), _float(p, "epsilon"),
                                  _float(p, "S"), _float(p, "k_h"))
        w = sec["warp"]
        warp = TimeWarp(_float(w, "t0", 0.0), _float(w, "T", 1.0),
                        _float(w, "clip_floor", timewarp.DEFAULT_CLIP_FLOOR))
        ini = sec["initial"]
        if "x" not in ini:
            raise ScenarioError("initial.x is required")
        s = sec["sim"]
        rec = _float(s, "record_every", 1)
        if rec != int(rec):
            raise ScenarioError("sim.record_every must be an integer")
        a = sec["analysis"]
        return Scenario(
            name=name, variant=variant, field=field, drift=drift, k=k, warp=warp,
            x0=_floats(ini["x"], "initial.x"), params=params,
            theta0=_float(ini, "theta", 0.0), z0=_float(ini, "z"), u20=_float(ini, "u2", 0.0),
            t_end=_float(s, "t_end"), h=_float(s, "h"), record_every=int(rec),
            terminal_margin=_float(s, "terminal_margin", timewarp.DEFAULT_TERMINAL_MARGIN),
            mesh=s.get("mesh"), eps_x=_float(a, "eps_x", 0.3), eps_y=_float(a, "eps_y", 0.1),
            expect_peak_by=_float(a, "expect_peak_by"),
            check_envelope=_bool(a, "check_envelope"),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None


def _num(v: float) -> str:
    return repr(float(v))


def serialize_scenario(s: Scenario) -> str:
    out = ["[scenario]", f"name = {s.name}", f"variant = {s.variant}", "", "[field]",
           f"kind = {s.field.kind}", f"source = {_num(s.field.source[0])}, {_num(s.field.source[1])}",
           f"kappa = {s.field.kappa}"]
    if math.isfinite(s.field.validity_radius):
        out.append(f"validity_radius = {_num(s.field.validity_radius)}")
    if s.field.terms:
        out.append("terms = " + "; ".join(f"{i} {j} {_num(c)}" for i, j, c in s.field.terms))
    if s.field.bound_constants is not None:
        out += [f"{k} = {_num(v)}" for k, v in s.field.bound_constants._asdict().items()]
    out += ["", "[drift]", f"kind = {s.drift.kind}"]
    if s.drift.kind == "gradient-vanishing" or any(v for row in s.drift.E for v in row):
        out.append("E = " + ", ".join(_num(v) for row in s.drift.E for v in row))
    if s.drift.bound_d is not None:
        out.append(f"bound_d = {_num(s.drift.bound_d)}")
    out += ["", "[params]", f"k = {_num(s.k)}"]
    if s.params is not None:
        for key in ("omega", "mu", "epsilon", "S", "k_h"):
            v = getattr(s.params, key)
            if v is not None:
                out.append(f"{key} = {_num(v)}")
    out += ["", "[warp]", f"t0 = {_num(s.warp.t0)}", f"T = {_num(s.warp.T)}",
            f"clip_floor = {_num(s.warp.clip_floor)}", "", "[initial]",
            "x = " + ", ".join(_num(v) for v in s.x0), f"theta = {_num(s.theta0)}"]
    if s.z0 is not None:
        out.append(f"z = {_num(s.z0)}")
    if s.variant.startswith("saturated"):
        out.append(f"u2 = {_num(s.u20)}")
    out += ["", "[sim]", f"record_every = {s.record_every}",
            f"terminal_margin = {_num(s.terminal_margin)}"]
    if s.t_end is not None:
        out.append(f"t_end = {_num(s.t_end)}")
    if s.h is not None:
        out.append(f"h = {_num(s.h)}")
    if s.mesh is not None:
        out.append(f"mesh = {s.mesh}")
    out += ["", "[analysis]", f"eps_x = {_num(s.eps_x)}", f"eps_y = {_num(s.eps_y)}"]
    if s.expect_peak_by is not None:
        out.append(f"expect_peak_by = {_num(s.expect_peak_by)}")
    if s.check_envelope:
        out.append("check_envelope = true")
    return "\n".join(out) + "\n"


def bundled_names() -> list[str]:
    root = resources.files("ptseek") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_scenario(ref) -> Scenario:
    """Load from a path, or from a bundled scenario name such as ``s71_vanishing``."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_text())
    stem = path.name[:-4] if path.name.endswith(".ini") else path.name
    bundled = resources.files("ptseek") / "scenarios" / f"{stem}.ini"
    if bundled.is_file():
        return parse_scenario(bundled.read_text())
    raise ScenarioError(f"no scenario file or bundled scenario named {ref!r}")


# Running

def build_system(s: Scenario):
    if s.variant == "pt":
        return dynamics.pt_seeker_system(s.params, s.warp, s.field, s.drift)
    if s.variant == "asymptotic":
        return dynamics.asymptotic_seeker_system(s.params, s.field, s.drift)
    if s.variant == "saturated-pt":
        return dynamics.saturated_seeker_system(s.params, s.warp, s.field)
    if s.variant == "saturated-const":
        return dynamics.saturated_seeker_system(s.params, s.params.k_h, s.field)
    if s.variant == "averaged-tau":
        return dynamics.averaged_system(s.k, s.warp, s.field, s.drift, "tau")
    if s.variant == "averaged-t":
        return dynamics.averaged_system(s.k, s.warp, s.field, s.drift, "t")
    return dynamics.scalar_demo_system(s.k, s.warp)


def _peak_gain(s: Scenario) -> float:
    if s.variant == "asymptotic":
        return 1.0
    if s.variant == "saturated-const":
        return s.params.k_h
    return timewarp.peak_gain(s.warp, s.terminal_margin)


def sim_config(s: Scenario) -> SimConfig:
    w = s.warp
    stop = timewarp.stop_time(w, s.terminal_margin)
    if s.variant in SEEKER_VARIANTS:
        t_end = s.t_end if s.t_end is not None else w.t_end
        if s.variant in ("pt", "saturated-pt") and not w.clipped:
            t_end = min(t_end, stop)
        G = _peak_gain(s)
        h = s.h
        if h is None:
            h = min(2.0 * math.pi / (50.0 * s.params.omega * G), s.params.mu / 20.0)
        return SimConfig(w.t0, t_end, h, s.record_every, s.terminal_margin,
                         omega=s.params.omega, max_gain=G)
    if s.variant == "averaged-tau":
        t_end = s.t_end if s.t_end is not None else w.t0 + 10.0 * w.T
        return SimConfig(w.t0, t_end, s.h or 1e-3, s.record_every, s.terminal_margin)
    # averaged-t and scalar-demo live on the PT horizon
    t_end = min(s.t_end, stop) if s.t_end is not None else stop
    mesh = s.mesh or ("uniform" if w.clipped else "dilated")
    default_h = 0.05 if mesh == "dilated" else 1e-4
    return SimConfig(w.t0, t_end, s.h or default_h, s.record_every, s.terminal_margin,
                     mesh=mesh, warp=w)


def initial_vector(s: Scenario) -> np.ndarray:
    if s.variant in SEEKER_VARIANTS:
        st = dynamics.initial_state(s.field, s.x0, s.theta0, s.z0,
                                    saturated=s.variant.startswith("saturated"), u20=s.u20)
        return st.as_array()
    return np.array(s.x0, dtype=float)


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    report: analysis.ConvergenceReport | None
    failures: tuple[str, ...] = ()
    envelope: analysis.EnvelopeCheck | None = None

    @property
    def diverged(self) -> bool:
        return self.trajectory.status != "ok"


def run_scenario(s: Scenario) -> RunResult:
    """Integrate the scenario, summarize it and evaluate its declared checks.

    Divergence does not raise: the partial trajectory comes back flagged.
    """
    system = build_system(s)
    cfg = sim_config(s)
    try:
        traj = integrate(system, initial_vector(s), cfg)
    except (DivergenceError, NonFiniteStateError) as exc:
        traj = exc.trajectory

    report = None
    failures = []
    envelope = None
    if s.variant != "scalar-demo":
        report = analysis.summarize(traj, s.field, s.eps_x, s.eps_y)
        if s.expect_peak_by is not None:
            reach = report.peak_field_reach_time
            if reach is None or reach > s.expect_peak_by:
                failures.append(f"peak - eps_y not reached by t={s.expect_peak_by:g} "
                                f"(reached at {reach})")
    if s.check_envelope and traj.status == "ok":
        field = s.field
        if field.bound_constants is None:
            field = fields.with_estimated_constants(field)
        envelope = analysis.check_envelope_bound(traj, field, spectral_norm(s.drift.E), s.warp, s.k)
        if not envelope.passed:
            failures.append(f"envelope bound violated (min slack {envelope.min_slack:.3g})")
    return RunResult(s, traj, report, tuple(failures), envelope)
