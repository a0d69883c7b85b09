"""Prescribed-time source seeking: seekers, averaged models, simulation and checks."""

from .drift import DriftModel, gradient_drift, no_drift, periodic_drift
from .dynamics import SeekerParams, SeekerState
from .fields import ScalarField, builtin
from .scenario import Scenario, load_scenario, parse_scenario, run_scenario, serialize_scenario
from .sim import SimConfig, Trajectory, integrate, read_csv, write_csv
from .timewarp import TimeWarp

__version__ = "0.1.0"

__all__ = [
    "DriftModel", "gradient_drift", "no_drift", "periodic_drift",
    "SeekerParams", "SeekerState", "ScalarField", "builtin",
    "Scenario", "load_scenario", "parse_scenario", "run_scenario", "serialize_scenario",
    "SimConfig", "Trajectory", "integrate", "read_csv", "write_csv", "TimeWarp",
]
