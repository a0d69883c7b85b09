"""Drift terms f(t, x) added to the vehicle's position dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .fields import ScalarField, field_callables

DRIFT_KINDS = ("none", "gradient-vanishing", "bounded-nonvanishing")

NONVANISHING_BOUND = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class DriftModel:
    kind: str = "none"
    E: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 0.0), (0.0, 0.0))
    bound_d: float | None = dc_field(default=None)

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}")
        E = tuple(tuple(float(v) for v in row) for row in self.E)
        if len(E) != 2 or any(len(row) != 2 for row in E):
            raise ValueError("E must be a 2x2 matrix")
        object.__setattr__(self, "E", E)
        if self.kind == "bounded-nonvanishing" and self.bound_d is None:
            object.__setattr__(self, "bound_d", NONVANISHING_BOUND)
        if self.bound_d is not None and self.bound_d < 0:
            raise ValueError("bound_d must be non-negative")


def no_drift() -> DriftModel:
    return DriftModel("none")


def gradient_drift(E) -> DriftModel:
    """Vanishing drift ``E grad F(x)``; repulsive when E has unstable directions."""
    E = np.asarray(E, dtype=float).reshape(2, 2)
    return DriftModel("gradient-vanishing", tuple(map(tuple, E.tolist())))


def periodic_drift() -> DriftModel:
    """``(1 + sin 3t) (cos x1, cos x2)``, bounded in norm by ``2 sqrt 2``."""
    return DriftModel("bounded-nonvanishing")


def spectral_norm(E) -> float:
    """Largest singular value of a 2x2 matrix, in closed form."""
    (a, b), (c, d) = np.asarray(E, dtype=float)
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = math.sqrt(max(frob2 * frob2 - 4.0 * det * det, 0.0))
    return math.sqrt(0.5 * (frob2 + disc))


def drift_callable(model: DriftModel, field: ScalarField | None = None
                   ) -> Callable[[float, float, float], tuple[float, float]]:
    """Return ``f(t, x1, x2) -> (f1, f2)`` for the hot loop."""
    if model.kind == "none":
        def zero(t, x1, x2):
            return 0.0, 0.0
        return zero

    if model.kind == "gradient-vanishing":
        if field is None:
            raise ValueError("gradient-vanishing drift needs a field")
        _, grad = field_callables(field)
        (e11, e12), (e21, e22) = model.E

        def grad_drift(t, x1, x2):
            g1, g2 = grad(x1, x2)
            return e11 * g1 + e12 * g2, e21 * g1 + e22 * g2
        return grad_drift

    def periodic(t, x1, x2):
        amp = 1.0 + math.sin(3.0 * t)
        return amp * math.cos(x1), amp * math.cos(x2)
    return periodic


def eval_drift(model: DriftModel, field: ScalarField | None, t: float, x) -> np.ndarray:
    f = drift_callable(model, field)
    return np.array(f(float(t), float(x[0]), float(x[1])), dtype=float)


def linearize_drift_at_source(model: DriftModel, field: ScalarField, step: float = 1e-6
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobian of ``E grad F`` at the source and its eigenvalues."""
    if model.kind != "gradient-vanishing":
        raise ValueError("linearization is defined for gradient-vanishing drift only")
    f = drift_callable(model, field)
    s1, s2 = field.source
    jac = np.empty((2, 2))
    for col, (d1, d2) in enumerate(((step, 0.0), (0.0, step))):
        hi = f(0.0, s1 + d1, s2 + d2)
        lo = f(0.0, s1 - d1, s2 - d2)
        jac[:, col] = [(hi[0] - lo[0]) / (2 * step), (hi[1] - lo[1]) / (2 * step)]
    eig = np.linalg.eigvals(jac)
    if np.all(np.abs(eig.imag) == 0.0):
        eig = np.sort(eig.real)[::-1]
    return jac, eig
