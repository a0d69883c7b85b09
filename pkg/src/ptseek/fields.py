"""Scalar signal fields with analytic gradients.

A field is an immutable description; ``field_callables`` turns it into a pair
of plain ``(x1, x2) -> value`` functions for the integration hot loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

FIELD_KINDS = ("quadratic-demo", "cosine-quadratic", "cosine-quartic", "custom-polynomial")
MAX_POLY_DEGREE = 6

_TWO_PI_3 = 2.0 * math.pi / 3.0


class FieldRegimeError(ValueError):
    """Field does not decay monotonically away from its source on the region."""


class BoundConstants(NamedTuple):
    a1: float
    a2: float
    b1: float
    b2: float


@dataclass(frozen=True)
class ScalarField:
    kind: str
    source: tuple[float, float] = (0.0, 0.0)
    peak: float = 0.0
    kappa: int = 1
    validity_radius: float = math.inf
    # custom-polynomial only: (i, j, c) for c * x1**i * x2**j, in absolute coordinates
    terms: tuple[tuple[int, int, float], ...] = ()
    bound_constants: BoundConstants | None = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kappa < 1:
            raise ValueError("kappa must be a positive integer")
        if self.kind == "custom-polynomial":
            if not self.terms:
                raise ValueError("custom-polynomial field needs at least one term")
            for i, j, _ in self.terms:
                if i < 0 or j < 0 or i + j > MAX_POLY_DEGREE:
                    raise ValueError(f"term x1^{i} x2^{j} exceeds degree {MAX_POLY_DEGREE}")


# Built-in formulas, written about a source at the origin.

def _quad_value(x1, x2):
    return -0.5 * (x1 * x1 + x2 * x2)


def _quad_grad(x1, x2):
    return -x1, -x2


def _cosquad_value(x1, x2):
    return 2.5 + 0.5 * math.cos(_TWO_PI_3 * x1) - 0.5 * (x1 * x1 + x2 * x2)


def _cosquad_grad(x1, x2):
    return -(math.pi / 3.0) * math.sin(_TWO_PI_3 * x1) - x1, -x2


def _cosquart_value(x1, x2):
    return math.cos(x1) + math.cos(x2) - 0.5 * (x1**4 + x2**4)


def _cosquart_grad(x1, x2):
    return -math.sin(x1) - 2.0 * x1**3, -math.sin(x2) - 2.0 * x2**3


_BUILTIN = {
    "quadratic-demo": (_quad_value, _quad_grad, 0.0),
    "cosine-quadratic": (_cosquad_value, _cosquad_grad, 3.0),
    "cosine-quartic": (_cosquart_value, _cosquart_grad, 2.0),
}


def quadratic_demo(source=(0.0, 0.0)) -> ScalarField:
    """``-1/2 |x - x*|^2``; satisfies the polynomial bounds globally."""
    return ScalarField("quadratic-demo", tuple(map(float, source)), 0.0, 1, math.inf)


def cosine_quadratic(source=(0.0, 0.0)) -> ScalarField:
    """``2.5 + cos(2 pi x1 / 3) / 2 - |x|^2 / 2``, peak 3; bounds hold locally (radius 3)."""
    return ScalarField("cosine-quadratic", tuple(map(float, source)), 3.0, 1, 3.0)


def cosine_quartic(source=(0.0, 0.0)) -> ScalarField:
    """``cos x1 + cos x2 - (x1^4 + x2^4) / 2``, peak 2, quartic decay (kappa = 2, radius 2)."""
    return ScalarField("cosine-quartic", tuple(map(float, source)), 2.0, 2, 2.0)


def custom_polynomial(terms: Sequence[Sequence[float]], source=(0.0, 0.0), kappa: int = 1,
                      validity_radius: float = math.inf) -> ScalarField:
    """Polynomial field from ``(i, j, coefficient)`` triples.

    The declared source must be a stationary point; the peak is read off the
    polynomial there.
    """
    norm_terms = tuple((int(i), int(j), float(c)) for i, j, c in terms)
    src = (float(source[0]), float(source[1]))
    probe = ScalarField("custom-polynomial", src, 0.0, kappa, validity_radius, norm_terms)
    value, grad = field_callables(probe)
    scale = max(1.0, max(abs(c) for _, _, c in norm_terms))
    if math.hypot(*grad(*src)) > 1e-9 * scale:
        raise ValueError("declared source is not a stationary point of the polynomial")
    return ScalarField("custom-polynomial", src, value(*src), kappa, validity_radius, norm_terms)


def builtin(kind: str, source=(0.0, 0.0)) -> ScalarField:
    factories = {
        "quadratic-demo": quadratic_demo,
        "cosine-quadratic": cosine_quadratic,
        "cosine-quartic": cosine_quartic,
    }
    try:
        return factories[kind](source)
    except KeyError:
        raise ValueError(f"no built-in field named {kind!r}") from None


def _poly_callables(terms):
    def value(x1, x2):
        return sum(c * x1**i * x2**j for i, j, c in terms)

    def grad(x1, x2):
        g1 = sum(i * c * x1 ** (i - 1) * x2**j for i, j, c in terms if i)
        g2 = sum(j * c * x1**i * x2 ** (j - 1) for i, j, c in terms if j)
        return g1, g2

    return value, grad


def field_callables(field: ScalarField) -> tuple[Callable[[float, float], float],
                                                 Callable[[float, float], tuple[float, float]]]:
    """Return ``(value(x1, x2), grad(x1, x2))`` closures for ``field``."""
    if field.kind == "custom-polynomial":
        return _poly_callables(field.terms)
    value, grad, _ = _BUILTIN[field.kind]
    s1, s2 = field.source
    if s1 == 0.0 and s2 == 0.0:
        return value, grad

    def shifted_value(x1, x2):
        return value(x1 - s1, x2 - s2)

    def shifted_grad(x1, x2):
        return grad(x1 - s1, x2 - s2)

    return shifted_value, shifted_grad


def eval_field(field: ScalarField, x) -> float:
    value, _ = field_callables(field)
    return float(value(float(x[0]), float(x[1])))


def eval_gradient(field: ScalarField, x) -> np.ndarray:
    _, grad = field_callables(field)
    return np.array(grad(float(x[0]), float(x[1])), dtype=float)


def estimate_bound_constants(field: ScalarField, region_radius: float, grid_n: int) -> BoundConstants:
    """Tightest polynomial sandwich constants over a grid in a ball around the source.

    The grid is ``grid_n x grid_n`` points on the square circumscribing the
    ball; points outside the ball and the source itself are discarded.  The
    returned ``(a1, a2, b1, b2)`` satisfy

        peak - a1 r^(2k) <= F(x) <= peak - a2 r^(2k)
        b1 r^(2k-1) <= |grad F(x)| <= b2 r^(2k-1)

    at every retained grid point, with ``r = |x - x*|``.
    """
    if region_radius <= 0:
        raise ValueError("region_radius must be positive")
    if grid_n < 16:
        raise ValueError("grid_n must be at least 16")
    value, grad = field_callables(field)
    s1, s2 = field.source
    axis = np.linspace(-region_radius, region_radius, grid_n)
    d1, d2 = np.meshgrid(axis, axis, indexing="ij")
    r = np.hypot(d1, d2).ravel()
    keep = (r > 0.0) & (r <= region_radius)
    pts = np.column_stack((d1.ravel()[keep] + s1, d2.ravel()[keep] + s2))
    r = r[keep]

    vals = np.array([value(p, q) for p, q in pts])
    if np.any(vals > field.peak):
        raise FieldRegimeError(
            f"{field.kind}: field exceeds its peak inside radius {region_radius}")
    grads = np.array([math.hypot(*grad(p, q)) for p, q in pts])

    two_k = 2 * field.kappa
    drop = (field.peak - vals) / r**two_k
    slope = grads / r ** (two_k - 1)
    consts = BoundConstants(float(drop.max()), float(drop.min()),
                            float(slope.min()), float(slope.max()))
    if consts.a2 <= 0.0 or consts.b1 <= 0.0:
        raise FieldRegimeError(
            f"{field.kind}: lower bound constants vanish inside radius {region_radius} "
            f"(a2={consts.a2:.3g}, b1={consts.b1:.3g})")
    return consts


def comparison_constants(consts: BoundConstants, kappa: int) -> tuple[float, float]:
    """``(c1, c2)`` with ``c_i = b_i / a_i^q`` and ``q = (2 kappa - 1) / (2 kappa)``.

    These sandwich the gradient norm in terms of the Lyapunov value
    ``V = peak - F``: ``c1 V^q <= |grad F| <= c2 V^q``.
    """
    q = (2 * kappa - 1) / (2 * kappa)
    return consts.b1 / consts.a1**q, consts.b2 / consts.a2**q


def with_estimated_constants(field: ScalarField, grid_n: int = 201,
                             region_radius: float | None = None) -> ScalarField:
    """Copy of ``field`` carrying constants estimated on its validity region."""
    radius = field.validity_radius if region_radius is None else region_radius
    if not math.isfinite(radius):
        raise ValueError("field has no finite validity radius; pass region_radius")
    return replace(field, bound_constants=estimate_bound_constants(field, radius, grid_n))
