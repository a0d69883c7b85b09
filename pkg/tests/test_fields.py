import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptseek import fields
from ptseek.fields import BoundConstants, FieldRegimeError


BUILTINS = ["quadratic-demo", "cosine-quadratic", "cosine-quartic"]


def fd_gradient(field, x, step=1e-5):
    e = np.eye(2) * step
    return np.array([(fields.eval_field(field, x + e[i]) - fields.eval_field(field, x - e[i])) / (2 * step)
                     for i in range(2)])


@pytest.mark.parametrize("kind,peak", [("cosine-quadratic", 3.0), ("cosine-quartic", 2.0),
                                       ("quadratic-demo", 0.0)])
def test_peak_values(kind, peak):
    f = fields.builtin(kind)
    assert f.peak == peak
    assert fields.eval_field(f, (0.0, 0.0)) == peak


@pytest.mark.parametrize("kind", BUILTINS)
def test_gradient_vanishes_at_source(kind):
    for source in [(0.0, 0.0), (1.5, -0.5)]:
        f = fields.builtin(kind, source)
        assert np.linalg.norm(fields.eval_gradient(f, source)) < 1e-9
        assert fields.eval_field(f, source) == f.peak


def test_quadratic_gradient():
    f = fields.builtin("quadratic-demo")
    assert np.array_equal(fields.eval_gradient(f, (2.0, 2.0)), [-2.0, -2.0])


def test_cosine_quadratic_gradient_against_finite_differences():
    f = fields.builtin("cosine-quadratic")
    x = np.array([1.0, 0.0])
    g = fields.eval_gradient(f, x)
    fd = fd_gradient(f, x)
    assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-6


def test_cosine_quadratic_formula():
    f = fields.builtin("cosine-quadratic")
    x = (0.7, -1.3)
    expected = 2.5 + 0.5 * math.cos(2 * math.pi * 0.7 / 3) - 0.5 * (0.7**2 + 1.3**2)
    assert fields.eval_field(f, x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("kind", BUILTINS)
def test_gradients_match_finite_differences_on_random_points(kind):
    rng = np.random.default_rng(7)
    f = fields.builtin(kind)
    r = 3.0 * np.sqrt(rng.uniform(size=1000))
    phi = rng.uniform(0, 2 * math.pi, size=1000)
    worst = 0.0
    for x in np.column_stack((r * np.cos(phi), r * np.sin(phi))):
        g = fields.eval_gradient(f, x)
        scale = max(np.linalg.norm(g), 1e-3)
        worst = max(worst, np.linalg.norm(g - fd_gradient(f, x)) / scale)
    assert worst < 1e-6


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_field_is_deterministic_and_below_peak(a, b):
    for kind in BUILTINS:
        f = fields.builtin(kind)
        v1 = fields.eval_field(f, (a, b))
        assert v1 == fields.eval_field(f, (a, b))
        assert v1 <= f.peak


def test_quadratic_bound_constants_exact():
    c = fields.estimate_bound_constants(fields.builtin("quadratic-demo"), 5.0, 101)
    assert c.a1 == pytest.approx(0.5, abs=1e-12)
    assert c.a2 == pytest.approx(0.5, abs=1e-12)
    assert c.b1 == pytest.approx(1.0, abs=1e-12)
    assert c.b2 == pytest.approx(1.0, abs=1e-12)


# Grid-oracle values (201 x 201 grid on the validity ball), computed with an
# independent vectorised numpy evaluation before the build and frozen here.
COSQUAD_CONSTANTS = BoundConstants(1.5962619842932975, 0.49999999999981326,
                                   0.5237737020672587, 3.1918026096486365)


def grid_oracle(value, grad, peak, radius, n, kappa):
    axis = np.linspace(-radius, radius, n)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    r = np.hypot(x1, x2)
    keep = (r > 0) & (r <= radius)
    x1, x2, r = x1[keep], x2[keep], r[keep]
    v = value(x1, x2)
    g = np.hypot(*grad(x1, x2))
    drop = (peak - v) / r ** (2 * kappa)
    slope = g / r ** (2 * kappa - 1)
    return drop.max(), drop.min(), slope.min(), slope.max()


def test_cosine_quadratic_constants_match_vectorised_oracle():
    a = 2 * math.pi / 3
    oracle = grid_oracle(lambda x, y: 2.5 + 0.5 * np.cos(a * x) - 0.5 * (x**2 + y**2),
                         lambda x, y: (-(math.pi / 3) * np.sin(a * x) - x, -y), 3.0, 3.0, 201, 1)
    c = fields.estimate_bound_constants(fields.builtin("cosine-quadratic"), 3.0, 201)
    assert np.allclose(c, oracle, rtol=1e-12)
    assert np.allclose(c, COSQUAD_CONSTANTS, rtol=1e-12)
    assert c.a2 < c.a1 and c.b1 < c.b2


def test_cosine_quartic_constants_match_vectorised_oracle():
    oracle = grid_oracle(lambda x, y: np.cos(x) + np.cos(y) - 0.5 * (x**4 + y**4),
                         lambda x, y: (-np.sin(x) - 2 * x**3, -np.sin(y) - 2 * y**3), 2.0, 2.0, 201, 2)
    c = fields.estimate_bound_constants(fields.builtin("cosine-quartic"), 2.0, 201)
    assert np.allclose(c, oracle, rtol=1e-12)
    assert c.a2 <= c.a1 and c.b1 <= c.b2


@pytest.mark.parametrize("kind,radius", [("quadratic-demo", 5.0), ("cosine-quadratic", 3.0),
                                         ("cosine-quartic", 2.0)])
def test_estimated_constants_satisfy_sandwich_on_grid(kind, radius):
    f = fields.builtin(kind)
    c = fields.estimate_bound_constants(f, radius, 61)
    value, grad = fields.field_callables(f)
    axis = np.linspace(-radius, radius, 61)
    k2 = 2 * f.kappa
    worst = math.inf
    for a in axis:
        for b in axis:
            r = math.hypot(a, b)
            if r == 0 or r > radius:
                continue
            v, g = value(a, b), math.hypot(*grad(a, b))
            worst = min(worst,
                        v - (f.peak - c.a1 * r**k2), (f.peak - c.a2 * r**k2) - v,
                        g - c.b1 * r ** (k2 - 1), c.b2 * r ** (k2 - 1) - g)
    assert worst >= -1e-12


def test_bound_estimation_rejects_fields_above_peak():
    # the quartic term overtakes the quadratic well far from the source
    bumpy = fields.custom_polynomial([(0, 0, 0.0), (2, 0, -1.0), (0, 2, -1.0), (4, 0, 0.1)])
    with pytest.raises(FieldRegimeError):
        fields.estimate_bound_constants(bumpy, 10.0, 41)


def test_bound_estimation_preconditions():
    f = fields.builtin("quadratic-demo")
    with pytest.raises(ValueError):
        fields.estimate_bound_constants(f, 0.0, 32)
    with pytest.raises(ValueError):
        fields.estimate_bound_constants(f, 1.0, 8)


def test_custom_polynomial_matches_quadratic_demo():
    poly = fields.custom_polynomial([(2, 0, -0.5), (0, 2, -0.5)])
    quad = fields.builtin("quadratic-demo")
    for x in [(0.3, -1.2), (2.0, 2.0), (-4.0, 0.5)]:
        assert fields.eval_field(poly, x) == pytest.approx(fields.eval_field(quad, x), rel=1e-15)
        assert np.allclose(fields.eval_gradient(poly, x), fields.eval_gradient(quad, x))


def test_custom_polynomial_validation():
    with pytest.raises(ValueError):
        fields.custom_polynomial([(4, 3, 1.0)])
    with pytest.raises(ValueError):
        # gradient of x1 is nonzero at the origin
        fields.custom_polynomial([(1, 0, 1.0), (2, 0, -1.0)])


def test_comparison_constants():
    c1, c2 = fields.comparison_constants(BoundConstants(0.5, 0.5, 1.0, 1.0), 1)
    assert c1 == pytest.approx(math.sqrt(2))
    assert c2 == pytest.approx(math.sqrt(2))
    c1, c2 = fields.comparison_constants(BoundConstants(16.0, 1.0, 8.0, 3.0), 2)
    assert c1 == pytest.approx(8.0 / 16.0**0.75)
    assert c2 == pytest.approx(3.0)


def test_unknown_builtin():
    with pytest.raises(ValueError):
        fields.builtin("gaussian")
