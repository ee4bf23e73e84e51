#!/usr/bin/env python3
"""
Tests for cycloid surfaces, sampling, root isolation and surface intersections.
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pytest
from sympy import Poly, Rational, Symbol

from utils.algebra import VarRegistry, evaluate_numeric
from utils.conversion import parse_rational, trig_to_rational
from utils.errors import (
    NamedConstantUnsupported,
    NonpositiveRadius,
    RadiusOrderViolated,
    RegistryMismatch,
)
from utils.geometry import (
    GeometryService,
    RootIsolator,
    count_sign_changes,
    epicycloid,
    epicycloid_text,
    hypocycloid,
    intersect_condition,
    intersect_condition_trig,
    isolate_real_roots,
    sample,
)
from utils.trig_model import convert_pure, parse_param, parse_polynomial, parse_pure

SAMPLES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "samples")

SPHERE = "x1^2 + x2^2 + x3^2 - 36"

EPICYCLOID_ROOTS = [
    -2.992499717, -1.400811244, -0.7138720538, -0.3341687869, 0.008343202240,
    0.3157206162, 0.739367548, 1.352507292, 3.167357305, 119.8580558,
]


def read_sample(name: str) -> str:
    with open(os.path.join(SAMPLES, name), "r", encoding="utf-8") as f:
        return f.read()


def univariate(text: str):
    return parse_polynomial(text, VarRegistry.ambient(1))


# Cycloid surfaces

def test_epicycloid_matches_sample():
    assert convert_pure(epicycloid(5, 1)).components == parse_pure(read_sample("epicycloid_5_1.txt")).components


def test_hypocycloid_matches_sample():
    assert convert_pure(hypocycloid(7, 1)).components == parse_pure(read_sample("hypocycloid_7_1.txt")).components


def test_epicycloid_text_and_rational_radii():
    assert epicycloid_text(5, 1).splitlines()[0] == "signature (2,0,0) vars t1 t2"
    pure = convert_pure(epicycloid("5/2", 1))
    assert pure.scales == (2, 1)


@pytest.mark.parametrize("build, R, r, error", [
    (epicycloid, 0, 1, NonpositiveRadius),
    (epicycloid, 5, -1, NonpositiveRadius),
    (hypocycloid, 1, 7, RadiusOrderViolated),
    (hypocycloid, 2, 2, RadiusOrderViolated),
])
def test_radius_errors(build, R, r, error):
    with pytest.raises(error):
        build(R, r)


# Sampling

def test_circle_samples_lie_on_circle():
    circle = parse_rational(read_sample("circle.txt"))
    check = [parse_polynomial("x1^2 + x2^2 - 1", VarRegistry.ambient(2))]
    cloud = sample(circle, [(-10, 10)], 201, check=check)
    assert len(cloud) == 201
    assert cloud.skipped == 0
    assert cloud.max_residual < 1e-9
    assert cloud.to_csv().splitlines()[0] == "t1,x1,x2,residual1"


def test_pure_samples_use_original_parameters():
    hybrid = parse_param(read_sample("example_hybrid.txt"))
    pure = convert_pure(hybrid)
    cloud = sample(pure, [(0.3, 1.2), (0.4, 1.5)], 4)
    expected = hybrid.evaluate({"t1": cloud.parameters[:, 0], "t2": cloud.parameters[:, 1]})
    for i, values in enumerate(expected):
        np.testing.assert_allclose(cloud.points[:, i], values, rtol=1e-9)


def test_epicycloid_samples_satisfy_implicit_equation():
    pure = parse_pure(read_sample("epicycloid_5_1.txt"))
    implicit = parse_polynomial(read_sample("epicycloid_5_1_implicit.txt"), VarRegistry.ambient(3))
    cloud = sample(pure, [(0, 2 * np.pi), (0, 2 * np.pi)], 15, check=[implicit])
    assert len(cloud) == 225
    assert cloud.max_residual < 1e-9


def test_constant_component_is_broadcast():
    p = parse_pure("signature (1,0,0) vars t1\n(cos(t1), 2)")
    cloud = sample(p, [(0, 1)], 5)
    assert np.all(cloud.points[:, 1] == 2.0)


def test_plot_curve_skips_poles():
    pure = parse_pure(read_sample("plot_curve.txt"))
    cloud = sample(pure, [(-2 * np.pi, 2 * np.pi)], 2000)
    assert cloud.skipped == 2
    assert len(cloud) == 1998
    far = np.abs(cloud.points[:, 0]) > 50
    t = np.abs(cloud.parameters[far, 0])
    assert np.all((t < 0.1) | (t > 2 * np.pi - 0.1))


def test_sampling_is_deterministic_across_threads():
    pure = parse_pure(read_sample("two_circles.txt"))
    one = GeometryService(threads=1).sample(pure, [(0.2, 1.3), (0.2, 1.3)], 12)
    four = GeometryService(threads=4).sample(pure, [(0.2, 1.3), (0.2, 1.3)], 12)
    assert np.array_equal(one.points, four.points)
    assert one.to_csv() == four.to_csv()


def test_named_constants_need_values_when_sampling():
    pure = parse_pure(read_sample("named_phases.txt"))
    ranges = [(0.1, 0.5)] * 3
    cloud = sample(pure, ranges, 3, constants={"a1": 0.2, "a2": 0.1})
    assert len(cloud) == 27
    with pytest.raises(NamedConstantUnsupported):
        sample(pure, ranges, 3)


def test_sampling_argument_checks():
    circle = parse_rational(read_sample("circle.txt"))
    with pytest.raises(ValueError):
        sample(circle, [(0, 1), (0, 1)], 5)
    with pytest.raises(ValueError):
        sample(circle, [(0, 1)], 1)


# Root isolation

def test_roots_of_square_root_of_two():
    roots = isolate_real_roots(univariate("x1^2 - 2"))
    assert [r.refined for r in roots] == pytest.approx([-1.41421356, 1.41421356])
    assert all(r.hi - r.lo <= Rational(1, 10 ** 9) for r in roots)


def test_exact_rational_roots():
    roots = isolate_real_roots(univariate("x1^2 - 1"))
    assert [(r.lo, r.hi) for r in roots] == [(-1, -1), (1, 1)]


def test_multiplicities():
    roots = isolate_real_roots(univariate("(x1 - 1)^2*(x1 + 2)"))
    assert len(roots) == 2
    assert roots[0].multiplicity == 1 and roots[0].lo <= -2 <= roots[0].hi
    assert roots[1].multiplicity == 2 and roots[1].lo <= 1 <= roots[1].hi


def test_no_real_roots():
    assert isolate_real_roots(univariate("x1^2 + 1")) == []
    assert isolate_real_roots(univariate("7")) == []


def test_isolation_rejects_bad_input():
    with pytest.raises(ValueError):
        isolate_real_roots(VarRegistry.ambient(1).zero)
    with pytest.raises(RegistryMismatch):
        isolate_real_roots(parse_polynomial("x1*x2 - 1", VarRegistry.ambient(2)))
    with pytest.raises(ValueError):
        RootIsolator(width=0)


def test_count_sign_changes():
    assert count_sign_changes([1, 0, -2, 3, 0, 0, 4]) == 2
    assert count_sign_changes([]) == 0


def test_isolation_on_random_squarefree_polynomials():
    rng = np.random.default_rng(11)
    x = Symbol("x1")
    ambient = VarRegistry.ambient(1)
    checked = 0
    while checked < 50:
        degree = int(rng.integers(1, 13))
        coeffs = [int(c) for c in rng.integers(-20, 21, size=degree + 1)]
        coeffs[0] = coeffs[0] or 1
        f = Poly(coeffs, x, domain="ZZ").sqf_part()
        if f.degree() < 1:
            continue
        checked += 1
        roots = isolate_real_roots(ambient.poly({m: int(c) for m, c in f.terms()}))
        assert len(roots) == f.count_roots()
        for r in roots:
            if r.lo == r.hi:
                assert f.eval(r.lo) == 0
            else:
                assert f.eval(r.lo) * f.eval(r.hi) < 0
        for left, right in zip(roots, roots[1:]):
            assert left.hi <= right.lo
        grid = [Rational(k, 4) for k in range(-200, 201)]
        assert count_sign_changes([f.eval(g) for g in grid]) <= len(roots)


# Intersections

def test_condition_on_circle():
    circle = parse_rational(read_sample("circle.txt"))
    ambient = VarRegistry.ambient(2)
    assert intersect_condition(circle, parse_polynomial("x1", ambient)) == 2 * circle.registry.gen("t1")
    assert intersect_condition(circle, parse_polynomial("x1 - x2", ambient)) == parse_polynomial(
        "-t1^2 + 2*t1 + 1", circle.registry
    )
    assert not intersect_condition(circle, parse_polynomial("x1^2 + x2^2 - 1", ambient))
    service = GeometryService()
    assert service.single_parameter_factors(circle, circle.registry.zero) == {}


def test_trig_condition_of_epicycloid_and_sphere():
    pure = parse_pure(read_sample("epicycloid_5_1.txt"))
    sphere = parse_polynomial(SPHERE, VarRegistry.ambient(3))
    condition = intersect_condition_trig(pure, sphere)
    assert condition == parse_polynomial("192*c1^5 - 240*c1^3 + 60*c1 - 1", pure.registry)


def test_trig_condition_rejects_named_constants():
    pure = parse_pure(read_sample("named_phases.txt"))
    with pytest.raises(NamedConstantUnsupported):
        intersect_condition_trig(pure, parse_polynomial("x1", VarRegistry.ambient(3)))


def test_epicycloid_meets_sphere_in_circles():
    rational = trig_to_rational(parse_pure(read_sample("epicycloid_5_1.txt")))
    sphere = parse_polynomial(SPHERE, VarRegistry.ambient(3))
    result = GeometryService().intersect(rational, sphere)
    assert list(result.factors) == ["t1"]
    assert result.factors["t1"] == parse_polynomial(
        "t1^10 - 120*t1^9 + 5*t1^8 + 1440*t1^7 + 10*t1^6 - 3024*t1^5 + 10*t1^4 + 1440*t1^3 + 5*t1^2 - 120*t1 + 1",
        rational.registry,
    )
    approx = [r.refined for r in result.roots["t1"]]
    assert approx == pytest.approx(EPICYCLOID_ROOTS, abs=1e-6)
    assert len(result.curves) == 10

    curve = next(c for c in result.curves if abs(c.root.refined - 1.352507292) < 1e-6)
    assert curve.curve.params == ("t2",)
    x1, x2, x3 = curve.curve.components
    assert not x3.variables()
    assert evaluate_numeric(x3, {}) == pytest.approx(5.9488934, abs=1e-6)
    for t2 in (0.3, 2.0):
        radius = np.hypot(evaluate_numeric(x1, {"t2": t2}), evaluate_numeric(x2, {"t2": t2}))
        assert radius == pytest.approx(0.781452, abs=1e-5)
    assert curve.format().startswith("(")
