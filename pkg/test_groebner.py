#!/usr/bin/env python3
"""
Tests for Buchberger's algorithm, elimination and implicitization.
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import pytest
from sympy import expand, resultant, sstr, symbols

from utils.algebra import VarKind, VarRegistry, format_poly, primitive_normal
from utils.config import override_settings
from utils.conversion import parse_rational, trig_to_rational
from utils.errors import NamedConstantUnsupported, RegistryMismatch, ResourceBudgetExceeded
from utils.expression_parser import Signature
from utils.groebner import (
    Ideal,
    ImplicitizationService,
    MonomialOrder,
    _select,
    buchberger,
    eliminate,
    groebner_basis_of,
    ideal_contains,
    implicitize_rational,
    implicitize_trig,
    is_groebner,
    normal_form,
    order_ring,
    same_ideal,
    torus_basis,
    torus_ideal,
    torus_reduce,
    verify_implicit,
)
from utils.trig_model import parse_polynomial, parse_pure, pure_registry

SAMPLES = os.path.join(os.path.dirname(os.path.abspath(__file__)), "samples")


def read_sample(name: str) -> str:
    with open(os.path.join(SAMPLES, name), "r", encoding="utf-8") as f:
        return f.read()


def ambient_ideal(n: int, *texts: str) -> Ideal:
    reg = VarRegistry.ambient(n)
    return Ideal(reg, tuple(parse_polynomial(t, reg) for t in texts))


@pytest.fixture
def xy():
    return VarRegistry(("x", "y"), (VarKind.PARAM, VarKind.PARAM))


def test_buchberger_small_system(xy):
    ideal = Ideal(xy, (parse_polynomial("x^2 + y^2 - 1", xy), parse_polynomial("x - y", xy)))
    gb = buchberger(ideal, MonomialOrder.lex(xy))
    assert is_groebner(gb)
    assert set(format_poly(p) for p in gb.polys()) == {"x-y", "2*y^2-1"}
    assert normal_form(parse_polynomial("x^2", xy), gb) == parse_polynomial("1/2", xy)


def test_buchberger_unit_ideal(xy):
    ideal = Ideal(xy, (parse_polynomial("x*y - 1", xy), parse_polynomial("x", xy)))
    gb = buchberger(ideal, MonomialOrder.grevlex(xy))
    assert [format_poly(p) for p in gb.polys()] == ["1"]


def test_ideal_generators_are_normalised(xy):
    ideal = Ideal(xy, (parse_polynomial("-2*x + 4*y", xy), parse_polynomial("x - 2*y", xy), xy.zero))
    assert ideal.format() == ["x-2*y"]
    assert Ideal(xy).is_zero


def test_ideal_membership(xy):
    a = Ideal(xy, (parse_polynomial("x^2 - y", xy),))
    b = Ideal(xy, (parse_polynomial("x^4 - y^2", xy),))
    assert ideal_contains(a, b)
    assert not ideal_contains(b, a)
    assert ideal_contains(a, Ideal(xy))
    with pytest.raises(RegistryMismatch):
        ideal_contains(a, ambient_ideal(2, "x1"))


def test_eliminate_orders_agree():
    reg = VarRegistry(("t", "x", "y"), (VarKind.PARAM, VarKind.AMBIENT, VarKind.AMBIENT))
    ideal = Ideal(reg, (parse_polynomial("x - t^2", reg), parse_polynomial("y - t^3", reg)))
    block = eliminate(ideal, ["t"], "block")
    lex = eliminate(ideal, ["t"], "lex")
    assert block.format() == ["x^3-y^2"] or block.format() == ["-x^3+y^2"]
    assert same_ideal(block, lex)
    with pytest.raises(ValueError):
        eliminate(ideal, ["t"], "elim")


def test_pair_budget_reports_statistics():
    circle = parse_rational(read_sample("circle.txt"))
    with pytest.raises(ResourceBudgetExceeded) as info:
        ImplicitizationService(pair_budget=1).implicitize_rational(circle)
    details = info.value.details
    assert details["pairs_reduced"] == 1
    assert set(details) == {"pairs_reduced", "zero_reductions", "basis_size", "pairs_remaining"}
    assert info.value.exit_code == 13


def test_pair_budget_from_settings():
    circle = parse_rational(read_sample("circle.txt"))
    with override_settings(pair_budget=1):
        with pytest.raises(ResourceBudgetExceeded):
            implicitize_rational(circle)


def test_circle_implicitization():
    circle = parse_rational(read_sample("circle.txt"))
    assert implicitize_rational(circle).format() == ["x1^2+x2^2-1"]
    assert implicitize_rational(circle, order="lex").format() == ["x1^2+x2^2-1"]
    assert implicitize_rational(circle).to_json()["order"] == "block([W],[t1],[x1,x2])"
    assert implicitize_rational(circle, order="lex").to_json()["order"] == "lex(W>t1>x1>x2)"
    assert ambient_ideal(2, "x1").to_json()["order"] == "grevlex"


@pytest.mark.parametrize("name, expected", [
    ("example_hybrid.txt", ["x1^3+3*x1^2*x3+3*x1*x3^2+x3^3-x3"]),
    ("quartic.txt", ["x1^2*x2^2-x1^2+1"]),
    ("cone.txt", ["x1^2+x2^2-x3^2"]),
])
def test_both_options_agree(name, expected):
    pure = parse_pure(read_sample(name))
    assert implicitize_trig(pure).format() == expected
    assert implicitize_rational(trig_to_rational(pure)).format() == expected


def test_two_circles_implicitization():
    pure = parse_pure(read_sample("two_circles.txt"))
    result = implicitize_rational(trig_to_rational(pure))
    expected = ambient_ideal(4, "x1^2*x3^2 - x1^2 - x3^2", "x2^2*x4^2 - x3^2*x4^2 + x2^2")
    assert same_ideal(result, expected)
    assert same_ideal(implicitize_trig(pure), result)


@pytest.mark.parametrize("components", [
    "2*t1/(t1^2+1), (t1^2-1)/(t1^2+1)",
    "t1, t1^2",
    "t1^2, t1^3",
    "t1^2-1, t1*(t1^2-1)",
    "t1^2, t1^4+t1",
])
def test_plane_curves_match_resultant(components):
    curve = parse_rational(f"signature (0,0,1) vars t1\n({components})")
    (implicit,) = implicitize_rational(curve).generators
    t, x1, x2 = symbols("t1 x1 x2")
    first, second = curve.components
    res = resultant(
        expand(first.den.as_expr() * x1 - first.num.as_expr()),
        expand(second.den.as_expr() * x2 - second.num.as_expr()),
        t,
    )
    ambient = VarRegistry.ambient(2)
    expected = primitive_normal(parse_polynomial(sstr(expand(res)).replace("**", "^"), ambient))
    assert implicit == expected


def test_named_constants_block_implicitization():
    pure = parse_pure(read_sample("named_phases.txt"))
    with pytest.raises(NamedConstantUnsupported):
        implicitize_trig(pure)


def test_torus_ideal():
    assert torus_ideal(Signature(0, 0, 2)).is_zero
    ideal = torus_ideal(Signature(1, 1, 0))
    assert ideal.format() == ["c1^2+s1^2-1", "ch2^2-sh2^2-1"]


def test_torus_reduce_is_the_normal_form():
    sig = Signature(1, 1, 1)
    reg = pure_registry(sig, ["t1", "t2", "t3"])
    p = parse_polynomial(
        "s1^5*c1 - 3*s1^2*sh2^3 + sh2^4*t3 + 2*c1^3*s1^3*ch2 - s1^2 + 7*sh2^2*ch2 - t3^2*s1^4", reg
    )
    basis = torus_basis(sig, reg)
    assert torus_reduce(p, sig) == normal_form(p, basis)
    assert all(m[reg.index("s1")] < 2 and m[reg.index("sh2")] < 2 for m in torus_reduce(p, sig).keys())


def test_hyperbolic_relation_reduces_to_one():
    sig = Signature(0, 1, 0)
    reg = pure_registry(sig, ["t1"])
    p = parse_polynomial("(ch1 + sh1)*(ch1 - sh1)", reg)
    assert normal_form(p, torus_basis(sig, reg)) == reg.one
    assert torus_reduce(p, sig) == reg.one


def test_normal_form_depends_on_the_order():
    sig = Signature(1, 0, 0)
    reg = pure_registry(sig, ["t1"])
    s_squared = parse_polynomial("s1^2", reg)
    cosine_first = buchberger(torus_ideal(sig, reg), MonomialOrder.lex(reg, ["c1"]))
    assert normal_form(s_squared, cosine_first) == s_squared
    assert normal_form(s_squared, torus_basis(sig, reg)) == parse_polynomial("1 - c1^2", reg)


def test_pairs_are_selected_by_lcm_degree(xy):
    ring = order_ring(xy, MonomialOrder.lex(xy))
    lmG = [(1, 0), (0, 3), (0, 1)]
    assert _select(lmG, {(0, 1), (0, 2), (1, 2)}, ring) == (0, 2)
    assert _select(lmG, {(0, 1), (1, 2)}, ring) == (1, 2)


def test_verify_cycloid_implicit_equations():
    ambient = VarRegistry.ambient(3)
    for surface in ("epicycloid_5_1", "hypocycloid_7_1"):
        pure = parse_pure(read_sample(f"{surface}.txt"))
        implicit = parse_polynomial(read_sample(f"{surface}_implicit.txt"), ambient)
        sphere = parse_polynomial("x1^2 + x2^2 + x3^2 - 36", ambient)
        assert verify_implicit(pure, [implicit, sphere]) == [True, False]


def test_verify_rational_and_arity():
    circle = parse_rational(read_sample("circle.txt"))
    ideal = ambient_ideal(2, "x1^2 + x2^2 - 1", "x1 - x2")
    assert verify_implicit(circle, ideal) == [True, False]
    with pytest.raises(RegistryMismatch):
        verify_implicit(circle, ambient_ideal(3, "x3").generators)


def test_intersection_basis_in_lex():
    ambient = VarRegistry.ambient(3)
    surface = parse_polynomial(read_sample("epicycloid_5_1_implicit.txt"), ambient)
    sphere = parse_polynomial("x1^2 + x2^2 + x3^2 - 36", ambient)
    gb = groebner_basis_of([surface, sphere], ambient, order="lex")
    assert is_groebner(gb)
    assert set(format_poly(p) for p in gb.polys()) == {
        "1492992*x3^5-67184640*x3^3+604661760*x3-576284939",
        "x1^2+x2^2+x3^2-36",
    }
    with pytest.raises(ValueError):
        groebner_basis_of([sphere], ambient, order="random")
