#!/usr/bin/env python3
"""
Tests for the exact algebra core: registries, canonical rational functions,
composition, numeric evaluation and printing.
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

import numpy as np
import pytest

from utils.algebra import (
    RatFunc,
    VarKind,
    VarRegistry,
    compose_numerator,
    evaluate_grid,
    evaluate_numeric,
    format_poly,
    format_ratfunc,
    gcd_multivar,
    lcm_denominators,
    poly_arith,
    poly_from_json,
    poly_to_json,
    primitive_normal,
    split_content,
    substitute,
)
from utils.config import override_settings
from utils.errors import PoleAtPoint, RegistryMismatch, SubstitutionDenominatorVanishes


@pytest.fixture
def xy():
    return VarRegistry(("x", "y"), (VarKind.PARAM, VarKind.PARAM))


def test_registry_rejects_duplicates():
    with pytest.raises(RegistryMismatch):
        VarRegistry(("x", "x"), (VarKind.PARAM, VarKind.PARAM))


def test_registry_kinds_and_labels():
    reg = VarRegistry.build([("c1", VarKind.TORUS, "cos(t1)"), ("t2", VarKind.PARAM)])
    assert reg.kind("c1") == VarKind.TORUS
    assert reg.label("c1") == "cos(t1)"
    assert reg.label("t2") == "t2"
    assert reg.names_of_kind(VarKind.PARAM) == ["t2"]
    with pytest.raises(RegistryMismatch):
        reg.index("s1")


def test_ratfunc_is_reduced_and_normalised(xy):
    x, y = xy.gen("x"), xy.gen("y")
    f = RatFunc(xy, x ** 2 - y ** 2, x - y)
    assert f.is_polynomial
    assert f.num == x + y

    g = RatFunc(xy, x, -2 * y)
    assert g.den == y
    assert g == RatFunc(xy, -x, 2 * y)


def test_zero_is_stored_over_one(xy):
    f = RatFunc(xy, xy.zero, xy.gen("x") + 3)
    assert f.is_zero
    assert f.den == xy.one


def test_arithmetic(xy):
    x = RatFunc.var(xy, "x")
    y = RatFunc.var(xy, "y")
    assert 1 / x + 1 / y == (x + y) / (x * y)
    assert (x / y) ** -2 == y ** 2 / x ** 2
    assert x - x == 0
    assert (x + 1) * (x - 1) == x ** 2 - 1


def test_division_by_zero(xy):
    x = RatFunc.var(xy, "x")
    with pytest.raises(SubstitutionDenominatorVanishes):
        x / (x - x)


def test_mixed_registries(xy):
    other = VarRegistry(("x",), (VarKind.PARAM,))
    with pytest.raises(RegistryMismatch):
        RatFunc.var(xy, "x") + RatFunc.var(other, "x")


def test_reduce_fractions_off_keeps_common_factor(xy):
    x, y = xy.gen("x"), xy.gen("y")
    with override_settings(reduce_fractions=False):
        f = RatFunc(xy, x ** 2 - y ** 2, x - y)
    assert f.den == x - y


def test_gcd_and_lcm(xy):
    x, y = xy.gen("x"), xy.gen("y")
    a = (x + y) * (x - 2 * y)
    b = (x + y) * (3 * x + 1)
    assert gcd_multivar(a, b) == x + y
    f = RatFunc(xy, xy.one, a)
    g = RatFunc(xy, xy.one, b)
    assert lcm_denominators([f, g]) == primitive_normal((x + y) * (x - 2 * y) * (3 * x + 1))


def test_substitute_circle_map(xy):
    t_reg = VarRegistry(("t",), (VarKind.PARAM,))
    t = RatFunc.var(t_reg, "t")
    bindings = {"x": 2 * t / (t ** 2 + 1), "y": (t ** 2 - 1) / (t ** 2 + 1)}
    x = RatFunc.var(xy, "x")
    y = RatFunc.var(xy, "y")
    assert substitute(x ** 2 + y ** 2, bindings, t_reg) == 1
    assert substitute(x / (1 - y), bindings, t_reg) == t


def test_substitute_rejects_unknown_binding(xy):
    t_reg = VarRegistry(("t",), (VarKind.PARAM,))
    with pytest.raises(RegistryMismatch):
        substitute(RatFunc.var(xy, "x"), {"z": RatFunc.var(t_reg, "t")}, t_reg)


def test_compose_numerator_on_circle():
    t_reg = VarRegistry(("t",), (VarKind.PARAM,))
    t = RatFunc.var(t_reg, "t")
    circle = [2 * t / (t ** 2 + 1), (t ** 2 - 1) / (t ** 2 + 1)]
    ambient = VarRegistry.ambient(2)
    x1, x2 = ambient.gen("x1"), ambient.gen("x2")
    assert not compose_numerator(x1 ** 2 + x2 ** 2 - 1, circle)
    assert compose_numerator(x1, circle) == 2 * t_reg.gen("t")


def test_split_content():
    reg = VarRegistry(("t1", "t2"), (VarKind.PARAM, VarKind.PARAM))
    t1, t2 = reg.gen("t1"), reg.gen("t2")
    content, primitive = split_content((t1 ** 2 + 1) * (t2 + t1), ["t2"])
    assert content == t1 ** 2 + 1
    assert primitive == t2 + t1


def test_evaluate_numeric_and_poles(xy):
    f = RatFunc.var(xy, "x") / (RatFunc.var(xy, "y") - 1)
    assert evaluate_numeric(f, {"x": 3.0, "y": 2.0}) == pytest.approx(3.0)
    with pytest.raises(PoleAtPoint):
        evaluate_numeric(f, {"x": 3.0, "y": 1.0})


def test_evaluate_grid_masks_poles(xy):
    f = RatFunc.var(xy, "x") / (RatFunc.var(xy, "y") - 1)
    values, poles = evaluate_grid(f, [np.array([1.0, 2.0, 3.0]), np.array([0.0, 1.0, 3.0])])
    assert list(poles) == [False, True, False]
    assert values[0] == pytest.approx(-1.0)
    assert np.isnan(values[1])
    assert values[2] == pytest.approx(1.5)


def test_format_poly_grevlex_descending():
    reg = VarRegistry.ambient(3)
    p = reg.poly({(3, 0, 0): 1, (2, 0, 1): 3, (1, 0, 2): 3, (0, 0, 3): 1, (0, 0, 1): -1})
    assert format_poly(p) == "x1^3+3*x1^2*x3+3*x1*x3^2+x3^3-x3"


def test_format_ratfunc_uses_labels():
    reg = VarRegistry.build([("ch1", VarKind.TORUS, "cosh(t1)"), ("sh1", VarKind.TORUS, "sinh(t1)")])
    ch = RatFunc.var(reg, "ch1")
    sh = RatFunc.var(reg, "sh1")
    assert format_ratfunc(1 / ch) == "1/cosh(t1)"
    assert format_ratfunc(sh / ch) == "sinh(t1)/cosh(t1)"
    assert format_ratfunc(sh / (2 * ch * sh + ch)) == "sinh(t1)/(2*cosh(t1)*sinh(t1)+cosh(t1))"


def test_poly_json_schema():
    reg = VarRegistry.ambient(2)
    p = reg.poly({(2, 0): "1/2", (0, 1): -3})
    data = poly_to_json(p)
    assert data["vars"] == ["x1", "x2"]
    assert data["terms"][0] == {"coef": "1/2", "exps": [2, 0]}
    assert poly_from_json(data) == p


def test_poly_arith(xy):
    x, y = xy.gen("x"), xy.gen("y")
    assert poly_arith(x, y, "add") == x + y
    assert poly_arith(x, y, "sub") == x - y
    assert poly_arith(x + 1, x - 1, "mul") == x ** 2 - 1
    assert poly_arith(x + y, None, "pow", 3) == (x + y) ** 3
    with pytest.raises(ValueError):
        poly_arith(x, None, "pow", -1)
    with pytest.raises(ValueError):
        poly_arith(x, y, "div")
    with pytest.raises(RegistryMismatch):
        poly_arith(x, VarRegistry.ambient(1).gen("x1"), "add")
