import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import gcd
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Poly, QQ
from sympy.polys.orderings import grevlex
from sympy.polys.polyerrors import HeuristicGCDFailed
from sympy.polys.rings import PolyElement, PolyRing

from .config import get_settings
from .errors import (
    ExpressionSyntaxError,
    PoleAtPoint,
    RegistryMismatch,
    SubstitutionDenominatorVanishes,
)

logger = logging.getLogger(__name__)

# Sparse polynomials are sympy ring elements: a dict from exponent tuple to QQ coefficient.
MultiPoly = PolyElement
Scalar = Union[int, Fraction, str]


class VarKind(str, Enum):
    PARAM = "param"
    TORUS = "torus"
    AMBIENT = "ambient"
    RABINOWITSCH = "rabinowitsch"
    CONSTANT = "constant"


def to_rational(value):
    """Convert an int, Fraction, sympy number or 'n/d' string to an exact QQ element."""
    if isinstance(value, PolyElement):
        raise TypeError("expected a scalar, got a polynomial")
    try:
        frac = Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ExpressionSyntaxError(f"Not a rational number: {value!r}: {str(e)}")
    return QQ(frac.numerator, frac.denominator)


def rational_parts(q) -> Tuple[int, int]:
    return int(QQ.numer(q)), int(QQ.denom(q))


def rational_str(q) -> str:
    num, den = rational_parts(q)
    return str(num) if den == 1 else f"{num}/{den}"


@dataclass(frozen=True)
class VarRegistry:
    """Ordered variable names with fixed kinds; position is the exponent slot."""

    names: Tuple[str, ...]
    kinds: Tuple[VarKind, ...]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise RegistryMismatch(f"Duplicate variable names: {self.names}")
        if len(self.kinds) != len(self.names):
            raise RegistryMismatch("Every variable needs exactly one kind")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(self.names))
        elif len(self.labels) != len(self.names):
            raise RegistryMismatch("Every variable needs exactly one label")

    @classmethod
    def build(cls, entries: Iterable[Tuple]) -> "VarRegistry":
        """Build from (name, kind) or (name, kind, label) tuples."""
        names, kinds, labels = [], [], []
        for entry in entries:
            names.append(entry[0])
            kinds.append(VarKind(entry[1]))
            labels.append(entry[2] if len(entry) > 2 else entry[0])
        return cls(tuple(names), tuple(kinds), tuple(labels))

    @classmethod
    def ambient(cls, n: int, prefix: str = "x") -> "VarRegistry":
        names = tuple(f"{prefix}{i + 1}" for i in range(n))
        return cls(names, (VarKind.AMBIENT,) * n)

    @cached_property
    def ring(self) -> PolyRing:
        return PolyRing(self.names, QQ, grevlex)

    @property
    def zero(self) -> MultiPoly:
        return self.ring.zero

    @property
    def one(self) -> MultiPoly:
        return self.ring.one

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise RegistryMismatch(f"Variable {name!r} is not in registry {self.names}")

    def gen(self, name: str) -> MultiPoly:
        return self.ring.gens[self.index(name)]

    def kind(self, name: str) -> VarKind:
        return self.kinds[self.index(name)]

    def label(self, name: str) -> str:
        return self.labels[self.index(name)]

    def names_of_kind(self, kind: VarKind) -> List[str]:
        return [n for n, k in zip(self.names, self.kinds) if k == kind]

    def label_map(self) -> Dict[str, str]:
        return dict(zip(self.names, self.labels))

    def entries(self) -> List[Tuple[str, VarKind, str]]:
        return list(zip(self.names, self.kinds, self.labels))

    def poly(self, terms: Mapping[Tuple[int, ...], Scalar]) -> MultiPoly:
        """Build a polynomial from an exponent-vector map."""
        ring = self.ring
        for monom in terms:
            if len(monom) != len(self):
                raise RegistryMismatch(f"Exponent vector {monom} does not match {len(self)} variables")
        return ring.from_dict({tuple(m): to_rational(c) for m, c in terms.items() if to_rational(c)})

    def retag(self, p: MultiPoly) -> MultiPoly:
        """Move p into this registry's ring, matching variables by name."""
        if p.ring == self.ring:
            return p
        source = [str(s) for s in p.ring.symbols]
        positions = [self.index(name) for name in source]
        out = {}
        for monom, coef in p.items():
            target = [0] * len(self)
            for pos, e in zip(positions, monom):
                target[pos] += e
            out[tuple(target)] = coef
        return self.ring.from_dict(out)


def _check_same_ring(a: MultiPoly, b: MultiPoly):
    if a.ring != b.ring:
        raise RegistryMismatch(
            f"Polynomials over {tuple(map(str, a.ring.symbols))} and {tuple(map(str, b.ring.symbols))}"
        )


def occurring_indices(p: MultiPoly) -> set:
    used = set()
    for monom in p.keys():
        used.update(i for i, e in enumerate(monom) if e)
    return used


def degree_in(p: MultiPoly, index: int) -> int:
    return max((m[index] for m in p.keys()), default=0)


def total_degree(p: MultiPoly) -> int:
    return max((sum(m) for m in p.keys()), default=0)


def grevlex_leading(p: MultiPoly):
    """Leading (monomial, coefficient) under graded reverse lex, whatever the ring order."""
    monom = max(p.keys(), key=grevlex)
    return monom, p[monom]


def normalizer(p: MultiPoly):
    """The scalar k making k*p integer-primitive with positive grevlex leading coefficient."""
    if not p:
        return QQ(1)
    common = 1
    for coef in p.values():
        den = rational_parts(coef)[1]
        common = common * den // gcd(common, den)
    content = 0
    for coef in p.values():
        num, den = rational_parts(coef)
        content = gcd(content, abs(num * (common // den)))
    k = QQ(common, content)
    if grevlex_leading(p)[1] < 0:
        k = -k
    return k


def primitive_normal(p: MultiPoly) -> MultiPoly:
    if not p:
        return p
    return p.mul_ground(normalizer(p))


def poly_arith(a: MultiPoly, b: Optional[MultiPoly], op: str, k: int = 0) -> MultiPoly:
    """Exact add, sub, mul of two polynomials, or pow of the first."""
    if op == "pow":
        if k < 0:
            raise ValueError(f"Negative exponent {k} for polynomial power")
        return a ** k
    _check_same_ring(a, b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"Unknown polynomial operation: {op}")


def _gcd_by_remainder_sequence(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    ring = a.ring
    gens = ring.symbols
    g = Poly(a.as_expr(), *gens, domain=QQ).gcd(Poly(b.as_expr(), *gens, domain=QQ))
    return ring.from_dict(g.as_dict())


def gcd_multivar(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    """Greatest common divisor, integer-primitive with positive leading coefficient."""
    _check_same_ring(a, b)
    if not a and not b:
        return a.ring.zero
    try:
        g = a.gcd(b)
    except HeuristicGCDFailed:
        logger.debug("Heuristic gcd failed, falling back to remainder sequences")
        g = _gcd_by_remainder_sequence(a, b)
    return primitive_normal(g)


def lcm_poly(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    if not a or not b:
        return a.ring.zero
    return primitive_normal((a * b).exquo(gcd_multivar(a, b)))


@dataclass(frozen=True, eq=False)
class RatFunc:
    """A reduced fraction num/den over a registry.

    The denominator is integer-primitive with positive leading coefficient under
    grevlex, and zero is stored as 0/1.
    """

    registry: VarRegistry
    num: MultiPoly
    den: Optional[MultiPoly] = None

    def __post_init__(self):
        ring = self.registry.ring
        num = _coerce(self.num, ring)
        den = ring.one if self.den is None else _coerce(self.den, ring)
        if not den:
            raise SubstitutionDenominatorVanishes("Rational function with zero denominator")
        if not num:
            num, den = ring.zero, ring.one
        else:
            if get_settings().reduce_fractions:
                g = gcd_multivar(num, den)
                if g != ring.one:
                    num, den = num.exquo(g), den.exquo(g)
            k = normalizer(den)
            num, den = num.mul_ground(k), den.mul_ground(k)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    @classmethod
    def const(cls, registry: VarRegistry, value) -> "RatFunc":
        return cls(registry, registry.ring(to_rational(value)))

    @classmethod
    def var(cls, registry: VarRegistry, name: str) -> "RatFunc":
        return cls(registry, registry.gen(name))

    def _lift(self, other) -> "RatFunc":
        if isinstance(other, RatFunc):
            if other.registry != self.registry:
                raise RegistryMismatch(
                    f"Rational functions over {self.registry.names} and {other.registry.names}"
                )
            return other
        if isinstance(other, PolyElement):
            return RatFunc(self.registry, other)
        return RatFunc.const(self.registry, other)

    def __add__(self, other) -> "RatFunc":
        o = self._lift(other)
        if self.den == o.den:
            return RatFunc(self.registry, self.num + o.num, self.den)
        return RatFunc(self.registry, self.num * o.den + o.num * self.den, self.den * o.den)

    __radd__ = __add__

    def __neg__(self) -> "RatFunc":
        return RatFunc(self.registry, -self.num, self.den)

    def __sub__(self, other) -> "RatFunc":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "RatFunc":
        return self._lift(other) - self

    def __mul__(self, other) -> "RatFunc":
        o = self._lift(other)
        return RatFunc(self.registry, self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def inverse(self) -> "RatFunc":
        if not self.num:
            raise SubstitutionDenominatorVanishes("Division by the zero rational function")
        return RatFunc(self.registry, self.den, self.num)

    def __truediv__(self, other) -> "RatFunc":
        return self * self._lift(other).inverse()

    def __rtruediv__(self, other) -> "RatFunc":
        return self._lift(other) * self.inverse()

    def __pow__(self, k: int) -> "RatFunc":
        if k < 0:
            return self.inverse() ** (-k)
        return RatFunc(self.registry, self.num ** k, self.den ** k)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatFunc):
            try:
                other = self._lift(other)
            except (RegistryMismatch, TypeError, ExpressionSyntaxError):
                return False
        return self.registry == other.registry and self.num == other.num and self.den == other.den

    def __hash__(self) -> int:
        return hash((self.registry, frozenset(self.num.items()), frozenset(self.den.items())))

    def __repr__(self) -> str:
        return f"RatFunc({format_ratfunc(self)})"

    @property
    def is_zero(self) -> bool:
        return not self.num

    @property
    def is_polynomial(self) -> bool:
        return self.den == self.registry.one

    def variables(self) -> List[str]:
        used = occurring_indices(self.num) | occurring_indices(self.den)
        return [self.registry.names[i] for i in sorted(used)]

    def degree_in(self, name: str) -> int:
        i = self.registry.index(name)
        return max(degree_in(self.num, i), degree_in(self.den, i))

    def total_degree(self) -> int:
        return total_degree(self.num) + total_degree(self.den)

    def canonical(self) -> "RatFunc":
        return RatFunc(self.registry, self.num, self.den)


def _coerce(value, ring: PolyRing) -> MultiPoly:
    if isinstance(value, PolyElement):
        if value.ring != ring:
            raise RegistryMismatch(
                f"Polynomial over {tuple(map(str, value.ring.symbols))} used in registry {tuple(map(str, ring.symbols))}"
            )
        return value
    return ring(to_rational(value))


class Composer:
    """Composes polynomials with rational images of their variables.

    Each source variable is either bound to a RatFunc n/d or sent to a polynomial.
    A polynomial P is mapped to sum c * prod n^e * d^(D-e), which is the numerator
    of P evaluated at the images once every bound variable's denominator is
    raised to the fixed degree D. An optional reducer is applied after every
    product, for computing modulo an ideal.
    """

    def __init__(self, target_ring: PolyRing, images: Sequence, degrees: Sequence[int],
                 reducer: Optional[Callable[[MultiPoly], MultiPoly]] = None):
        self.ring = target_ring
        self.images = list(images)
        self.degrees = list(degrees)
        self.reducer = reducer or (lambda p: p)
        self._powers: Dict[Tuple[int, int, int], MultiPoly] = {}

    def _power(self, index: int, part: int, e: int) -> MultiPoly:
        key = (index, part, e)
        if key in self._powers:
            return self._powers[key]
        image = self.images[index]
        if isinstance(image, RatFunc):
            base = image.num if part == 0 else image.den
        else:
            base = image
        if e == 0:
            value = self.ring.one
        elif e == 1:
            value = self.reducer(base)
        else:
            value = self.reducer(self._power(index, part, e - 1) * base)
        self._powers[key] = value
        return value

    def apply(self, p: MultiPoly) -> MultiPoly:
        out = self.ring.zero
        for monom, coef in p.items():
            term = self.ring(coef)
            for i, e in enumerate(monom):
                image = self.images[i]
                if isinstance(image, RatFunc):
                    fill = self.degrees[i] - e
                    if e:
                        term = self.reducer(term * self._power(i, 0, e))
                    if fill:
                        term = self.reducer(term * self._power(i, 1, fill))
                elif e:
                    term = self.reducer(term * self._power(i, 0, e))
            out += term
        return self.reducer(out)


def substitute(f: RatFunc, bindings: Mapping[str, RatFunc], target: Optional[VarRegistry] = None) -> RatFunc:
    """Compose f with the given bindings; unbound variables pass through by name."""
    if target is None:
        target = next(iter(bindings.values())).registry if bindings else f.registry
    for name, image in bindings.items():
        if name not in f.registry:
            raise RegistryMismatch(f"Binding for {name!r}, which is not a variable of {f.registry.names}")
        if image.registry != target:
            raise RegistryMismatch(f"Binding for {name!r} lives over {image.registry.names}, expected {target.names}")
    images, degrees = [], []
    for i, name in enumerate(f.registry.names):
        if name in bindings:
            images.append(bindings[name])
            degrees.append(max(degree_in(f.num, i), degree_in(f.den, i)))
        elif name in target:
            images.append(target.gen(name))
            degrees.append(0)
        else:
            if degree_in(f.num, i) or degree_in(f.den, i):
                raise RegistryMismatch(f"Unbound variable {name!r} is missing from target registry {target.names}")
            images.append(target.one)
            degrees.append(0)
    composer = Composer(target.ring, images, degrees)
    den = composer.apply(f.den)
    if not den:
        raise SubstitutionDenominatorVanishes(f"Denominator of {format_ratfunc(f)} vanishes after substitution")
    return RatFunc(target, composer.apply(f.num), den)


def compose_numerator(h: MultiPoly, components: Sequence[RatFunc],
                      reducer: Optional[Callable[[MultiPoly], MultiPoly]] = None) -> MultiPoly:
    """Numerator of h evaluated at the components, variables matched by position."""
    if len(h.ring.gens) != len(components):
        raise RegistryMismatch(
            f"Polynomial in {len(h.ring.gens)} variables composed with {len(components)} components"
        )
    registry = components[0].registry
    for comp in components:
        if comp.registry != registry:
            raise RegistryMismatch("Components over different registries")
    degrees = [degree_in(h, i) for i in range(len(components))]
    return Composer(registry.ring, components, degrees, reducer).apply(h)


def _float_point(registry: VarRegistry, point: Mapping[str, float], used: Iterable[int]) -> Dict[int, float]:
    values = {}
    for i in used:
        name = registry.names[i]
        if name not in point:
            raise RegistryMismatch(f"No value supplied for variable {name!r}")
        values[i] = float(point[name])
    return values


def _poly_float(p: MultiPoly, values: Mapping[int, float]) -> float:
    total = 0.0
    for monom, coef in p.items():
        term = float(coef)
        for i, e in enumerate(monom):
            if e:
                term *= values[i] ** e
        total += term
    return total


def evaluate_numeric(f: RatFunc, point: Mapping[str, float]) -> float:
    """Float value of f at point; raises PoleAtPoint near a zero of the denominator."""
    used = occurring_indices(f.num) | occurring_indices(f.den)
    values = _float_point(f.registry, point, used)
    num = _poly_float(f.num, values)
    den = _poly_float(f.den, values)
    if abs(den) < get_settings().pole_threshold * (1.0 + abs(num)):
        raise PoleAtPoint(f"Denominator of {format_ratfunc(f)} vanishes at {dict(point)}")
    return num / den


def poly_on_grid(p: MultiPoly, arrays: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised values of p and the sum of absolute term values."""
    shape = np.broadcast_shapes(*(np.shape(a) for a in arrays)) if arrays else ()
    total = np.zeros(shape)
    magnitude = np.zeros(shape)
    for monom, coef in p.items():
        term = np.full(shape, float(coef))
        for i, e in enumerate(monom):
            if e:
                term = term * np.power(arrays[i], e)
        total += term
        magnitude += np.abs(term)
    return total, magnitude


def evaluate_grid(f: RatFunc, arrays: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised f over broadcast arrays, one per registry variable; returns values and pole mask."""
    num, _ = poly_on_grid(f.num, arrays)
    den, _ = poly_on_grid(f.den, arrays)
    poles = np.abs(den) < get_settings().pole_threshold * (1.0 + np.abs(num))
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(poles, np.nan, num / np.where(poles, 1.0, den))
    return values, poles


def lcm_denominators(fs: Sequence[RatFunc]) -> MultiPoly:
    if not fs:
        raise ValueError("lcm_denominators needs at least one rational function")
    registry = fs[0].registry
    result = registry.one
    for f in fs:
        if f.registry != registry:
            raise RegistryMismatch("Rational functions over different registries")
        result = lcm_poly(result, f.den)
    return result


def split_content(p: MultiPoly, block: Iterable[str]) -> Tuple[MultiPoly, MultiPoly]:
    """Split p into a factor free of the block variables and a block-primitive part."""
    ring = p.ring
    if not p:
        return ring.zero, ring.one
    names = [str(s) for s in ring.symbols]
    block_idx = set()
    for name in block:
        if name not in names:
            raise RegistryMismatch(f"Block variable {name!r} is not in {names}")
        block_idx.add(names.index(name))
    groups: Dict[Tuple[int, ...], Dict[Tuple[int, ...], object]] = {}
    for monom, coef in p.items():
        key = tuple(e if i in block_idx else 0 for i, e in enumerate(monom))
        rest = tuple(0 if i in block_idx else e for i, e in enumerate(monom))
        groups.setdefault(key, {})[rest] = coef
    content = ring.zero
    for coeffs in groups.values():
        content = gcd_multivar(content, ring.from_dict(coeffs))
        if total_degree(content) == 0:
            break
    primitive = p.exquo(content)
    k = normalizer(primitive)
    return content.mul_ground(QQ(1) / k), primitive.mul_ground(k)


def poly_to_json(p: MultiPoly) -> Dict:
    """Polynomial JSON form with terms in descending grevlex order."""
    terms = sorted(p.items(), key=lambda t: grevlex(t[0]), reverse=True)
    return {
        "vars": [str(s) for s in p.ring.symbols],
        "terms": [
            {"coef": "{}/{}".format(*rational_parts(c)), "exps": list(m)} for m, c in terms
        ],
    }


def poly_from_json(data: Mapping, registry: Optional[VarRegistry] = None) -> MultiPoly:
    names = tuple(data["vars"])
    if registry is None:
        registry = VarRegistry(names, (VarKind.AMBIENT,) * len(names))
    elif registry.names != names:
        raise RegistryMismatch(f"JSON variables {names} differ from registry {registry.names}")
    return registry.poly({tuple(t["exps"]): t["coef"] for t in data["terms"]})


def ratfunc_to_json(f: RatFunc) -> Dict:
    return {"num": poly_to_json(f.num), "den": poly_to_json(f.den)}


def _format_monomial(monom: Tuple[int, ...], labels: Sequence[str]) -> str:
    parts = []
    for label, e in zip(labels, monom):
        if e == 1:
            parts.append(label)
        elif e > 1:
            parts.append(f"{label}^{e}")
    return "*".join(parts)


def format_poly(p: MultiPoly, labels: Optional[Mapping[str, str]] = None,
                coef_format: Callable = rational_str) -> str:
    """Human-readable polynomial, e.g. x1^3+3*x1^2*x3-x3."""
    if not p:
        return "0"
    names = [str(s) for s in p.ring.symbols]
    shown = [labels.get(n, n) for n in names] if labels else names
    out = []
    for monom, coef in sorted(p.items(), key=lambda t: grevlex(t[0]), reverse=True):
        body = _format_monomial(monom, shown)
        c = coef_format(coef)
        if not body:
            term = c
        elif c == "1":
            term = body
        elif c == "-1":
            term = "-" + body
        else:
            term = f"{c}*{body}"
        if out and not term.startswith("-"):
            term = "+" + term
        out.append(term)
    return "".join(out)


def _needs_parens(p: MultiPoly, as_denominator: bool) -> bool:
    if len(p) > 1:
        return True
    if not as_denominator:
        return False
    (monom, coef), = p.items()
    factors = sum(1 for e in monom if e) + (0 if coef == 1 else 1)
    return factors > 1 or rational_parts(coef)[1] != 1


def format_ratfunc(f: RatFunc, labels: Optional[Mapping[str, str]] = None,
                   coef_format: Callable = rational_str) -> str:
    labels = labels if labels is not None else f.registry.label_map()
    num = format_poly(f.num, labels, coef_format)
    if f.is_polynomial:
        return num
    den = format_poly(f.den, labels, coef_format)
    if _needs_parens(f.num, False):
        num = f"({num})"
    if _needs_parens(f.den, True):
        den = f"({den})"
    return f"{num}/{den}"
