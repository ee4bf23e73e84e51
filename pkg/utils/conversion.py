import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from sympy import Matrix, QQ

from .algebra import (
    MultiPoly,
    RatFunc,
    VarKind,
    VarRegistry,
    evaluate_grid,
    format_ratfunc,
    occurring_indices,
    ratfunc_to_json,
    substitute,
    total_degree,
)
from .config import get_settings
from .errors import (
    AbsentParameter,
    ExpressionSyntaxError,
    IdenticallyUndefined,
    RegistryMismatch,
    SubstitutionDenominatorVanishes,
)
from .expression_parser import CIRCULAR, MONOMIAL, Signature
from .groebner import GroebnerBasis, normal_form, torus_basis
from .trig_model import (
    PureParam,
    apply_doubling,
    constant_value,
    parse_param,
    convert_pure,
    torus_entries,
    torus_names,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RationalParam:
    """Rational functions in the parameters (and named constants)."""

    registry: VarRegistry
    params: Tuple[str, ...]
    components: Tuple[RatFunc, ...]

    def __post_init__(self):
        for comp in self.components:
            if comp.registry != self.registry:
                raise RegistryMismatch("Rational components must share one registry")
        used = set()
        for comp in self.components:
            used.update(comp.variables())
        missing = [t for t in self.params if t not in used]
        if missing:
            raise AbsentParameter(f"Parameters {', '.join(missing)} do not appear")

    @property
    def m(self) -> int:
        return len(self.params)

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def constants(self) -> Tuple[str, ...]:
        return _base_constants(self.registry)

    def format(self) -> str:
        return "(" + ", ".join(format_ratfunc(c) for c in self.components) + ")"

    def header_line(self) -> str:
        line = f"signature (0,0,{self.m}) vars {' '.join(self.params)}"
        if self.constants:
            line += f" constants {' '.join(self.constants)}"
        return line

    def to_json(self) -> Dict:
        return {
            "params": list(self.params),
            "components": [ratfunc_to_json(c) for c in self.components],
            "text": self.format(),
        }

    def evaluate(self, point: Mapping[str, object], constants: Optional[Mapping[str, float]] = None) -> Tuple:
        values = []
        for name, kind, _ in self.registry.entries():
            if kind == VarKind.CONSTANT:
                values.append(constant_value(name, constants or {}))
            else:
                values.append(point[name])
        return tuple(evaluate_grid(c, values)[0] for c in self.components)


def _base_constants(registry: VarRegistry) -> Tuple[str, ...]:
    out = []
    for name in registry.names_of_kind(VarKind.CONSTANT):
        for prefix in ("cosh_", "sinh_", "cos_", "sin_"):
            if name.startswith(prefix):
                name = name[len(prefix):]
                break
        if name not in out:
            out.append(name)
    return tuple(out)


def parse_rational(text: str) -> RationalParam:
    """Parse a parametrization whose signature is (0,0,m)."""
    pure = convert_pure(parse_param(text))
    if pure.signature.m1 or pure.signature.m2:
        raise ExpressionSyntaxError(f"Rational parametrizations need signature (0,0,m), got {pure.signature}")
    return RationalParam(pure.registry, pure.params, pure.components)


@dataclass(frozen=True)
class TorusMaps:
    """M sends parameters onto the hybrid torus, L inverts it, psi names the torus coordinates."""

    signature: Signature
    params: Tuple[str, ...]
    param_registry: VarRegistry
    torus_registry: VarRegistry
    M: Dict[str, RatFunc]
    L: Dict[str, RatFunc]
    psi: Dict[str, Tuple[str, ...]]

    def to_json(self) -> Dict:
        return {
            "signature": list(self.signature.as_tuple()),
            "M": {name: ratfunc_to_json(f) for name, f in self.M.items()},
            "L": {name: ratfunc_to_json(f) for name, f in self.L.items()},
            "psi": {name: list(coords) for name, coords in self.psi.items()},
        }


def build_torus_maps(signature: Signature, params: Optional[Sequence[str]] = None) -> TorusMaps:
    params = tuple(params or (f"t{i + 1}" for i in range(signature.m)))
    if len(params) != signature.m:
        raise RegistryMismatch(f"{len(params)} parameter names for signature {signature}")
    param_registry = VarRegistry.build([(t, VarKind.PARAM) for t in params])
    torus_registry = VarRegistry.build(torus_entries(signature, params))
    M: Dict[str, RatFunc] = {}
    L: Dict[str, RatFunc] = {}
    psi: Dict[str, Tuple[str, ...]] = {}
    for i, t in enumerate(params):
        kind = signature.kind_of(i)
        tv = RatFunc.var(param_registry, t)
        if kind == MONOMIAL:
            M[t] = tv
            L[t] = RatFunc.var(torus_registry, t)
            psi[t] = (t,)
            continue
        cos_name, sin_name = torus_names(signature, i)
        c = RatFunc.var(torus_registry, cos_name)
        s = RatFunc.var(torus_registry, sin_name)
        if kind == CIRCULAR:
            M[cos_name] = 2 * tv / (tv ** 2 + 1)
            M[sin_name] = (tv ** 2 - 1) / (tv ** 2 + 1)
            L[t] = c / (1 - s)
        else:
            M[cos_name] = (tv ** 2 + 1) / (2 * tv)
            M[sin_name] = (tv ** 2 - 1) / (2 * tv)
            L[t] = 1 / (c - s)
        psi[t] = (cos_name, sin_name)
    for i, t in enumerate(params):
        assert substitute(L[t], M, param_registry) == RatFunc.var(param_registry, t), f"L(M({t})) != {t}"
        if signature.kind_of(i) != MONOMIAL:
            cos_name, sin_name = psi[t]
            sign = 1 if signature.kind_of(i) == CIRCULAR else -1
            assert M[cos_name] ** 2 + sign * M[sin_name] ** 2 == 1, f"M({t}) leaves the torus"
    return TorusMaps(signature, params, param_registry, torus_registry, M, L, psi)


def _candidate_monomials(width: int, indices: Sequence[int], degree: int,
                         leads: Sequence[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
    """Standard monomials of total degree <= degree in the given variables."""
    out = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(indices, d):
            monom = [0] * width
            for i in combo:
                monom[i] += 1
            monom = tuple(monom)
            if not any(all(a >= b for a, b in zip(monom, lead)) for lead in leads):
                out.append(monom)
    return out


def _search_lower_degree(num: MultiPoly, den: MultiPoly, basis: GroebnerBasis) -> Optional[Tuple[MultiPoly, MultiPoly]]:
    """Find c/d with c*den - num*d in the ideal and total degree below that of num/den."""
    settings = get_settings()
    ring = num.ring
    width = len(ring.gens)
    current = total_degree(num) + total_degree(den)
    indices = sorted(occurring_indices(num) | occurring_indices(den))
    leads = [g.LM for g in basis.basis]
    for degree in range(0, settings.simplify_degree_bound + 1):
        if 2 * degree >= current:
            return None
        monoms = _candidate_monomials(width, indices, degree, leads)
        if 2 * len(monoms) > settings.simplify_max_unknowns:
            logger.debug("Torus simplification stopped at degree %d with %d unknowns", degree, 2 * len(monoms))
            return None
        columns = [normal_form(ring({m: 1}) * den, basis) for m in monoms]
        columns += [-normal_form(ring({m: 1}) * num, basis) for m in monoms]
        rows = sorted({m for col in columns for m in col.keys()})
        matrix = Matrix(len(rows), len(columns),
                        lambda r, c: QQ.to_sympy(columns[c].get(rows[r], QQ(0))))
        best = None
        for vec in matrix.nullspace():
            d_part = vec[len(monoms):]
            if not any(d_part):
                continue
            c_poly = ring.from_dict({m: QQ.from_sympy(v) for m, v in zip(monoms, vec[:len(monoms)]) if v})
            d_poly = ring.from_dict({m: QQ.from_sympy(v) for m, v in zip(monoms, d_part) if v})
            key = (total_degree(c_poly) + total_degree(d_poly), len(c_poly) + len(d_poly))
            if best is None or key < best[0]:
                best = (key, c_poly, d_poly)
        if best is not None:
            return best[1], best[2]
    return None


def simplify_modulo(f: RatFunc, basis: GroebnerBasis) -> RatFunc:
    """A fraction equal to f modulo the ideal of the basis, of no larger degree."""
    if basis.registry != f.registry:
        raise RegistryMismatch(f"Basis over {basis.registry.names}, function over {f.registry.names}")
    num, den = normal_form(f.num, basis), normal_form(f.den, basis)
    if not den:
        raise IdenticallyUndefined(f"Denominator of {format_ratfunc(f)} vanishes modulo the torus relations")
    current = RatFunc(f.registry, num, den)
    for _ in range(4):
        num, den = normal_form(current.num, basis), normal_form(current.den, basis)
        reduced = RatFunc(f.registry, num, den)
        if reduced == current:
            break
        current = reduced
    if current.is_zero or current.is_polynomial:
        return current
    found = _search_lower_degree(current.num, current.den, basis)
    if found is None:
        return current
    logger.debug("Simplified %s to degree %d", format_ratfunc(current), sum(map(total_degree, found)))
    return RatFunc(f.registry, *found)


def _lift(f: RatFunc, registry: VarRegistry) -> RatFunc:
    return RatFunc(registry, registry.retag(f.num), registry.retag(f.den))


class ConversionService:
    """Trig/rational conversions over the hybrid torus."""

    def __init__(self, simplify: bool = True):
        self.simplify = simplify

    def trig_to_rational(self, p: PureParam) -> RationalParam:
        """Substitute the torus parametrization M into a pure parametrization."""
        maps = build_torus_maps(p.signature, p.params)
        constants = [e for e in p.registry.entries() if e[1] == VarKind.CONSTANT]
        target = VarRegistry.build([(t, VarKind.PARAM) for t in p.params] + constants)
        bindings = {name: _lift(image, target) for name, image in maps.M.items()
                    if p.registry.kind(name) == VarKind.TORUS}
        components = tuple(substitute(c, bindings, target) for c in p.components)
        logger.debug("Rationalized %d components over %s", len(components), target.names)
        return RationalParam(target, p.params, components)

    def rational_to_trig(self, p: RationalParam, target: Signature) -> PureParam:
        """Substitute t -> c/(1-s) on circular slots and t -> ch+sh on hyperbolic slots."""
        if target.m != p.m:
            raise RegistryMismatch(f"Signature {target} has {target.m} parameters, parametrization has {p.m}")
        constants = [e for e in p.registry.entries() if e[1] == VarKind.CONSTANT]
        registry = VarRegistry.build(torus_entries(target, p.params) + constants)
        bindings = {}
        for i, t in enumerate(p.params):
            kind = target.kind_of(i)
            if kind == MONOMIAL:
                continue
            cos_name, sin_name = torus_names(target, i)
            c, s = RatFunc.var(registry, cos_name), RatFunc.var(registry, sin_name)
            bindings[t] = c / (1 - s) if kind == CIRCULAR else c + s
        try:
            components = tuple(substitute(comp, bindings, registry) for comp in p.components)
        except SubstitutionDenominatorVanishes as e:
            raise IdenticallyUndefined(f"Rational parametrization is undefined on the torus: {str(e)}")
        components = self._reduce(components, target, registry)
        components, doubled = apply_doubling(target, p.params, registry, components)
        if doubled:
            components = self._reduce(components, target, registry)
        scales = tuple(2 if i in doubled else 1 for i in range(target.m))
        return PureParam(target, p.params, registry, components, scales, _base_constants(p.registry))

    def _reduce(self, components: Sequence[RatFunc], signature: Signature, registry: VarRegistry) -> Tuple[RatFunc, ...]:
        if not self.simplify or not (signature.m1 or signature.m2):
            return tuple(components)
        basis = torus_basis(signature, registry)
        return tuple(simplify_modulo(c, basis) for c in components)

    def specialize(self, p: RationalParam, values: Mapping[str, object]) -> RationalParam:
        """Fix some parameters to exact rational values."""
        for name in values:
            if name not in p.params:
                raise RegistryMismatch(f"{name} is not a parameter of {p.params}")
        target = VarRegistry.build([e for e in p.registry.entries() if e[0] not in values])
        bindings = {name: RatFunc.const(target, v) for name, v in values.items()}
        components = tuple(substitute(c, bindings, target) for c in p.components)
        return RationalParam(target, tuple(t for t in p.params if t not in values), components)


# For backward compatibility
def trig_to_rational(p: PureParam) -> RationalParam:
    return ConversionService().trig_to_rational(p)


def rational_to_trig(p: RationalParam, target: Signature) -> PureParam:
    return ConversionService().rational_to_trig(p, target)


def specialize(p: RationalParam, values: Mapping[str, object]) -> RationalParam:
    return ConversionService().specialize(p, values)
