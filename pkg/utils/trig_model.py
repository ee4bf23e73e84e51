import logging
from dataclasses import dataclass, field
from math import lcm
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy import Symbol, chebyshevt_poly, chebyshevu_poly

from .algebra import (
    MultiPoly,
    RatFunc,
    VarKind,
    VarRegistry,
    evaluate_grid,
    format_ratfunc,
    occurring_indices,
    rational_parts,
    ratfunc_to_json,
    substitute,
    to_rational,
)
from .errors import AbsentParameter, ExpressionSyntaxError, InvalidPhase, NamedConstantUnsupported
from .expression_parser import (
    CIRCULAR,
    HYPERBOLIC,
    MONOMIAL,
    BinOp,
    ExactPair,
    ExpressionParser,
    Header,
    Name,
    NamedPhase,
    Neg,
    Node,
    Num,
    PhaseTrig,
    Pow,
    Signature,
    Trig,
    ZeroPhase,
    check_kinds,
    collect_names,
    collect_trig,
    parse_components,
    parse_expression,
)

logger = logging.getLogger(__name__)

CHEBYSHEV_REGISTRY = VarRegistry(("x",), (VarKind.PARAM,))
_X = Symbol("x")


def chebyshev_T(n: int) -> MultiPoly:
    """T_n with T_n(cos t) = cos(nt) and T_n(cosh t) = cosh(nt)."""
    if n < 0:
        raise ValueError(f"Chebyshev T needs n >= 0, got {n}")
    return CHEBYSHEV_REGISTRY.ring.from_dict(chebyshevt_poly(n, _X, polys=True).as_dict())


def chebyshev_U(n: int) -> MultiPoly:
    """U_n with U_n(cos t)*sin t = sin((n+1)t), and likewise for cosh/sinh."""
    if n < 0:
        raise ValueError(f"Chebyshev U needs n >= 0, got {n}")
    return CHEBYSHEV_REGISTRY.ring.from_dict(chebyshevu_poly(n, _X, polys=True).as_dict())


def _univariate_into(p: MultiPoly, registry: VarRegistry, name: str) -> MultiPoly:
    idx = registry.index(name)
    width = len(registry)
    return registry.ring.from_dict({
        tuple(e if i == idx else 0 for i in range(width)): c for (e,), c in p.items()
    })


def torus_names(signature: Signature, index: int) -> Tuple[str, str]:
    """Registry names of the coordinate pair for a circular or hyperbolic parameter."""
    kind = signature.kind_of(index)
    if kind == CIRCULAR:
        return f"c{index + 1}", f"s{index + 1}"
    if kind == HYPERBOLIC:
        return f"ch{index + 1}", f"sh{index + 1}"
    raise ValueError(f"Parameter {index + 1} is monomial and has no torus coordinates")


def torus_entries(signature: Signature, params: Sequence[str]) -> List[Tuple[str, VarKind, str]]:
    entries = []
    for i in range(signature.m):
        kind = signature.kind_of(i)
        if kind == MONOMIAL:
            entries.append((params[i], VarKind.PARAM, params[i]))
            continue
        cos_name, sin_name = torus_names(signature, i)
        prefix = "" if kind == CIRCULAR else "h"
        entries.append((cos_name, VarKind.TORUS, f"cos{prefix}({params[i]})"))
        entries.append((sin_name, VarKind.TORUS, f"sin{prefix}({params[i]})"))
    return entries


def pure_registry(signature: Signature, params: Sequence[str], bare: Sequence[str] = (),
                  circular_phases: Sequence[str] = (), hyperbolic_phases: Sequence[str] = ()) -> VarRegistry:
    """Torus coordinates, monomial parameters, then constants and constant phases."""
    entries = torus_entries(signature, params)
    entries += [(name, VarKind.CONSTANT, name) for name in bare]
    for name in circular_phases:
        entries += [(f"cos_{name}", VarKind.CONSTANT, f"cos({name})"),
                    (f"sin_{name}", VarKind.CONSTANT, f"sin({name})")]
    for name in hyperbolic_phases:
        entries += [(f"cosh_{name}", VarKind.CONSTANT, f"cosh({name})"),
                    (f"sinh_{name}", VarKind.CONSTANT, f"sinh({name})")]
    return VarRegistry.build(entries)


@dataclass(frozen=True)
class HybridParam:
    """A parsed, validated hybrid trigonometric parametrization."""

    header: Header
    components: Tuple[Node, ...]
    warnings: Tuple[str, ...] = ()

    @property
    def signature(self) -> Signature:
        return self.header.signature

    @property
    def params(self) -> Tuple[str, ...]:
        return self.header.params

    @property
    def constants(self) -> Tuple[str, ...]:
        return self.header.constants

    @property
    def n(self) -> int:
        return len(self.components)

    def evaluate(self, point: Mapping[str, object], constants: Optional[Mapping[str, float]] = None) -> Tuple:
        """Numeric value of every component; parameters may be floats or numpy arrays."""
        env = dict(constants or {})
        env.update(point)
        return tuple(_evaluate_node(c, env, self.constants) for c in self.components)


def _evaluate_node(node: Node, env: Mapping[str, object], constants: Sequence[str]):
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Name):
        if node.name not in env:
            if node.name in constants:
                raise NamedConstantUnsupported(f"No numeric value for constant {node.name}")
            raise KeyError(node.name)
        return env[node.name]
    if isinstance(node, PhaseTrig):
        if node.name not in env:
            raise NamedConstantUnsupported(f"No numeric value for constant {node.name}")
        return getattr(np, node.func)(env[node.name])
    if isinstance(node, Trig):
        arg = node.arg
        angle = float(arg.alpha) * np.asarray(env[arg.var], dtype=float)
        func = getattr(np, node.func)
        if isinstance(arg.phase, ZeroPhase):
            return func(angle)
        if isinstance(arg.phase, NamedPhase):
            if arg.phase.name not in env:
                raise NamedConstantUnsupported(f"No numeric value for constant {arg.phase.name}")
            omega = -env[arg.phase.name] if arg.phase.negated else env[arg.phase.name]
            return func(angle + omega)
        c, s = float(arg.phase.c), float(arg.phase.s)
        if node.func == "cos":
            return np.cos(angle) * c - np.sin(angle) * s
        if node.func == "sin":
            return np.sin(angle) * c + np.cos(angle) * s
        if node.func == "cosh":
            return np.cosh(angle) * c + np.sinh(angle) * s
        return np.sinh(angle) * c + np.cosh(angle) * s
    if isinstance(node, Neg):
        return -_evaluate_node(node.operand, env, constants)
    if isinstance(node, Pow):
        return _evaluate_node(node.base, env, constants) ** float(node.exponent)
    left = _evaluate_node(node.left, env, constants)
    right = _evaluate_node(node.right, env, constants)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return left / right


def _check_phases(components: Sequence[Node]):
    for comp in components:
        for leaf in collect_trig(comp):
            if not isinstance(leaf, Trig) or not isinstance(leaf.arg.phase, ExactPair):
                continue
            c, s = leaf.arg.phase.c, leaf.arg.phase.s
            if leaf.func in ("sin", "cos") and c * c + s * s != 1:
                raise InvalidPhase(f"pair({c},{s}) in {leaf.func} is not on the unit circle")
            if leaf.func in ("sinh", "cosh") and (c * c - s * s != 1 or c < 1):
                raise InvalidPhase(f"pair({c},{s}) in {leaf.func} is not on the unit hyperbola branch c >= 1")


def _check_presence(header: Header, components: Sequence[Node]):
    used = set()
    for comp in components:
        used.update(n.name for n in collect_names(comp))
        used.update(leaf.arg.var for leaf in collect_trig(comp) if isinstance(leaf, Trig))
    for name in header.params:
        if name not in used:
            raise AbsentParameter(f"Declared parameter {name} never appears")


def _argument_warnings(header: Header, components: Sequence[Node]) -> Tuple[str, ...]:
    """Flag parameters whose cos-type and sin-type leaves use different frequencies or phases."""
    seen: Dict[str, Dict[str, set]] = {}
    for comp in components:
        for leaf in collect_trig(comp):
            if not isinstance(leaf, Trig):
                continue
            side = "cos" if leaf.func.startswith("cos") else "sin"
            seen.setdefault(leaf.arg.var, {"cos": set(), "sin": set()})[side].add(
                (leaf.arg.alpha, leaf.arg.phase)
            )
    warnings = []
    for var in header.params:
        sides = seen.get(var)
        if sides and sides["cos"] and sides["sin"] and sides["cos"] != sides["sin"]:
            message = f"cos-type and sin-type leaves of {var} use different frequencies or phases"
            logger.warning(message)
            warnings.append(message)
    return tuple(warnings)


def validate_param(header: Header, components: Sequence[Node]) -> HybridParam:
    check_kinds(header, components)
    _check_presence(header, components)
    _check_phases(components)
    return HybridParam(header, tuple(components), _argument_warnings(header, components))


def parse_param(text: str) -> HybridParam:
    """Parse a header line and a tuple into a validated HybridParam."""
    header, components = parse_components(text)
    return validate_param(header, components)


def parse_polynomial(text: str, registry: VarRegistry) -> MultiPoly:
    """Parse a polynomial in the registry's variables."""
    node = parse_expression(text, registry.names)
    value = _Flattener(registry, {}).flatten(node)
    if not value.is_polynomial:
        raise ExpressionSyntaxError(f"Not a polynomial: {text.strip()}")
    return value.num


@dataclass(frozen=True)
class PureParam:
    """Components are rational functions of cos/sin, cosh/sinh coordinates and monomial parameters.

    scales holds the diagonal reparametrization: pure(t) = original(scales * t).
    """

    signature: Signature
    params: Tuple[str, ...]
    registry: VarRegistry
    components: Tuple[RatFunc, ...]
    scales: Tuple[int, ...] = ()
    constants: Tuple[str, ...] = ()
    warnings: Tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if not self.scales:
            object.__setattr__(self, "scales", (1,) * self.signature.m)
        for comp in self.components:
            if comp.registry != self.registry:
                raise ExpressionSyntaxError("Pure components must share the pure registry")
        missing = missing_parameters(self.signature, self.params, self.registry, self.components)
        if missing:
            raise AbsentParameter(f"Parameters {', '.join(missing)} do not appear in pure form")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def named_constants(self) -> List[str]:
        return self.registry.names_of_kind(VarKind.CONSTANT)

    def format(self) -> str:
        return "(" + ", ".join(format_ratfunc(c) for c in self.components) + ")"

    def header_line(self) -> str:
        line = f"signature {self.signature} vars {' '.join(self.params)}"
        if self.constants:
            line += f" constants {' '.join(self.constants)}"
        return line

    def to_json(self) -> Dict:
        return {
            "signature": list(self.signature.as_tuple()),
            "params": list(self.params),
            "scales": list(self.scales),
            "components": [ratfunc_to_json(c) for c in self.components],
            "text": self.format(),
            "warnings": list(self.warnings),
        }

    def registry_values(self, point: Mapping[str, object], constants: Optional[Mapping[str, float]] = None) -> List:
        """Numeric value of every registry variable at the given pure parameter values."""
        constants = constants or {}
        values = []
        for name, kind, _ in self.registry.entries():
            if kind == VarKind.TORUS:
                index = int(name.lstrip("chs")) - 1
                t = np.asarray(point[self.params[index]], dtype=float)
                func = {"c": np.cos, "s": np.sin, "ch": np.cosh, "sh": np.sinh}[name.rstrip("0123456789")]
                values.append(func(t))
            elif kind == VarKind.PARAM:
                values.append(np.asarray(point[name], dtype=float))
            else:
                values.append(constant_value(name, constants))
        return values

    def evaluate(self, point: Mapping[str, object], constants: Optional[Mapping[str, float]] = None) -> Tuple:
        values = self.registry_values(point, constants)
        return tuple(evaluate_grid(c, values)[0] for c in self.components)


def constant_value(name: str, constants: Mapping[str, float]) -> float:
    for prefix, func in (("cosh_", np.cosh), ("sinh_", np.sinh), ("cos_", np.cos), ("sin_", np.sin)):
        if name.startswith(prefix):
            base = name[len(prefix):]
            if base not in constants:
                raise NamedConstantUnsupported(f"No numeric value for constant {base}")
            return float(func(constants[base]))
    if name not in constants:
        raise NamedConstantUnsupported(f"No numeric value for constant {name}")
    return float(constants[name])


def missing_parameters(signature: Signature, params: Sequence[str], registry: VarRegistry,
                       components: Sequence[RatFunc]) -> List[str]:
    """Parameters violating the pure occurrence rule: both coordinates of a pair, or the monomial itself."""
    used = set()
    for comp in components:
        used |= occurring_indices(comp.num) | occurring_indices(comp.den)
    used_names = {registry.names[i] for i in used}
    missing = []
    for i in range(signature.m):
        if signature.kind_of(i) == MONOMIAL:
            needed = (params[i],)
        else:
            needed = torus_names(signature, i)
        if not all(name in used_names for name in needed):
            missing.append(params[i])
    return missing


class _Flattener:
    """Turns expression trees into rational functions over the pure registry."""

    def __init__(self, registry: VarRegistry, scales: Mapping[str, object],
                 signature: Optional[Signature] = None, params: Sequence[str] = ()):
        self.registry = registry
        self.scales = scales
        self.signature = signature
        self.params = tuple(params)
        self._multiples: Dict[Tuple[str, int], RatFunc] = {}

    def flatten(self, node: Node) -> RatFunc:
        reg = self.registry
        if isinstance(node, Num):
            return RatFunc.const(reg, node.value)
        if isinstance(node, Name):
            return RatFunc.var(reg, node.name)
        if isinstance(node, PhaseTrig):
            return RatFunc.var(reg, f"{node.func}_{node.name}")
        if isinstance(node, Trig):
            return self._trig_leaf(node)
        if isinstance(node, Neg):
            return -self.flatten(node.operand)
        if isinstance(node, Pow):
            return self.flatten(node.base) ** node.exponent
        left, right = self.flatten(node.left), self.flatten(node.right)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right

    def _multiple(self, index: int, n: int, side: str) -> RatFunc:
        """cos(n t) or sin(n t) (resp. cosh/sinh) through Chebyshev polynomials."""
        key = (f"{index}:{side}", n)
        if key not in self._multiples:
            cos_name, sin_name = torus_names(self.signature, index)
            k = abs(n)
            if side == "cos":
                value = RatFunc(self.registry, _univariate_into(chebyshev_T(k), self.registry, cos_name))
            else:
                u = _univariate_into(chebyshev_U(k - 1), self.registry, cos_name)
                value = RatFunc(self.registry, u * self.registry.gen(sin_name))
                if n < 0:
                    value = -value
            self._multiples[key] = value
        return self._multiples[key]

    def _phase_parts(self, leaf: Trig) -> Tuple[RatFunc, RatFunc]:
        phase = leaf.arg.phase
        if isinstance(phase, ExactPair):
            return RatFunc.const(self.registry, phase.c), RatFunc.const(self.registry, phase.s)
        prefix = "" if leaf.func in ("sin", "cos") else "h"
        c = RatFunc.var(self.registry, f"cos{prefix}_{phase.name}")
        s = RatFunc.var(self.registry, f"sin{prefix}_{phase.name}")
        return c, (-s if phase.negated else s)

    def _trig_leaf(self, leaf: Trig) -> RatFunc:
        index = self.params.index(leaf.arg.var)
        num, den = rational_parts(leaf.arg.alpha * self.scales[leaf.arg.var])
        if den != 1:
            raise ExpressionSyntaxError(f"Frequency of {leaf.arg.var} in {leaf.func} is not integral after scaling")
        cos_n = self._multiple(index, num, "cos")
        sin_n = self._multiple(index, num, "sin")
        if isinstance(leaf.arg.phase, ZeroPhase):
            return cos_n if leaf.func.startswith("cos") else sin_n
        c, s = self._phase_parts(leaf)
        if leaf.func == "cos":
            return cos_n * c - sin_n * s
        if leaf.func == "sin":
            return sin_n * c + cos_n * s
        if leaf.func == "cosh":
            return cos_n * c + sin_n * s
        return sin_n * c + cos_n * s


def _constant_usage(p: HybridParam) -> Tuple[List[str], List[str], List[str]]:
    bare, circular, hyperbolic = set(), set(), set()
    for comp in p.components:
        bare.update(n.name for n in collect_names(comp) if n.name in p.constants)
        for leaf in collect_trig(comp):
            if isinstance(leaf, PhaseTrig):
                name, func = leaf.name, leaf.func
            elif isinstance(leaf.arg.phase, NamedPhase):
                name, func = leaf.arg.phase.name, leaf.func
            else:
                continue
            (circular if func in ("sin", "cos") else hyperbolic).add(name)
    order = list(p.constants)
    return ([c for c in order if c in bare], [c for c in order if c in circular],
            [c for c in order if c in hyperbolic])


def frequency_lcm(p: HybridParam, kind: str) -> int:
    """lcm of the denominators of every frequency attached to parameters of one block."""
    result = 1
    for comp in p.components:
        for leaf in collect_trig(comp):
            if isinstance(leaf, Trig) and p.header.kind_of(leaf.arg.var) == kind:
                result = lcm(result, rational_parts(leaf.arg.alpha)[1])
    return result


def doubling_bindings(signature: Signature, registry: VarRegistry, indices: Sequence[int]) -> Dict[str, RatFunc]:
    """cos/sin (resp. cosh/sinh) of 2t in terms of the coordinates of t."""
    bindings = {}
    for i in indices:
        cos_name, sin_name = torus_names(signature, i)
        c = RatFunc.var(registry, cos_name)
        s = RatFunc.var(registry, sin_name)
        if signature.kind_of(i) == CIRCULAR:
            bindings[cos_name] = c * c - s * s
        else:
            bindings[cos_name] = c * c + s * s
        bindings[sin_name] = 2 * c * s
    return bindings


def apply_doubling(signature: Signature, params: Sequence[str], registry: VarRegistry,
                   components: Sequence[RatFunc]) -> Tuple[Tuple[RatFunc, ...], List[int]]:
    """Double the parameters whose cos/sin pair is incomplete; returns new components and doubled indices."""
    missing = set(missing_parameters(signature, params, registry, components))
    doubled = [i for i in range(signature.m)
               if params[i] in missing and signature.kind_of(i) != MONOMIAL]
    if not doubled:
        return tuple(components), []
    logger.debug("Doubling parameters %s to reach pure form", [params[i] for i in doubled])
    bindings = doubling_bindings(signature, registry, doubled)
    return tuple(substitute(c, bindings, registry) for c in components), doubled


def convert_pure(p: HybridParam) -> PureParam:
    """Rewrite a hybrid parametrization in pure form.

    Phases are expanded by the angle addition formulas, frequencies are made
    integral by scaling each trig block with the lcm of its denominators,
    multiple angles are expanded with Chebyshev polynomials, and parameters whose
    cos/sin (cosh/sinh) pair is still incomplete are doubled.
    """
    sig, params = p.signature, p.params
    ell = {CIRCULAR: frequency_lcm(p, CIRCULAR), HYPERBOLIC: frequency_lcm(p, HYPERBOLIC), MONOMIAL: 1}
    scales = {name: to_rational(ell[sig.kind_of(i)]) for i, name in enumerate(params)}
    bare, circular, hyperbolic = _constant_usage(p)
    registry = pure_registry(sig, params, bare, circular, hyperbolic)
    flattener = _Flattener(registry, scales, sig, params)
    components = tuple(flattener.flatten(c) for c in p.components)
    components, doubled = apply_doubling(sig, params, registry, components)
    factors = [ell[sig.kind_of(i)] * (2 if i in doubled else 1) for i in range(sig.m)]
    logger.debug("Pure form of %s uses scales %s", params, factors)
    return PureParam(sig, params, registry, components, tuple(factors), p.constants, p.warnings)


def hybrid_from_pure(p: PureParam) -> HybridParam:
    """Read a pure parametrization back as an expression tuple."""
    return parse_param(p.header_line() + "\n" + p.format())


def parse_pure(text: str) -> PureParam:
    return convert_pure(parse_param(text))
