import logging
from dataclasses import dataclass, field
from functools import partial
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

from sympy import QQ
from sympy.polys.orderings import grevlex
from sympy.polys.rings import PolyRing

from .algebra import (
    MultiPoly,
    RatFunc,
    VarKind,
    VarRegistry,
    compose_numerator,
    format_poly,
    lcm_denominators,
    normalizer,
    occurring_indices,
    poly_to_json,
    primitive_normal,
)
from .config import get_settings
from .errors import NamedConstantUnsupported, RegistryMismatch, ResourceBudgetExceeded
from .expression_parser import CIRCULAR, Signature
from .trig_model import PureParam, pure_registry, torus_names

if TYPE_CHECKING:
    from .conversion import RationalParam

logger = logging.getLogger(__name__)

W = "W"


@dataclass(frozen=True)
class MonomialOrder:
    """Lex over a variable permutation, grevlex, or grevlex blocks compared left to right.

    Instances are monomial sort keys, so they can order a sympy PolyRing directly.
    """

    kind: str
    perm: Tuple[int, ...] = ()
    blocks: Tuple[Tuple[int, ...], ...] = ()
    names: Tuple[str, ...] = ()

    def __call__(self, monom: Tuple[int, ...]):
        if self.kind == "grevlex":
            return grevlex(monom)
        if self.kind == "lex":
            return tuple(monom[i] for i in self.perm)
        return tuple(grevlex(tuple(monom[i] for i in block)) for block in self.blocks)

    @classmethod
    def grevlex(cls, registry: VarRegistry) -> "MonomialOrder":
        return cls("grevlex", names=registry.names)

    @classmethod
    def lex(cls, registry: VarRegistry, priority: Sequence[str] = ()) -> "MonomialOrder":
        """Lex with the priority names first, then the rest in registry order."""
        first = [registry.index(n) for n in priority]
        rest = [i for i in range(len(registry)) if i not in first]
        return cls("lex", perm=tuple(first + rest), names=registry.names)

    @classmethod
    def block(cls, registry: VarRegistry, front_blocks: Sequence[Sequence[str]]) -> "MonomialOrder":
        """Elimination order: each front block beats the next, the remaining variables come last."""
        blocks, taken = [], set()
        for block in front_blocks:
            indices = tuple(registry.index(n) for n in block)
            taken.update(indices)
            blocks.append(indices)
        back = tuple(i for i in range(len(registry)) if i not in taken)
        blocks.append(back)
        return cls("block", blocks=tuple(b for b in blocks if b), names=registry.names)

    def describe(self) -> str:
        if self.kind == "grevlex":
            return "grevlex"
        if self.kind == "lex":
            return "lex(" + ">".join(self.names[i] for i in self.perm) + ")"
        return "block(" + ",".join("[" + ",".join(self.names[i] for i in b) + "]" for b in self.blocks) + ")"


def order_ring(registry: VarRegistry, order: MonomialOrder) -> PolyRing:
    if order.names and order.names != registry.names:
        raise RegistryMismatch(f"Order built for {order.names}, used with {registry.names}")
    return PolyRing(registry.names, QQ, order)


def _move(p: MultiPoly, ring: PolyRing) -> MultiPoly:
    """Same variables, different ring (order)."""
    return ring.from_dict(dict(p.items()))


def _primitive_in_order(p: MultiPoly) -> MultiPoly:
    if not p:
        return p
    k = normalizer(p)
    if p.LC * k < 0:
        k = -k
    return p.mul_ground(k)


@dataclass(frozen=True)
class Ideal:
    """Generators over one registry; no generators stands for the zero ideal.

    order records the monomial order an elimination result was computed under.
    """

    registry: VarRegistry
    generators: Tuple[MultiPoly, ...] = ()
    order: Optional["MonomialOrder"] = field(default=None, compare=False)

    def __post_init__(self):
        gens = []
        for g in self.generators:
            g = self.registry.retag(g)
            if g:
                g = primitive_normal(g)
                if g not in gens:
                    gens.append(g)
        object.__setattr__(self, "generators", tuple(gens))

    @property
    def is_zero(self) -> bool:
        return not self.generators

    def __len__(self) -> int:
        return len(self.generators)

    def __iter__(self):
        return iter(self.generators)

    def format(self) -> List[str]:
        return [format_poly(g) for g in self.generators]

    def to_json(self) -> Dict:
        return {
            "order": self.order.describe() if self.order else "grevlex",
            "generators": [poly_to_json(g) for g in self.generators],
        }


@dataclass(frozen=True)
class GroebnerBasis:
    order: MonomialOrder
    registry: VarRegistry
    basis: Tuple[MultiPoly, ...]
    stats: Tuple[Tuple[str, int], ...] = ()

    @property
    def ring(self) -> PolyRing:
        return order_ring(self.registry, self.order)

    def polys(self) -> List[MultiPoly]:
        """Basis elements back in the registry's grevlex ring, integer-primitive."""
        return [primitive_normal(_move(g, self.registry.ring)) for g in self.basis]

    def ideal(self) -> Ideal:
        return Ideal(self.registry, tuple(self.polys()))

    def to_json(self) -> Dict:
        return {"order": self.order.describe(), "basis": [poly_to_json(g) for g in self.polys()]}


def _spoly(f: MultiPoly, g: MultiPoly, lmf, lmg) -> MultiPoly:
    ring = f.ring
    lcm = ring.monomial_lcm(lmf, lmg)
    return f.mul_monom(ring.monomial_div(lcm, lmf)) * g.LC - g.mul_monom(ring.monomial_div(lcm, lmg)) * f.LC


def _select(lmG: List, pairs: Set[Tuple[int, int]], ring: PolyRing) -> Tuple[int, int]:
    """Normal strategy: the pair whose lcm has least total degree, then least in the ring order, then indices."""
    def key(p):
        lcm = ring.monomial_lcm(lmG[p[0]], lmG[p[1]])
        return sum(lcm), ring.order(lcm), p
    return min(pairs, key=key)


def _update(G: List[MultiPoly], lmG: List, pairs: Set[Tuple[int, int]], f: MultiPoly):
    """Gebauer-Moeller update of the pair set when f joins the basis."""
    ring = f.ring
    lcm, mul, div = ring.monomial_lcm, ring.monomial_mul, ring.monomial_div
    lmf = f.LM
    pairs = {p for p in pairs if (not div(lcm(lmG[p[0]], lmG[p[1]]), lmf)
                                  or lcm(lmG[p[0]], lmG[p[1]]) == lcm(lmG[p[0]], lmf)
                                  or lcm(lmG[p[0]], lmG[p[1]]) == lcm(lmG[p[1]], lmf))}
    by_lcm: Dict[Tuple[int, ...], List[int]] = {}
    for i in range(len(G)):
        by_lcm.setdefault(lcm(lmG[i], lmf), []).append(i)
    minimal = []
    for L in sorted(by_lcm, key=ring.order):
        if all(not div(L, M) for M in minimal):
            minimal.append(L)
    new = set()
    for L in minimal:
        # coprime leading monomials reduce to zero
        if not any(lcm(lmG[i], lmf) == mul(lmG[i], lmf) for i in by_lcm[L]):
            new.add((min(by_lcm[L]), len(G)))
    return G + [f], lmG + [lmf], pairs | new


def _minimalize(G: List[MultiPoly]) -> List[MultiPoly]:
    ring = G[0].ring
    out = []
    for f in sorted(G, key=lambda h: ring.order(h.LM)):
        if all(not ring.monomial_div(f.LM, g.LM) for g in out):
            out.append(f)
    return out


def _interreduce(G: List[MultiPoly]) -> List[MultiPoly]:
    out = []
    for i, g in enumerate(G):
        others = G[:i] + G[i + 1:]
        out.append((g.rem(others) if others else g).monic())
    return out


def buchberger(ideal: Ideal, order: MonomialOrder, pair_budget: Optional[int] = None) -> GroebnerBasis:
    """Reduced Groebner basis of the ideal under the given order."""
    budget = pair_budget or get_settings().pair_budget
    ring = order_ring(ideal.registry, order)
    G: List[MultiPoly] = []
    lmG: List = []
    pairs: Set[Tuple[int, int]] = set()
    for f in ideal.generators:
        G, lmG, pairs = _update(G, lmG, pairs, _move(f, ring).monic())
    stats = {"pairs_reduced": 0, "zero_reductions": 0}
    while pairs:
        if stats["pairs_reduced"] >= budget:
            stats.update(basis_size=len(G), pairs_remaining=len(pairs))
            raise ResourceBudgetExceeded(
                f"Pair budget of {budget} exhausted with {len(pairs)} pairs pending", details=stats
            )
        i, j = _select(lmG, pairs, ring)
        pairs.remove((i, j))
        r = _spoly(G[i], G[j], lmG[i], lmG[j]).rem(G)
        stats["pairs_reduced"] += 1
        if r:
            G, lmG, pairs = _update(G, lmG, pairs, r.monic())
            logger.debug("Basis grew to %d elements, %d pairs pending", len(G), len(pairs))
        else:
            stats["zero_reductions"] += 1
    basis = _interreduce(_minimalize(G)) if G else []
    basis = sorted((_primitive_in_order(g) for g in basis), key=lambda g: ring.order(g.LM))
    stats["basis_size"] = len(basis)
    logger.debug("Groebner basis under %s: %d elements after %d pairs",
                 order.describe(), len(basis), stats["pairs_reduced"])
    return GroebnerBasis(order, ideal.registry, tuple(basis), tuple(sorted(stats.items())))


def normal_form(p: MultiPoly, g: GroebnerBasis) -> MultiPoly:
    """Remainder of p on division by the basis, returned in the registry ring."""
    p = g.registry.retag(p)
    if not g.basis:
        return p
    r = _move(p, g.ring).rem(list(g.basis))
    return _move(r, g.registry.ring)


def is_groebner(g: GroebnerBasis) -> bool:
    """Every S-polynomial of basis pairs reduces to zero."""
    basis = list(g.basis)
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            if _spoly(basis[i], basis[j], basis[i].LM, basis[j].LM).rem(basis):
                return False
    return True


def ideal_contains(a: Ideal, b: Ideal, pair_budget: Optional[int] = None) -> bool:
    """Whether every generator of b lies in a."""
    if a.registry.names != b.registry.names:
        raise RegistryMismatch(f"Ideals over {a.registry.names} and {b.registry.names}")
    if b.is_zero:
        return True
    if a.is_zero:
        return False
    gb = buchberger(a, MonomialOrder.grevlex(a.registry), pair_budget)
    return all(not normal_form(p, gb) for p in b.generators)


def same_ideal(a: Ideal, b: Ideal, pair_budget: Optional[int] = None) -> bool:
    return ideal_contains(a, b, pair_budget) and ideal_contains(b, a, pair_budget)


def _front_blocks(front: Sequence[Union[str, Sequence[str]]]) -> List[List[str]]:
    if all(isinstance(f, str) for f in front):
        return [list(front)] if front else []
    return [[f] if isinstance(f, str) else list(f) for f in front]


def back_registry(registry: VarRegistry, front: Iterable[str]) -> VarRegistry:
    front = set(front)
    return VarRegistry.build([e for e in registry.entries() if e[0] not in front])


def _restrict(p: MultiPoly, registry: VarRegistry, back: VarRegistry) -> MultiPoly:
    keep = [registry.index(n) for n in back.names]
    assert sum(map(sum, p.keys())) == sum(sum(m[i] for i in keep) for m in p.keys()), \
        "front variable survived elimination"
    return back.ring.from_dict({tuple(m[i] for i in keep): c for m, c in p.items()})


def eliminate(ideal: Ideal, front: Sequence[Union[str, Sequence[str]]], order: str = "block",
              pair_budget: Optional[int] = None) -> Ideal:
    """Generators of the ideal intersected with the ring of the non-front variables.

    front is a list of names, or a list of name blocks ordered from most to least
    significant. order is "block" (grevlex inside blocks) or "lex".
    """
    blocks = _front_blocks(front)
    names = [n for block in blocks for n in block]
    registry = ideal.registry
    if order == "lex":
        monomial_order = MonomialOrder.lex(registry, names)
    elif order == "block":
        monomial_order = MonomialOrder.block(registry, blocks)
    else:
        raise ValueError(f"Unknown elimination order: {order}")
    gb = buchberger(ideal, monomial_order, pair_budget)
    back = back_registry(registry, names)
    front_idx = {registry.index(n) for n in names}
    kept = [p for p in gb.polys() if not (occurring_indices(p) & front_idx)]
    result = Ideal(back, tuple(_restrict(p, registry, back) for p in kept), monomial_order)
    logger.debug("Eliminated %s: %d of %d basis elements kept", names, len(kept), len(gb.basis))
    return result


def torus_reduce(p: MultiPoly, signature: Signature) -> MultiPoly:
    """Normal form modulo the torus relations with each sine above its cosine.

    Rewrites s^2 -> 1 - c^2 and sh^2 -> ch^2 - 1 term by term.
    """
    ring = p.ring
    names = [str(s) for s in ring.symbols]
    rules = []
    for i in list(signature.circular) + list(signature.hyperbolic):
        cos_name, sin_name = torus_names(signature, i)
        if sin_name not in names:
            continue
        c = ring.gens[names.index(cos_name)] if cos_name in names else None
        if c is None:
            raise RegistryMismatch(f"Ring has {sin_name} but not {cos_name}")
        square = 1 - c ** 2 if signature.kind_of(i) == CIRCULAR else c ** 2 - 1
        rules.append((names.index(sin_name), square))
    if not rules:
        return p
    powers: Dict[Tuple[int, int], MultiPoly] = {}
    out = ring.zero
    for monom, coef in p.items():
        base = list(monom)
        factor = ring.one
        for idx, square in rules:
            e = monom[idx]
            if e >= 2:
                key = (idx, e // 2)
                if key not in powers:
                    powers[key] = square ** (e // 2)
                factor = factor * powers[key]
                base[idx] = e % 2
        out += ring({tuple(base): coef}) * factor
    return out


def torus_ideal(signature: Signature, registry: Optional[VarRegistry] = None) -> Ideal:
    """Circle relations c^2+s^2-1 and hyperbola relations ch^2-sh^2-1; no generators when m1 = m2 = 0."""
    if registry is None:
        registry = pure_registry(signature, [f"t{i + 1}" for i in range(signature.m)])
    gens = []
    for i in list(signature.circular) + list(signature.hyperbolic):
        cos_name, sin_name = torus_names(signature, i)
        c, s = registry.gen(cos_name), registry.gen(sin_name)
        if signature.kind_of(i) == CIRCULAR:
            gens.append(c ** 2 + s ** 2 - 1)
        else:
            gens.append(c ** 2 - s ** 2 - 1)
    return Ideal(registry, tuple(gens))


def torus_basis(signature: Signature, registry: VarRegistry) -> GroebnerBasis:
    """The torus relations already form a Groebner basis under lex with sines first."""
    sines = [torus_names(signature, i)[1] for i in list(signature.circular) + list(signature.hyperbolic)]
    order = MonomialOrder.lex(registry, sines)
    ring = order_ring(registry, order)
    basis = tuple(_primitive_in_order(_move(g, ring)) for g in torus_ideal(signature, registry).generators)
    return GroebnerBasis(order, registry, basis)


def _check_constants(registry: VarRegistry, components: Sequence[RatFunc]):
    used = set()
    for comp in components:
        used.update(comp.variables())
    named = [n for n in registry.names_of_kind(VarKind.CONSTANT) if n in used]
    if named:
        raise NamedConstantUnsupported(f"Implicitization needs numeric coefficients; found constants {named}")


def _elimination_setup(registry: VarRegistry, components: Sequence[RatFunc]):
    """Registry [W] + parameters + x1..xn and the generators q_i*x_i - p_i, W*lcm(q)-1."""
    n = len(components)
    ambient = VarRegistry.ambient(n)
    inner = registry.entries()
    big = VarRegistry.build([(W, VarKind.RABINOWITSCH)] + inner + ambient.entries())
    gens = []
    for i, comp in enumerate(components):
        x = big.gen(ambient.names[i])
        gens.append(big.retag(comp.den) * x - big.retag(comp.num))
    denominators = lcm_denominators(list(components))
    if any(sum(m) for m in denominators.keys()):
        gens.append(big.gen(W) * big.retag(denominators) - 1)
    return big, ambient, [e[0] for e in inner], gens


def _to_ambient(result: Ideal, ambient: VarRegistry) -> Ideal:
    return Ideal(ambient, tuple(ambient.retag(g) for g in result.generators), result.order)


class ImplicitizationService:
    """Elimination-based implicitization for rational and pure trigonometric parametrizations."""

    def __init__(self, order: str = "block", pair_budget: Optional[int] = None):
        if order not in ("block", "lex"):
            raise ValueError(f"Unknown elimination order: {order}")
        self.order = order
        self.pair_budget = pair_budget

    def eliminate(self, ideal: Ideal, front: Sequence[Union[str, Sequence[str]]]) -> Ideal:
        return eliminate(ideal, front, self.order, self.pair_budget)

    def implicitize_rational(self, p: "RationalParam") -> Ideal:
        """Option 1: eliminate W and the parameters from q_i*x_i - p_i and W*lcm(q)-1."""
        _check_constants(p.registry, p.components)
        big, ambient, inner, gens = _elimination_setup(p.registry, p.components)
        logger.debug("Implicitizing rational parametrization with %d generators", len(gens))
        result = self.eliminate(Ideal(big, tuple(gens)), [[W], inner])
        return _to_ambient(result, ambient)

    def implicitize_trig(self, p: PureParam) -> Ideal:
        """Option 2: as option 1 over the torus coordinates, with the torus relations adjoined."""
        _check_constants(p.registry, p.components)
        big, ambient, inner, gens = _elimination_setup(p.registry, p.components)
        gens += [big.retag(g) for g in torus_ideal(p.signature, p.registry).generators]
        logger.debug("Implicitizing pure parametrization with %d generators", len(gens))
        result = self.eliminate(Ideal(big, tuple(gens)), [[W], inner])
        return _to_ambient(result, ambient)

    def verify(self, p: Union[PureParam, "RationalParam"], candidates: Union[Ideal, Sequence[MultiPoly]]) -> List[bool]:
        """Whether each candidate vanishes on the parametrization; torus relations apply for pure input."""
        polys = candidates.generators if isinstance(candidates, Ideal) else list(candidates)
        reducer = None
        if isinstance(p, PureParam):
            reducer = partial(torus_reduce, signature=p.signature)
        out = []
        for h in polys:
            if len(h.ring.gens) != len(p.components):
                raise RegistryMismatch(
                    f"Candidate in {len(h.ring.gens)} variables for a parametrization with {len(p.components)} components"
                )
            out.append(not compose_numerator(h, p.components, reducer))
        return out


def groebner_basis_of(polys: Sequence[MultiPoly], registry: VarRegistry, order: str = "lex",
                      pair_budget: Optional[int] = None) -> GroebnerBasis:
    """Basis of the ideal generated by polys; lex follows the registry order."""
    if order == "lex":
        monomial_order = MonomialOrder.lex(registry)
    elif order in ("grevlex", "block"):
        monomial_order = MonomialOrder.grevlex(registry)
    else:
        raise ValueError(f"Unknown order: {order}")
    return buchberger(Ideal(registry, tuple(polys)), monomial_order, pair_budget)


# For backward compatibility
def implicitize_rational(p: "RationalParam", order: str = "block") -> Ideal:
    return ImplicitizationService(order).implicitize_rational(p)


def implicitize_trig(p: PureParam, order: str = "block") -> Ideal:
    return ImplicitizationService(order).implicitize_trig(p)


def verify_implicit(p: Union[PureParam, "RationalParam"], candidates: Union[Ideal, Sequence[MultiPoly]]) -> List[bool]:
    return ImplicitizationService().verify(p, candidates)
