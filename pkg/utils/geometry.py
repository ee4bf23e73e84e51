import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sympy import Poly, QQ, Rational, Symbol, sturm

from .algebra import (
    MultiPoly,
    RatFunc,
    VarKind,
    compose_numerator,
    evaluate_grid,
    format_ratfunc,
    occurring_indices,
    poly_on_grid,
    primitive_normal,
    rational_str,
    split_content,
    to_rational,
)
from .config import get_settings
from .conversion import ConversionService, RationalParam
from .errors import NamedConstantUnsupported, NonpositiveRadius, RadiusOrderViolated, RegistryMismatch
from .groebner import Ideal, torus_reduce
from .trig_model import HybridParam, PureParam, constant_value, parse_param

logger = logging.getLogger(__name__)


def _radii(R, r) -> Tuple[object, object]:
    R, r = to_rational(R), to_rational(r)
    if R <= 0 or r <= 0:
        raise NonpositiveRadius(f"Radii must be positive, got R={rational_str(R)}, r={rational_str(r)}")
    return R, r


def _cycloid_text(shell, rolling, alpha, sign: str) -> str:
    a = rational_str(alpha)
    k = rational_str(shell)
    r = rational_str(rolling)
    return (
        "signature (2,0,0) vars t1 t2\n"
        f"({k}*sin(t1)*cos(t2) {sign} {r}*sin({a}*t1)*cos(t2), "
        f"{k}*sin(t1)*sin(t2) {sign} {r}*sin({a}*t1)*sin(t2), "
        f"{k}*cos(t1) - {r}*cos({a}*t1))"
    )


def epicycloid_text(R, r) -> str:
    R, r = _radii(R, r)
    return _cycloid_text(R + r, r, 1 + R / r, "-")


def hypocycloid_text(R, r) -> str:
    R, r = _radii(R, r)
    if r >= R:
        raise RadiusOrderViolated(f"Hypocycloids need r < R, got R={rational_str(R)}, r={rational_str(r)}")
    return _cycloid_text(R - r, r, R / r, "+")


def epicycloid(R, r) -> HybridParam:
    """Surface traced by a point of a sphere of radius r rolling on a fixed sphere of radius R."""
    return parse_param(epicycloid_text(R, r))


def hypocycloid(R, r) -> HybridParam:
    """Surface traced by a point of a sphere of radius r rolling inside a fixed sphere of radius R."""
    return parse_param(hypocycloid_text(R, r))


@dataclass
class PointCloud:
    """Sampled points with their parameter values, residuals and the number of skipped pole points."""

    coords: List[str]
    params: List[str]
    points: np.ndarray
    parameters: np.ndarray
    residuals: Optional[np.ndarray] = None
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.parameters, columns=self.params)
        for i, name in enumerate(self.coords):
            df[name] = self.points[:, i]
        if self.residuals is not None:
            for j in range(self.residuals.shape[1]):
                df[f"residual{j + 1}"] = self.residuals[:, j]
        return df

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, float_format="%.12g")

    def to_json(self) -> Dict:
        return {
            "coords": self.coords,
            "params": self.params,
            "points": self.points.tolist(),
            "parameters": self.parameters.tolist(),
            "residuals": None if self.residuals is None else self.residuals.tolist(),
            "skipped": self.skipped,
        }

    @property
    def max_residual(self) -> float:
        if self.residuals is None or not self.residuals.size:
            return 0.0
        return float(np.max(self.residuals))


def relative_residuals(h: MultiPoly, points: np.ndarray) -> np.ndarray:
    """|h(x)| / (1 + sum of |terms of h at x|) per point."""
    columns = [points[:, i] for i in range(points.shape[1])]
    values, magnitude = poly_on_grid(h, columns)
    return np.abs(values) / (1.0 + magnitude)


@dataclass(frozen=True)
class IsolatedRoot:
    """A rational interval holding exactly one real root; lo == hi for an exact rational root."""

    lo: Rational
    hi: Rational
    refined: float
    width: float
    multiplicity: int = 1

    def to_json(self) -> Dict:
        return {
            "lo": str(self.lo),
            "hi": str(self.hi),
            "approx": self.refined,
            "width": self.width,
            "multiplicity": self.multiplicity,
        }


def count_sign_changes(values: Sequence) -> int:
    """Sign changes in a sequence, ignoring zeros."""
    nonzero = [v for v in values if v != 0]
    return sum(1 for a, b in zip(nonzero, nonzero[1:]) if (a > 0) != (b > 0))


def _univariate(p: MultiPoly) -> Tuple[Poly, Symbol]:
    used = occurring_indices(p)
    if len(used) > 1:
        raise RegistryMismatch(f"Root isolation needs a univariate polynomial, got variables {sorted(used)}")
    index = used.pop() if used else 0
    x = Symbol(str(p.ring.symbols[index]))
    terms = {(m[index],): QQ.to_sympy(c) for m, c in p.items()}
    return Poly.from_dict(terms, x, domain=QQ), x


def _cauchy_bound(p: Poly) -> Rational:
    coeffs = p.all_coeffs()
    lead = abs(coeffs[0])
    return 1 + max((abs(c) / lead for c in coeffs[1:]), default=Rational(0))


def _has_root(f: Poly, lo: Rational, hi: Rational) -> bool:
    if lo == hi:
        return f.eval(lo) == 0
    return f.count_roots(lo, hi) > 0


class RootIsolator:
    """Sturm-sequence isolation of real roots with exact bisection refinement."""

    def __init__(self, width=Rational(1, 10 ** 9)):
        self.width = Rational(str(width)) if not isinstance(width, Rational) else width
        if self.width <= 0:
            raise ValueError(f"Root width must be positive, got {width}")

    def _variations(self, sequence: List[Poly], point: Rational) -> int:
        return count_sign_changes([q.eval(point) for q in sequence])

    def _split_point(self, p: Poly, a: Rational, b: Rational) -> Rational:
        """Midpoint of (a, b), nudged off any root of p."""
        mid = (a + b) / 2
        step = (b - a) / 8
        while p.eval(mid) == 0:
            mid += step
            step /= 2
        return mid

    def _refine(self, p: Poly, a: Rational, b: Rational) -> Tuple[Rational, Rational]:
        fa = p.eval(a)
        while b - a > self.width:
            mid = (a + b) / 2
            fm = p.eval(mid)
            if fm == 0:
                return mid, mid
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b = mid
        return a, b

    def isolate(self, p: MultiPoly) -> List[IsolatedRoot]:
        """One interval per distinct real root, sorted by position."""
        if not p:
            raise ValueError("Cannot isolate the roots of the zero polynomial")
        poly, x = _univariate(p)
        if poly.degree() <= 0:
            return []
        squarefree = poly.sqf_part()
        factors = poly.sqf_list()[1]
        sequence = sturm(squarefree)
        bound = _cauchy_bound(squarefree)
        total = self._variations(sequence, -bound) - self._variations(sequence, bound)
        pending = [(-bound, bound, total)]
        isolated: List[Tuple[Rational, Rational]] = []
        while pending:
            a, b, count = pending.pop()
            if count == 0:
                continue
            if count == 1:
                isolated.append((a, b))
                continue
            mid = self._split_point(squarefree, a, b)
            left = self._variations(sequence, a) - self._variations(sequence, mid)
            pending.append((a, mid, left))
            pending.append((mid, b, count - left))
        roots = []
        for a, b in sorted(isolated):
            lo, hi = self._refine(squarefree, a, b)
            fl, fh = squarefree.eval(lo), squarefree.eval(hi)
            assert (lo == hi and fl == 0) or (fl != 0 and fh != 0 and (fl > 0) != (fh > 0)), \
                f"interval [{lo}, {hi}] does not bracket a root"
            multiplicity = next(k for f, k in factors if _has_root(f, lo, hi))
            roots.append(IsolatedRoot(lo, hi, float((lo + hi) / 2), float(hi - lo), multiplicity))
        assert len(roots) == total, "Sturm count differs from isolated intervals"
        logger.debug("Isolated %d real roots of a degree %d polynomial in %s", total, poly.degree(), x)
        return roots


@dataclass
class IntersectionCurve:
    param: str
    root: IsolatedRoot
    curve: RationalParam

    def format(self, digits: int = 10) -> str:
        def approx(q) -> str:
            return f"{float(q):.{digits}g}"

        return "(" + ", ".join(format_ratfunc(c, coef_format=approx) for c in self.curve.components) + ")"


@dataclass
class IntersectionResult:
    condition: MultiPoly
    factors: Dict[str, MultiPoly] = field(default_factory=dict)
    roots: Dict[str, List[IsolatedRoot]] = field(default_factory=dict)
    curves: List[IntersectionCurve] = field(default_factory=list)


class GeometryService:
    """Sampling and intersection on top of the conversion and elimination layers."""

    def __init__(self, threads: Optional[int] = None, width=Rational(1, 10 ** 9)):
        self.threads = threads or get_settings().threads
        self.isolator = RootIsolator(width)

    def sample(self, p: Union[PureParam, RationalParam], ranges: Sequence[Tuple[float, float]],
               counts: Union[int, Sequence[int]], check: Optional[Union[Ideal, Sequence[MultiPoly]]] = None,
               constants: Optional[Mapping[str, float]] = None) -> PointCloud:
        """Evaluate on a uniform grid with inclusive endpoints, skipping poles.

        Ranges are in the coordinates of the original parameters; pure inputs
        are evaluated at t / scales.
        """
        m = len(p.params)
        if len(ranges) != m:
            raise ValueError(f"{len(ranges)} ranges for {m} parameters")
        counts = [counts] * m if isinstance(counts, int) else list(counts)
        if len(counts) == 1 and m > 1:
            counts = counts * m
        if len(counts) != m or min(counts) < 2:
            raise ValueError(f"Need one count >= 2 per parameter, got {counts}")
        axes = [np.linspace(float(a), float(b), k) for (a, b), k in zip(ranges, counts)]
        grid = [g.ravel() for g in np.meshgrid(*axes, indexing="ij")]
        scales = p.scales if isinstance(p, PureParam) else (1,) * m
        point = {name: grid[i] / scales[i] for i, name in enumerate(p.params)}
        arrays = self._registry_arrays(p, point, constants)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            results = list(pool.map(lambda comp: evaluate_grid(comp, arrays), p.components))
        values = np.column_stack([np.broadcast_to(v, grid[0].shape) for v, _ in results])
        poles = np.zeros(grid[0].shape, dtype=bool)
        for _, mask in results:
            poles |= np.broadcast_to(mask, grid[0].shape)
        keep = ~poles & np.all(np.isfinite(values), axis=1)
        points = values[keep]
        parameters = np.column_stack(grid)[keep]
        residuals = None
        if check is not None:
            polys = check.generators if isinstance(check, Ideal) else list(check)
            residuals = np.column_stack([relative_residuals(h, points) for h in polys]) if polys \
                else np.zeros((len(points), 0))
        skipped = int(np.count_nonzero(~keep))
        logger.debug("Sampled %d points, skipped %d", len(points), skipped)
        coords = [f"x{i + 1}" for i in range(len(p.components))]
        return PointCloud(coords, list(p.params), points, parameters, residuals, skipped)

    def _registry_arrays(self, p, point: Mapping[str, np.ndarray], constants: Optional[Mapping[str, float]]):
        if isinstance(p, PureParam):
            return p.registry_values(point, constants)
        values = []
        for name, kind, _ in p.registry.entries():
            values.append(constant_value(name, constants or {}) if kind == VarKind.CONSTANT else point[name])
        return values

    def intersect_condition(self, p: RationalParam, h: MultiPoly) -> MultiPoly:
        """Canonical numerator of h composed with p."""
        num = compose_numerator(h, p.components)
        den = p.registry.one
        for i, comp in enumerate(p.components):
            den = den * comp.den ** max((m[i] for m in h.keys()), default=0)
        return RatFunc(p.registry, num, den).num

    def intersect_condition_trig(self, p: PureParam, h: MultiPoly) -> MultiPoly:
        """Numerator of h composed with p, reduced modulo the torus relations."""
        if p.named_constants:
            raise NamedConstantUnsupported(f"Torus reduction needs numeric coefficients; found {p.named_constants}")
        signature = p.signature
        return primitive_normal(compose_numerator(h, p.components, lambda q: torus_reduce(q, signature)))

    def single_parameter_factors(self, p: RationalParam, condition: MultiPoly) -> Dict[str, MultiPoly]:
        """For each parameter, the factor of the condition involving that parameter alone."""
        factors = {}
        if not condition:
            return factors
        for t in p.params:
            others = [name for name in p.registry.names if name != t]
            content, _ = split_content(condition, others)
            if occurring_indices(content):
                factors[t] = primitive_normal(content)
        return factors

    def intersect(self, p: RationalParam, h: MultiPoly) -> IntersectionResult:
        """Substitute p into h, isolate the real roots of each single-parameter factor and fix them."""
        condition = self.intersect_condition(p, h)
        result = IntersectionResult(condition)
        result.factors = self.single_parameter_factors(p, condition)
        conversion = ConversionService()
        for t, factor in result.factors.items():
            roots = self.isolator.isolate(factor)
            result.roots[t] = roots
            if p.m < 2:
                continue
            for root in roots:
                value = (root.lo + root.hi) / 2
                curve = conversion.specialize(p, {t: str(value)})
                result.curves.append(IntersectionCurve(t, root, curve))
        return result


# For backward compatibility
def sample(p, ranges, counts, check=None, constants=None) -> PointCloud:
    return GeometryService().sample(p, ranges, counts, check, constants)


def isolate_real_roots(p: MultiPoly, width=Rational(1, 10 ** 9)) -> List[IsolatedRoot]:
    return RootIsolator(width).isolate(p)


def intersect_condition(p: RationalParam, h: MultiPoly) -> MultiPoly:
    return GeometryService().intersect_condition(p, h)


def intersect_condition_trig(p: PureParam, h: MultiPoly) -> MultiPoly:
    return GeometryService().intersect_condition_trig(p, h)
