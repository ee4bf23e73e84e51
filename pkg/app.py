#!/usr/bin/env python
"""
hybridtrig command-line front end.

Reads a parametrization (header line plus component tuple) and runs one of the
pipeline steps: pure form, trig/rational conversion, implicitization,
verification, epicycloid/hypocycloid generation, sampling and intersection.

    python app.py pure --input samples/example_hybrid.txt
    python app.py implicitize --option 2 --input samples/example_hybrid.txt
    python app.py to-trig --signature 0,1,0 --input samples/circle.txt
    python app.py intersect --input samples/epicycloid_5_1.txt --surface "x1^2+x2^2+x3^2-36"
"""

import argparse
import json
import logging
import sys
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator
from sympy import sympify

from utils.algebra import VarRegistry, format_poly
from utils.config import get_settings, override_settings
from utils.conversion import ConversionService, RationalParam, parse_rational
from utils.errors import HybridTrigError, InvalidJobConfig
from utils.expression_parser import Signature
from utils.geometry import GeometryService, epicycloid_text, hypocycloid_text
from utils.groebner import ImplicitizationService, groebner_basis_of
from utils.trig_model import PureParam, convert_pure, parse_param, parse_polynomial

logger = logging.getLogger("hybridtrig")

SUBCOMMANDS = ("pure", "to-rational", "to-trig", "implicitize", "verify",
               "epicycloid", "hypocycloid", "sample", "intersect")
NEEDS_INPUT = ("pure", "to-rational", "to-trig", "implicitize", "verify", "sample", "intersect")


class JobConfig(BaseModel):
    """One validated CLI invocation."""

    subcommand: Literal[SUBCOMMANDS]
    input: Optional[str] = None
    expr: Optional[str] = None
    signature: Optional[str] = None
    option: Literal[1, 2] = 1
    order: Literal["block", "lex"] = "block"
    pair_budget: Optional[int] = Field(None, gt=0)
    threads: Optional[int] = Field(None, ge=1)
    format: Literal["text", "json", "csv"] = "text"
    radii: Tuple[str, ...] = ()
    candidates: Optional[str] = None
    ranges: List[Tuple[float, float]] = []
    counts: List[int] = []
    check: Optional[str] = None
    rational: bool = False
    constants: Dict[str, float] = {}
    surface: Optional[str] = None
    trig: bool = False
    width: float = Field(1e-9, gt=0)
    implicit: Optional[str] = None

    @model_validator(mode="after")
    def check_consistency(self) -> "JobConfig":
        if self.subcommand in NEEDS_INPUT and (self.input is None) == (self.expr is None):
            raise ValueError("exactly one of --input or --expr is required")
        if self.subcommand == "to-trig" and not self.signature:
            raise ValueError("to-trig needs --signature")
        if self.subcommand == "verify" and not self.candidates:
            raise ValueError("verify needs --candidates")
        if self.subcommand == "intersect" and not self.surface:
            raise ValueError("intersect needs --surface")
        if self.subcommand in ("epicycloid", "hypocycloid") and len(self.radii) != 2:
            raise ValueError(f"{self.subcommand} needs R and r")
        if (self.subcommand == "sample") != bool(self.ranges):
            raise ValueError("--range is given exactly when sampling")
        if self.subcommand == "sample" and not self.counts:
            raise ValueError("sample needs --count")
        if self.format == "csv" and self.subcommand != "sample":
            raise ValueError("csv output is only available for sample")
        return self

    def source_text(self) -> str:
        if self.expr is not None:
            return self.expr
        with open(self.input, "r", encoding="utf-8") as f:
            return f.read()


def _bound(text: str) -> float:
    try:
        return float(sympify(text.strip()))
    except (TypeError, ValueError, SyntaxError) as e:
        raise InvalidJobConfig(f"Range bound {text!r} is not a number: {str(e)}")


def _range(text: str) -> Tuple[float, float]:
    if text.count(":") != 1:
        raise InvalidJobConfig(f"Range must read a:b, got {text!r}")
    a, b = text.split(":")
    return _bound(a), _bound(b)


def _constant(text: str) -> Tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise InvalidJobConfig(f"Constant must read name=value, got {text!r}")
    return name.strip(), _bound(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridtrig", description="Hybrid trigonometric parametrizations")
    parser.add_argument("--format", choices=["text", "json", "csv"], default="text")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    parser.add_argument("--pair-budget", type=int, default=None, help="Buchberger pair budget")
    parser.add_argument("--threads", type=int, default=None, help="sampling worker threads")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def with_input(p):
        p.add_argument("--input", help="parametrization file: header line, then the tuple")
        p.add_argument("--expr", help="inline parametrization text")
        return p

    with_input(sub.add_parser("pure", help="rewrite into pure form"))
    with_input(sub.add_parser("to-rational", help="rationalize a pure parametrization"))
    p = with_input(sub.add_parser("to-trig", help="turn a rational parametrization into a pure one"))
    p.add_argument("--signature", required=True, help="target signature m1,m2,m3")
    p = with_input(sub.add_parser("implicitize", help="implicit equations by elimination"))
    p.add_argument("--option", type=int, choices=[1, 2], default=1,
                   help="1: via the rational form, 2: over the hybrid torus")
    p.add_argument("--order", choices=["block", "lex"], default="block")
    p = with_input(sub.add_parser("verify", help="check candidate implicit equations"))
    p.add_argument("--candidates", required=True, help="file with one polynomial in x1..xn per line")
    for name in ("epicycloid", "hypocycloid"):
        p = sub.add_parser(name, help=f"{name} surface for radii R and r")
        p.add_argument("R")
        p.add_argument("r")
    p = with_input(sub.add_parser("sample", help="evaluate on a parameter grid"))
    p.add_argument("--range", dest="ranges", action="append", default=[], help="a:b per parameter")
    p.add_argument("--count", dest="counts", action="append", type=int, default=[])
    p.add_argument("--check", help="polynomials to evaluate residuals against")
    p.add_argument("--rational", action="store_true", help="sample the rational form")
    p.add_argument("--constant", dest="constants", action="append", default=[], help="name=value")
    p = with_input(sub.add_parser("intersect", help="intersect with an implicit surface"))
    p.add_argument("--surface", required=True, help="polynomial in x1..xn")
    p.add_argument("--trig", action="store_true", help="also report the torus-side condition")
    p.add_argument("--width", type=float, default=1e-9, help="root interval width")
    p.add_argument("--implicit", help="implicit equations of the parametrization, one per line")
    p.add_argument("--order", choices=["block", "lex"], default="block")
    return parser


def config_from_args(args: argparse.Namespace) -> JobConfig:
    values = {k: v for k, v in vars(args).items() if v is not None and k != "verbose"}
    if "R" in values:
        values["radii"] = (values.pop("R"), values.pop("r"))
    values["ranges"] = [_range(r) for r in values.get("ranges", [])]
    values["constants"] = dict(_constant(c) for c in values.get("constants", []))
    try:
        return JobConfig(**values)
    except ValidationError as e:
        raise InvalidJobConfig("; ".join(err["msg"] for err in e.errors()))


def _read_polys(path: str, registry: VarRegistry) -> List:
    with open(path, "r", encoding="utf-8") as f:
        lines = [line.strip() for line in f]
    return [parse_polynomial(line, registry) for line in lines if line and not line.startswith("#")]


def _load_pure(config: JobConfig) -> PureParam:
    return convert_pure(parse_param(config.source_text()))


def _to_rational(pure: PureParam) -> RationalParam:
    if pure.signature.m1 or pure.signature.m2:
        return ConversionService().trig_to_rational(pure)
    return RationalParam(pure.registry, pure.params, pure.components)


def _param_lines(p) -> List[str]:
    return [p.format()]


class Runner:
    """Executes a JobConfig and returns (payload for json, lines for text)."""

    def __init__(self, config: JobConfig):
        self.config = config

    def run(self):
        handler = getattr(self, "do_" + self.config.subcommand.replace("-", "_"))
        return handler()

    def do_pure(self):
        pure = _load_pure(self.config)
        return pure.to_json(), _param_lines(pure)

    def do_to_rational(self):
        rational = _to_rational(_load_pure(self.config))
        return rational.to_json(), _param_lines(rational)

    def do_to_trig(self):
        rational = parse_rational(self.config.source_text())
        pure = ConversionService().rational_to_trig(rational, Signature.parse(self.config.signature))
        return pure.to_json(), _param_lines(pure)

    def do_implicitize(self):
        pure = _load_pure(self.config)
        service = ImplicitizationService(self.config.order, self.config.pair_budget)
        if self.config.option == 1:
            ideal = service.implicitize_rational(_to_rational(pure))
        else:
            ideal = service.implicitize_trig(pure)
        return ideal.to_json(), ideal.format() or ["0"]

    def do_verify(self):
        pure = _load_pure(self.config)
        candidates = _read_polys(self.config.candidates, VarRegistry.ambient(pure.n))
        results = ImplicitizationService().verify(pure, candidates)
        payload = [{"candidate": format_poly(h), "vanishes": ok} for h, ok in zip(candidates, results)]
        lines = [f"{format_poly(h)}\t{'true' if ok else 'false'}" for h, ok in zip(candidates, results)]
        return payload, lines

    def do_epicycloid(self):
        return self._cycloid(epicycloid_text(*self.config.radii))

    def do_hypocycloid(self):
        return self._cycloid(hypocycloid_text(*self.config.radii))

    def _cycloid(self, text: str):
        pure = convert_pure(parse_param(text))
        payload = {"text": text, "pure": pure.to_json()}
        return payload, text.splitlines()

    def do_sample(self):
        pure = _load_pure(self.config)
        target = _to_rational(pure) if self.config.rational else pure
        check = _read_polys(self.config.check, VarRegistry.ambient(pure.n)) if self.config.check else None
        service = GeometryService(threads=self.config.threads)
        cloud = service.sample(target, self.config.ranges, self.config.counts, check, self.config.constants)
        logger.info("Sampled %d points, skipped %d poles", len(cloud), cloud.skipped)
        if self.config.format == "csv":
            return None, cloud.to_csv().splitlines()
        lines = ["\t".join(f"{v:.12g}" for v in row) for row in cloud.points]
        return cloud.to_json(), lines

    def do_intersect(self):
        pure = _load_pure(self.config)
        rational = _to_rational(pure)
        ambient = VarRegistry.ambient(pure.n)
        surface = parse_polynomial(self.config.surface, ambient)
        service = GeometryService(width=self.config.width)
        result = service.intersect(rational, surface)
        lines = [f"condition: {format_poly(result.condition)}"]
        payload: Dict = {"condition": format_poly(result.condition), "factors": {}, "roots": {}, "curves": []}
        for t, factor in result.factors.items():
            lines.append(f"factor {t}: {format_poly(factor)}")
            payload["factors"][t] = format_poly(factor)
            payload["roots"][t] = [r.to_json() for r in result.roots[t]]
            for root in result.roots[t]:
                tag = f" (multiplicity {root.multiplicity})" if root.multiplicity > 1 else ""
                lines.append(f"root {t}: {root.refined:.10g} in [{root.lo}, {root.hi}]{tag}")
        for curve in result.curves:
            lines.append(f"curve {curve.param}={curve.root.refined:.10g}: {curve.format()}")
            payload["curves"].append({"param": curve.param, "at": curve.root.refined, "curve": curve.format()})
        if self.config.trig:
            condition = service.intersect_condition_trig(pure, surface)
            text = format_poly(condition, pure.registry.label_map())
            lines.append(f"trig condition: {text}")
            payload["trig_condition"] = text
        if self.config.implicit:
            polys = _read_polys(self.config.implicit, ambient) + [surface]
            basis = groebner_basis_of(polys, ambient, self.config.order, self.config.pair_budget)
            lines.extend(f"basis: {format_poly(g)}" for g in basis.polys())
            payload["basis"] = basis.to_json()
        return payload, lines


def run(config: JobConfig) -> int:
    """Run one job, writing results to stdout; returns the exit status."""
    changes = {}
    if config.pair_budget is not None:
        changes["pair_budget"] = config.pair_budget
    if config.threads is not None:
        changes["threads"] = config.threads
    with override_settings(**changes):
        payload, lines = Runner(config).run()
    if config.format == "json":
        print(json.dumps(payload, indent=2))
    else:
        for line in lines:
            print(line)
    if config.subcommand == "verify" and not all(item["vanishes"] for item in payload):
        return 1
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        config = config_from_args(args)
        logger.debug("Running %s with budget %d", config.subcommand,
                     config.pair_budget or get_settings().pair_budget)
        return run(config)
    except HybridTrigError as e:
        print(f"{e.name}: {str(e)}", file=sys.stderr)
        if e.details:
            print(json.dumps(e.details), file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"InvalidJobConfig: {str(e)}", file=sys.stderr)
        return InvalidJobConfig.exit_code


if __name__ == "__main__":
    sys.exit(main())
