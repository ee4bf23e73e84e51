"""
Recursive-descent parser for hybrid trigonometric parametrizations.

Input format:

    signature (m1,m2,m3) vars t1 t2 t3 [constants a1 a2]
    (expr, expr, ...)

Expressions combine rationals, monomial parameters, named constants and
sin/cos/sinh/cosh of a linear argument  [-][rational*]t[/n] [(+|-) phase],
where a phase is a declared constant or pair(c,s) with exact rationals.
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .algebra import to_rational
from .errors import ExpressionSyntaxError, KindClash, NonlinearTrigArgument

TOKEN_RE = re.compile(r"\s*(?:(#[^\n]*)|(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\S))")
TRIG_FUNCS = ("sin", "cos", "sinh", "cosh")
RESERVED = set(TRIG_FUNCS) | {"pair", "signature", "vars", "constants", "W"}
# Names generated for torus coordinates, ambient coordinates and constant phases
GENERATED_RE = re.compile(r"(?:c|s|ch|sh|x)\d+|(?:cos|sin|cosh|sinh)_\w+")
CIRCULAR = "circular"
HYPERBOLIC = "hyperbolic"
MONOMIAL = "monomial"


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = TOKEN_RE.match(text, pos)
        if match is None:
            break
        comment, number, name, op = match.groups()
        start = match.start(match.lastindex) if match.lastindex else match.end()
        pos = match.end()
        if comment is not None:
            continue
        if number is not None:
            tokens.append(Token("num", number, start))
        elif name is not None:
            tokens.append(Token("name", name, start))
        elif op is not None:
            if op not in "+-*/^(),":
                raise ExpressionSyntaxError(f"Unexpected character {op!r}", start)
            tokens.append(Token("op", op, start))
    tokens.append(Token("end", "", len(text)))
    return tokens


@dataclass(frozen=True)
class Signature:
    """Block sizes (m1, m2, m3): circular, hyperbolic, then monomial parameters."""

    m1: int
    m2: int
    m3: int

    def __post_init__(self):
        if min(self.m1, self.m2, self.m3) < 0:
            raise ExpressionSyntaxError(f"Negative block size in signature {self.as_tuple()}")

    @classmethod
    def parse(cls, text: str) -> "Signature":
        try:
            m1, m2, m3 = (int(v) for v in text.replace("(", "").replace(")", "").split(","))
        except ValueError:
            raise ExpressionSyntaxError(f"Signature must read m1,m2,m3, got {text!r}")
        return cls(m1, m2, m3)

    @property
    def m(self) -> int:
        return self.m1 + self.m2 + self.m3

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.m1, self.m2, self.m3)

    def kind_of(self, index: int) -> str:
        if index < self.m1:
            return CIRCULAR
        if index < self.m1 + self.m2:
            return HYPERBOLIC
        return MONOMIAL

    @property
    def circular(self) -> range:
        return range(0, self.m1)

    @property
    def hyperbolic(self) -> range:
        return range(self.m1, self.m1 + self.m2)

    @property
    def monomial(self) -> range:
        return range(self.m1 + self.m2, self.m)

    def __str__(self) -> str:
        return f"({self.m1},{self.m2},{self.m3})"


@dataclass(frozen=True)
class ZeroPhase:
    pass


@dataclass(frozen=True)
class ExactPair:
    c: object
    s: object


@dataclass(frozen=True)
class NamedPhase:
    name: str
    negated: bool = False


Phase = Union[ZeroPhase, ExactPair, NamedPhase]


@dataclass(frozen=True)
class TrigArg:
    alpha: object
    var: str
    phase: Phase = ZeroPhase()


# Expression tree
@dataclass(frozen=True)
class Num:
    value: object


@dataclass(frozen=True)
class Name:
    name: str
    pos: int = -1


@dataclass(frozen=True)
class Trig:
    func: str
    arg: TrigArg
    pos: int = -1


@dataclass(frozen=True)
class PhaseTrig:
    """sin/cos/sinh/cosh of a named constant alone."""
    func: str
    name: str
    pos: int = -1


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


Node = Union[Num, Name, Trig, PhaseTrig, BinOp, Neg, Pow]


@dataclass(frozen=True)
class Header:
    signature: Signature
    params: Tuple[str, ...]
    constants: Tuple[str, ...] = ()

    def kind_of(self, name: str) -> str:
        return self.signature.kind_of(self.params.index(name))


class ExpressionParser:
    """Parser over a token list; names are checked against the declared header."""

    def __init__(self, text: str, params: Sequence[str] = (), constants: Sequence[str] = (),
                 allow_trig: bool = True):
        self.text = text
        self.tokens = tokenize(text)
        self.index = 0
        self.params = tuple(params)
        self.constants = tuple(constants)
        self.allow_trig = allow_trig

    @property
    def peek(self) -> Token:
        return self.tokens[self.index]

    def pop(self) -> Token:
        token = self.tokens[self.index]
        if token.kind != "end":
            self.index += 1
        return token

    def accept(self, text: str) -> bool:
        if self.peek.kind in ("op", "name") and self.peek.text == text:
            self.pop()
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.pop()
        if token.text != text or token.kind == "end":
            found = "end of input" if token.kind == "end" else repr(token.text)
            raise ExpressionSyntaxError(f"Expected {text!r}, found {found}", token.pos)
        return token

    def expect_end(self):
        if self.peek.kind != "end":
            raise ExpressionSyntaxError(f"Unexpected {self.peek.text!r} after expression", self.peek.pos)

    # header := 'signature' '(' int ',' int ',' int ')' 'vars' name* ['constants' name*]
    def parse_header(self) -> Header:
        self.expect("signature")
        self.expect("(")
        sizes = []
        for i in range(3):
            token = self.pop()
            if token.kind != "num":
                raise ExpressionSyntaxError("Signature entries must be non-negative integers", token.pos)
            sizes.append(int(token.text))
            if i < 2:
                self.expect(",")
        self.expect(")")
        signature = Signature(*sizes)
        self.expect("vars")
        params = self._name_list(stop=("constants",))
        constants = ()
        if self.accept("constants"):
            constants = self._name_list(stop=())
        if len(params) != signature.m:
            raise ExpressionSyntaxError(
                f"Signature {signature} declares {signature.m} parameters but vars lists {len(params)}",
                self.peek.pos,
            )
        seen = set()
        for name in params + constants:
            if name in RESERVED or name in seen or GENERATED_RE.fullmatch(name):
                raise ExpressionSyntaxError(f"Name {name!r} is reserved or declared twice", self.peek.pos)
            seen.add(name)
        self.params, self.constants = params, constants
        return Header(signature, params, constants)

    def _name_list(self, stop: Tuple[str, ...]) -> Tuple[str, ...]:
        names = []
        while self.peek.kind == "name" and self.peek.text not in stop:
            names.append(self.pop().text)
        return tuple(names)

    # tuple := '(' expr (',' expr)* ')'
    def parse_tuple(self) -> Tuple[Node, ...]:
        self.expect("(")
        items = [self.parse_expr()]
        while self.accept(","):
            items.append(self.parse_expr())
        self.expect(")")
        return tuple(items)

    # expr := term (('+'|'-') term)*
    def parse_expr(self) -> Node:
        node = self.parse_term()
        while self.peek.kind == "op" and self.peek.text in "+-":
            op = self.pop().text
            node = BinOp(op, node, self.parse_term())
        return node

    # term := unary (('*'|'/') unary)*
    def parse_term(self) -> Node:
        node = self.parse_unary()
        while self.peek.kind == "op" and self.peek.text in "*/":
            op = self.pop().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Node:
        if self.accept("-"):
            return Neg(self.parse_unary())
        if self.accept("+"):
            return self.parse_unary()
        return self.parse_factor()

    # factor := base ('^' ['-'] integer)?
    def parse_factor(self) -> Node:
        base = self.parse_base()
        if self.accept("^"):
            sign = -1 if self.accept("-") else 1
            token = self.pop()
            if token.kind != "num":
                raise ExpressionSyntaxError("Exponent must be an integer", token.pos)
            return Pow(base, sign * int(token.text))
        return base

    def parse_base(self) -> Node:
        token = self.pop()
        if token.kind == "num":
            return Num(to_rational(token.text))
        if token.kind == "op" and token.text == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        if token.kind == "name":
            if token.text in TRIG_FUNCS:
                if not self.allow_trig:
                    raise ExpressionSyntaxError(f"{token.text} is not allowed in a polynomial", token.pos)
                return self.parse_trig(token)
            if token.text in self.params or token.text in self.constants:
                return Name(token.text, token.pos)
            raise ExpressionSyntaxError(f"Unknown name {token.text!r}", token.pos)
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise ExpressionSyntaxError(f"Unexpected {found}", token.pos)

    def parse_trig(self, func: Token) -> Node:
        self.expect("(")
        start = self.peek.pos
        if self.peek.kind == "name" and self.peek.text in self.constants and \
                self.tokens[self.index + 1].text == ")":
            name = self.pop().text
            self.expect(")")
            return PhaseTrig(func.text, name, func.pos)
        try:
            arg = self.parse_linarg(func.text)
        except ExpressionSyntaxError as e:
            if e.details.get("zero_divisor"):
                raise
            raise NonlinearTrigArgument(f"Argument of {func.text} at position {start} is not linear: {str(e)}")
        if self.peek.kind == "end":
            raise ExpressionSyntaxError(f"Unclosed {func.text}(", func.pos)
        if self.peek.text != ")":
            raise NonlinearTrigArgument(
                f"Argument of {func.text} at position {start} is not of the form alpha*t + phase"
            )
        self.pop()
        return Trig(func.text, arg, func.pos)

    # linarg := [phase ('+'|'-')] ['-'] [rational '*'] tvar ['/' posint] [('+'|'-') phase]
    def parse_linarg(self, func: str) -> TrigArg:
        phase: Phase = ZeroPhase()
        if (self.peek.kind == "name" and self.peek.text in self.constants) or self.peek.text == "pair":
            phase = self.parse_phase(func, negated=False)
            if not (self.peek.kind == "op" and self.peek.text in "+-"):
                raise NonlinearTrigArgument(f"Argument of {func} has no parameter", self.peek.pos)
            lead_sign = -1 if self.pop().text == "-" else 1
        else:
            lead_sign = -1 if self.accept("-") else 1
        alpha = to_rational(1)
        if self.peek.kind == "num":
            alpha = self._rational()
            self.expect("*")
        token = self.pop()
        if token.kind != "name" or token.text not in self.params:
            raise NonlinearTrigArgument(f"Expected a parameter inside {func}, found {token.text!r}", token.pos)
        var = token.text
        if self.accept("/"):
            den = self.pop()
            if den.kind != "num" or int(den.text) == 0:
                raise NonlinearTrigArgument(f"Expected a positive integer divisor in {func}", den.pos)
            alpha = alpha / to_rational(den.text)
        alpha = alpha * lead_sign
        if not alpha:
            raise NonlinearTrigArgument(f"Zero multiplier of {var} inside {func}", token.pos)
        if self.peek.kind == "op" and self.peek.text in "+-":
            if not isinstance(phase, ZeroPhase):
                raise NonlinearTrigArgument(f"Argument of {func} has two phases", self.peek.pos)
            negated = self.pop().text == "-"
            phase = self.parse_phase(func, negated)
        return TrigArg(alpha, var, phase)

    def parse_phase(self, func: str, negated: bool) -> Phase:
        token = self.pop()
        if token.kind == "name" and token.text in self.constants:
            return NamedPhase(token.text, negated)
        if token.kind == "name" and token.text == "pair":
            self.expect("(")
            c = self._signed_rational()
            self.expect(",")
            s = self._signed_rational()
            self.expect(")")
            return ExactPair(c, -s if negated else s)
        raise NonlinearTrigArgument(f"Expected a phase inside {func}, found {token.text!r}", token.pos)

    def _rational(self):
        token = self.pop()
        if token.kind != "num":
            raise ExpressionSyntaxError("Expected a number", token.pos)
        value = to_rational(token.text)
        if self.peek.text == "/" and self.tokens[self.index + 1].kind == "num":
            self.pop()
            den = self.pop()
            divisor = to_rational(den.text)
            if not divisor:
                raise ExpressionSyntaxError("Division by zero", den.pos, {"zero_divisor": True})
            value = value / divisor
        return value

    def _signed_rational(self):
        sign = -1 if self.accept("-") else 1
        return self._rational() * sign


def split_header(text: str) -> Tuple[Header, ExpressionParser]:
    parser = ExpressionParser(text)
    header = parser.parse_header()
    return header, parser


def parse_components(text: str) -> Tuple[Header, Tuple[Node, ...]]:
    """Parse a header line followed by a component tuple."""
    header, parser = split_header(text)
    components = parser.parse_tuple()
    parser.expect_end()
    return header, components


def parse_expression(text: str, names: Sequence[str], allow_trig: bool = False,
                     constants: Sequence[str] = ()) -> Node:
    parser = ExpressionParser(text, params=names, constants=constants, allow_trig=allow_trig)
    node = parser.parse_expr()
    parser.expect_end()
    return node


def collect_trig(node: Node, found: Optional[List] = None) -> List:
    """All Trig and PhaseTrig leaves, left to right."""
    found = [] if found is None else found
    if isinstance(node, (Trig, PhaseTrig)):
        found.append(node)
    elif isinstance(node, BinOp):
        collect_trig(node.left, found)
        collect_trig(node.right, found)
    elif isinstance(node, (Neg, Pow)):
        collect_trig(node.operand if isinstance(node, Neg) else node.base, found)
    return found


def collect_names(node: Node, found: Optional[List] = None) -> List[Name]:
    found = [] if found is None else found
    if isinstance(node, Name):
        found.append(node)
    elif isinstance(node, BinOp):
        collect_names(node.left, found)
        collect_names(node.right, found)
    elif isinstance(node, Neg):
        collect_names(node.operand, found)
    elif isinstance(node, Pow):
        collect_names(node.base, found)
    return found


def check_kinds(header: Header, components: Sequence[Node]):
    """Circular and hyperbolic parameters may only appear inside trig leaves of their kind."""
    for comp in components:
        for name in collect_names(comp):
            if name.name in header.params and header.kind_of(name.name) != MONOMIAL:
                raise KindClash(
                    f"Parameter {name.name} is {header.kind_of(name.name)} but used as a monomial at position {name.pos}"
                )
        for leaf in collect_trig(comp):
            if isinstance(leaf, PhaseTrig):
                continue
            kind = header.kind_of(leaf.arg.var)
            wanted = CIRCULAR if leaf.func in ("sin", "cos") else HYPERBOLIC
            if kind != wanted:
                raise KindClash(
                    f"Parameter {leaf.arg.var} is {kind} but appears in {leaf.func} at position {leaf.pos}"
                )
