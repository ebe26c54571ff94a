"""Mini-languages for anisotropy functions and surfaces.

Expressions are parsed by a small recursive-descent parser into immutable
ASTs.  The same tree is evaluated over floats, ndarrays or :class:`Jet2`
objects, so derivatives come from one generic evaluator.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['-'] INT)?
    atom   := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets
from .jets import DomainError, Jet2
from .sampling import sphere_samples

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos")
_FUNC_IMPL = {name: getattr(jets, name) for name in FUNCTIONS}
COORDINATE_NAMES = {f"x{i}": i for i in range(1, 10)}
CURVE_NAMES = {"t": 1}


class ParseError(ValueError):
    """Syntax or validation error; ``offset`` is a 0-based position in the input text."""

    def __init__(self, message: str, offset: int | None = None):
        self.message = message
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{message}{where}")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


def max_var_index(node: Expr) -> int:
    match node:
        case Num():
            return 0
        case Var(index=i):
            return i
        case Neg(operand=a) | Pow(base=a) | Call(arg=a):
            return max_var_index(a)
        case BinOp(left=a, right=b):
            return max(max_var_index(a), max_var_index(b))
    raise TypeError(f"not an expression node: {node!r}")


def to_text(node: Expr) -> str:
    """Print an AST so that parsing the output yields an equal tree."""
    match node:
        case Num(value=v):
            text = repr(float(v))
            return f"({text})" if text.startswith("-") else text
        case Var(name=name):
            return name
        case Neg(operand=a):
            return f"(-{to_text(a)})"
        case BinOp(op=op, left=a, right=b):
            return f"({to_text(a)} {op} {to_text(b)})"
        case Pow(base=a, exponent=k):
            return f"({to_text(a)}^{k})"
        case Call(func=f, arg=a):
            return f"{f}({to_text(a)})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Tokenizer and parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str, base: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", base + bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), base + m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", base + len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, names: dict[str, int], base: int):
        self.tokens = _tokenize(text, base)
        self.names = names
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, offset = self.tok
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {text!r}, found {found}", offset)
        self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        kind, value, offset = self.tok
        if kind != "end":
            raise ParseError(f"unexpected token {value!r}", offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok[:2] != ("op", "^"):
            return base
        self.advance()
        sign = 1
        if self.tok[:2] == ("op", "-"):
            self.advance()
            sign = -1
        kind, value, offset = self.tok
        if kind != "num" or not re.fullmatch(r"\d+", value):
            raise ParseError("exponent must be an integer constant", offset)
        self.advance()
        if self.tok[:2] == ("op", "^"):
            raise ParseError("chained exponents are not supported; use parentheses", self.tok[2])
        return Pow(base, sign * int(value))

    def atom(self) -> Expr:
        kind, value, offset = self.tok
        if kind == "num":
            self.advance()
            return Num(float(value))
        if kind == "name":
            self.advance()
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value == "abs":
                raise ParseError("abs is not allowed (F must be smooth)", offset)
            if value in self.names:
                return Var(self.names[value], value)
            raise ParseError(f"unknown identifier {value!r}", offset)
        if (kind, value) == ("op", "("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected a number, variable or '(', found {found}", offset)


def parse_expression(text: str, names: dict[str, int] | None = None, offset: int = 0) -> Expr:
    """Parse ``text`` into an AST.  ``offset`` shifts reported error positions."""
    if not text.strip():
        raise ParseError("empty expression", offset)
    return _Parser(text, COORDINATE_NAMES if names is None else names, offset).parse()


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(node: Expr, coords):
    """Evaluate ``node`` with ``coords[i-1]`` bound to variable ``i``.

    ``coords`` may hold floats, ndarrays or jets; the arithmetic follows them.
    """
    match node:
        case Num(value=v):
            return v
        case Var(index=i):
            return coords[i - 1]
        case Neg(operand=a):
            return -evaluate(a, coords)
        case BinOp(op=op, left=a, right=b):
            x, y = evaluate(a, coords), evaluate(b, coords)
            if op == "+":
                return x + y
            if op == "-":
                return x - y
            if op == "*":
                return x * y
            return jets.divide(x, y)
        case Pow(base=a, exponent=k):
            x = evaluate(a, coords)
            if isinstance(x, Jet2):
                return x**k
            if k < 0:
                return jets.divide(1.0, np.asarray(x, dtype=float) ** (-k))
            return np.asarray(x, dtype=float) ** k
        case Call(func=f, arg=a):
            return _FUNC_IMPL[f](evaluate(a, coords))
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet2(node: Expr, y) -> Jet2:
    """Value, gradient and Hessian of ``node`` at ``y`` (shape ``(..., m)``)."""
    y = np.asarray(y, dtype=float)
    if max_var_index(node) > y.shape[-1]:
        raise ValueError(f"expression uses x{max_var_index(node)} but the point has {y.shape[-1]} coordinates")
    out = evaluate(node, Jet2.variables(y))
    if not isinstance(out, Jet2):
        out = Jet2.constant(np.broadcast_to(out, y.shape[:-1]), y.shape[-1])
    return out


def eval_float(node: Expr, y):
    y = np.asarray(y, dtype=float)
    out = evaluate(node, [y[..., i] for i in range(y.shape[-1])])
    return np.broadcast_to(np.asarray(out, dtype=float), y.shape[:-1])


# ---------------------------------------------------------------------------
# Anisotropy specs


@dataclass(frozen=True)
class ConstF:
    c: float
    ambient_dim: int

    def to_text(self) -> str:
        return f"const:{self.c!r}"


@dataclass(frozen=True)
class EllipsoidF:
    axes: tuple[float, ...]
    ambient_dim: int

    def to_text(self) -> str:
        return "ellipsoid:" + ",".join(repr(a) for a in self.axes)


@dataclass(frozen=True)
class PNormF:
    """Smoothed p-norm ``(sum_i (x_i^2 + eps^2)^(p/2))^(1/p)`` on the sphere."""

    p: float
    eps: float
    ambient_dim: int

    def to_text(self) -> str:
        return f"pnorm:{self.p!r},{self.eps!r}"


@dataclass(frozen=True)
class ExprF:
    expr: Expr
    ambient_dim: int

    def to_text(self) -> str:
        return "expr:" + to_text(self.expr)


FSpec = Union[ConstF, EllipsoidF, PNormF, ExprF]


def _split_kind(text: str) -> tuple[str, str, int]:
    if not text or not text.strip():
        raise ParseError("empty spec", 0)
    colon = text.find(":")
    if colon < 0:
        raise ParseError("expected '<kind>:<parameters>'", len(text))
    return text[:colon].strip().lower(), text[colon + 1 :], colon + 1


def _numbers(body: str, base: int, sep: str = ",") -> list[float]:
    out = []
    pos = 0
    for item in body.split(sep):
        lead = len(item) - len(item.lstrip())
        try:
            value = float(item.strip())
        except ValueError:
            raise ParseError(f"invalid number {item.strip()!r}", base + pos + lead) from None
        if not math.isfinite(value):
            raise ParseError("parameters must be finite", base + pos + lead)
        out.append(value)
        pos += len(item) + len(sep)
    return out


def _require_positive_on_sphere(node: Expr, ambient_dim: int, what: str, offset: int) -> None:
    pts = sphere_samples(ambient_dim, 256)
    try:
        vals = eval_float(node, pts)
    except DomainError as exc:
        raise ParseError(f"{what} is not defined on the whole sphere: {exc}", offset) from None
    if not np.all(np.isfinite(vals)) or np.min(vals) <= 0:
        raise ParseError(f"{what} must be positive on the unit sphere (min sample {np.min(vals):.6g})", offset)


def parse_fspec(text: str, ambient_dim: int) -> FSpec:
    """Parse ``const:<c>``, ``ellipsoid:<a1>,...``, ``pnorm:<p>,<eps>`` or ``expr:<expression>``."""
    if ambient_dim < 2:
        raise ParseError(f"ambient dimension must be >= 2, got {ambient_dim}")
    kind, body, base = _split_kind(text)
    if kind == "const":
        (c,) = _one_or_more(body, base, 1)
        if c <= 0:
            raise ParseError("const F must be positive", base)
        return ConstF(c, ambient_dim)
    if kind == "ellipsoid":
        axes = _numbers(body, base)
        if len(axes) != ambient_dim:
            raise ParseError(f"ellipsoid needs {ambient_dim} semi-axes for ambient dimension {ambient_dim}, got {len(axes)}", base)
        if min(axes) <= 0:
            raise ParseError("ellipsoid semi-axes must be positive", base)
        return EllipsoidF(tuple(axes), ambient_dim)
    if kind == "pnorm":
        p, eps = _one_or_more(body, base, 2)
        if p <= 1:
            raise ParseError("pnorm exponent must exceed 1", base)
        if eps < 0:
            raise ParseError("pnorm smoothing must be nonnegative", base)
        return PNormF(p, eps, ambient_dim)
    if kind == "expr":
        node = parse_expression(body, offset=base)
        if max_var_index(node) > ambient_dim:
            raise ParseError(f"expression uses x{max_var_index(node)} beyond ambient dimension {ambient_dim}", base)
        _require_positive_on_sphere(node, ambient_dim, "F", base)
        return ExprF(node, ambient_dim)
    raise ParseError(f"unknown anisotropy kind {kind!r}", 0)


def _one_or_more(body: str, base: int, count: int) -> list[float]:
    values = _numbers(body, base)
    if len(values) != count:
        raise ParseError(f"expected {count} parameter(s), got {len(values)}", base)
    return values


# ---------------------------------------------------------------------------
# Surface specs


@dataclass(frozen=True)
class Sphere:
    radius: float
    dim: int = 2

    def to_text(self) -> str:
        return f"sphere:{self.radius!r}"


@dataclass(frozen=True)
class EllipsoidSurf:
    axes: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.axes) - 1

    def to_text(self) -> str:
        return "ellipsoidsurf:" + ",".join(repr(a) for a in self.axes)


@dataclass(frozen=True)
class RadialGraph:
    rho: Expr
    dim: int = 2

    def to_text(self) -> str:
        return "radial:" + to_text(self.rho)


@dataclass(frozen=True)
class Torus:
    major: float
    minor: float

    @property
    def dim(self) -> int:
        return 2

    def to_text(self) -> str:
        return f"torus:{self.major!r},{self.minor!r}"


@dataclass(frozen=True)
class ClosedCurve:
    x: Expr
    y: Expr

    @property
    def dim(self) -> int:
        return 1

    def to_text(self) -> str:
        return f"curve:{to_text(self.x)};{to_text(self.y)}"


@dataclass(frozen=True)
class WulffSurf:
    """The Wulff shape of an anisotropy, embedded as a surface (``wulff:<fspec>``)."""

    f: FSpec

    @property
    def dim(self) -> int:
        return self.f.ambient_dim - 1

    def to_text(self) -> str:
        return "wulff:" + self.f.to_text()


SurfaceSpec = Union[Sphere, EllipsoidSurf, RadialGraph, Torus, ClosedCurve, WulffSurf]


def parse_surfspec(text: str, dim: int | None = None) -> SurfaceSpec:
    """Parse a surface spec.  ``dim`` (the surface dimension n) is required only where the text leaves it open."""
    kind, body, base = _split_kind(text)
    if dim is not None and dim < 1:
        raise ParseError(f"surface dimension must be >= 1, got {dim}")

    def check_dim(n: int) -> None:
        if dim is not None and dim != n:
            raise ParseError(f"{kind} is {n}-dimensional but dimension {dim} was requested", base)

    if kind == "sphere":
        (radius,) = _one_or_more(body, base, 1)
        if radius <= 0:
            raise ParseError("sphere radius must be positive", base)
        return Sphere(radius, 2 if dim is None else dim)
    if kind == "ellipsoidsurf":
        axes = _numbers(body, base)
        if len(axes) < 2:
            raise ParseError("ellipsoidsurf needs at least two semi-axes", base)
        if min(axes) <= 0:
            raise ParseError("ellipsoid semi-axes must be positive", base)
        check_dim(len(axes) - 1)
        return EllipsoidSurf(tuple(axes))
    if kind == "radial":
        node = parse_expression(body, offset=base)
        n = dim if dim is not None else max(2, max_var_index(node) - 1)
        if max_var_index(node) > n + 1:
            raise ParseError(f"expression uses x{max_var_index(node)} beyond ambient dimension {n + 1}", base)
        _require_positive_on_sphere(node, n + 1, "radial function", base)
        return RadialGraph(node, n)
    if kind == "torus":
        major, minor = _one_or_more(body, base, 2)
        if not major > minor > 0:
            raise ParseError("torus requires R > r > 0", base)
        check_dim(2)
        return Torus(major, minor)
    if kind == "curve":
        semi = body.find(";")
        if semi < 0:
            raise ParseError("curve needs '<x(t)>;<y(t)>'", base + len(body))
        x = parse_expression(body[:semi], CURVE_NAMES, offset=base)
        y = parse_expression(body[semi + 1 :], CURVE_NAMES, offset=base + semi + 1)
        check_dim(1)
        return ClosedCurve(x, y)
    if kind == "wulff":
        n = 2 if dim is None else dim
        try:
            f = parse_fspec(body, n + 1)
        except ParseError as exc:
            raise ParseError(exc.message, None if exc.offset is None else exc.offset + base) from None
        return WulffSurf(f)
    raise ParseError(f"unknown surface kind {kind!r}", 0)
