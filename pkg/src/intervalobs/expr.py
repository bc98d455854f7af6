"""Dynamics expression AST with a parser and real/interval evaluators.

Expressions are built over the variables ``t``, ``x1..xn`` and ``u1..un``
(1-based in the surface grammar, 0-based indices in the AST), the four
arithmetic operators, unary minus, the functions ``sin cos sqrt exp`` and a
piecewise-constant-in-time construct::

    piecewise(t; b1, ..., bm; v1, ..., v{m+1})

Interval evaluation replaces every real operation by its interval
counterpart, which yields the natural interval extension of the expression.
"""

from __future__ import annotations

import math
import re
from bisect import bisect_left
from dataclasses import dataclass
from typing import Callable, Sequence

from .interval import (
    DomainError,
    Interval,
    IntervalDivisionError,
    cos_bounds,
    sin_bounds,
)

RealFn = Callable[[float, Sequence[float], Sequence[float]], float]
PairFn = Callable[
    [tuple[float, float], Sequence[tuple[float, float]], Sequence[tuple[float, float]]],
    tuple[float, float],
]


class ExprError(ValueError):
    """Problem with an expression source string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class IndexOutOfRange(ExprError):
    pass


class Expr:
    """Base class for expression nodes; all nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    kind: str  # 't' | 'x' | 'u'
    index: int = 0  # 0-based; unused for 't'


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # neg | sin | cos | sqrt | exp
    child: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class PiecewiseTime(Expr):
    """Piecewise-constant function of time.

    ``values[k]`` applies on the piece ending at ``breaks[k]`` inclusive;
    ``values[-1]`` applies beyond the last breakpoint.  Matches step inputs
    specified on right-closed pieces such as [0,5], (5,10], (10,20].
    """

    breaks: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("piecewise needs one more value than breakpoints")
        if any(b2 <= b1 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("piecewise breakpoints must be strictly increasing")


@dataclass(frozen=True)
class VectorField:
    """Componentwise dynamics x' = f(t, u, x)."""

    components: tuple[Expr, ...]
    n_x: int
    n_u: int

    def __post_init__(self) -> None:
        if len(self.components) != self.n_x:
            raise ValueError("one component expression per state required")
        for k, comp in enumerate(self.components):
            mx, mu = max_var_indices(comp)
            if mx >= self.n_x or mu >= self.n_u:
                raise ValueError(f"component {k + 1} references an out-of-range variable")


_FUNCTIONS = ("sin", "cos", "sqrt", "exp")

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/();,])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, n_x: int, n_u: int):
        self.tokens = _tokenize(source)
        self.i = 0
        self.n_x = n_x
        self.n_u = n_u

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", pos)
        self.advance()

    def parse(self) -> Expr:
        e = self.additive()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos)
        return e

    def additive(self) -> Expr:
        e = self.multiplicative()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                e = Binary(text, e, self.multiplicative())
            else:
                return e

    def multiplicative(self) -> Expr:
        e = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                e = Binary(text, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.atom()

    def atom(self) -> Expr:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text == "(":
            e = self.additive()
            self.expect_op(")")
            return e
        if kind == "name":
            return self.named(text, pos)
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos)

    def named(self, name: str, pos: int) -> Expr:
        if name == "t":
            return Var("t")
        if name in _FUNCTIONS:
            self.expect_op("(")
            arg = self.additive()
            self.expect_op(")")
            return Unary(name, arg)
        if name == "piecewise":
            return self.piecewise(pos)
        m = re.fullmatch(r"([xu])(\d+)", name)
        if m is None:
            raise UnknownIdentifier(f"unknown identifier {name!r}", pos)
        kind, num = m.group(1), int(m.group(2))
        limit = self.n_x if kind == "x" else self.n_u
        if not 1 <= num <= limit:
            raise IndexOutOfRange(f"{name!r} out of range (declared {kind} dimension {limit})", pos)
        return Var(kind, num - 1)

    def piecewise(self, pos: int) -> Expr:
        self.expect_op("(")
        kind, text, tpos = self.advance()
        if kind != "name" or text != "t":
            raise ExprSyntaxError("piecewise argument must be t", tpos)
        self.expect_op(";")
        breaks = self.number_list()
        self.expect_op(";")
        values = self.number_list()
        self.expect_op(")")
        try:
            return PiecewiseTime(tuple(breaks), tuple(values))
        except ValueError as exc:
            raise ExprSyntaxError(str(exc), pos) from None

    def number_list(self) -> list[float]:
        out = [self.signed_number()]
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text == ",":
                self.advance()
                out.append(self.signed_number())
            else:
                return out

    def signed_number(self) -> float:
        sign = 1.0
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            sign = -1.0
            kind, text, pos = self.peek()
        if kind != "num":
            raise ExprSyntaxError(f"expected number, found {text or 'end of input'!r}", pos)
        self.advance()
        return sign * float(text)


def parse(source: str, n_x: int, n_u: int) -> Expr:
    """Parse an expression over declared state/input dimensions."""
    return _Parser(source, n_x, n_u).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_number(v: float) -> str:
    return repr(v) if v >= 0 else f"({v!r})"


def _unparse(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Const):
        if e.value >= 0:
            return repr(e.value)
        s = f"-{-e.value!r}"
        return f"({s})" if parent_prec >= 2 else s
    if isinstance(e, Var):
        return "t" if e.kind == "t" else f"{e.kind}{e.index + 1}"
    if isinstance(e, PiecewiseTime):
        bs = ", ".join(_fmt_number(b) for b in e.breaks)
        vs = ", ".join(_fmt_number(v) for v in e.values)
        return f"piecewise(t; {bs}; {vs})"
    if isinstance(e, Unary):
        if e.op == "neg":
            s = f"-{_unparse(e.child, 3)}"
            return f"({s})" if parent_prec >= 2 else s
        return f"{e.op}({_unparse(e.child, 0)})"
    if isinstance(e, Binary):
        prec = _PREC[e.op]
        sep = f" {e.op} " if prec == 1 else e.op
        s = f"{_unparse(e.left, prec)}{sep}{_unparse(e.right, prec + 1)}"
        return f"({s})" if prec < parent_prec else s
    raise TypeError(f"not an expression node: {e!r}")


def unparse(e: Expr) -> str:
    """Render an AST back to grammar text; parse(unparse(e)) == e."""
    return _unparse(e, 0)


def _piece_span(pw: PiecewiseTime, lo: float, hi: float) -> tuple[float, float]:
    i0 = bisect_left(pw.breaks, lo)
    i1 = bisect_left(pw.breaks, hi)
    vals = pw.values[i0 : i1 + 1]
    return (min(vals), max(vals))


def eval_real(e: Expr, t: float, u: Sequence[float], x: Sequence[float]) -> float:
    """Evaluate with standard real arithmetic."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.kind == "t":
            return t
        return x[e.index] if e.kind == "x" else u[e.index]
    if isinstance(e, Binary):
        a = eval_real(e.left, t, u, x)
        b = eval_real(e.right, t, u, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Unary):
        v = eval_real(e.child, t, u, x)
        if e.op == "neg":
            return -v
        if e.op == "sin":
            return math.sin(v)
        if e.op == "cos":
            return math.cos(v)
        if e.op == "sqrt":
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v}")
            return math.sqrt(v)
        return math.exp(v)
    if isinstance(e, PiecewiseTime):
        return e.values[bisect_left(e.breaks, t)]
    raise TypeError(f"not an expression node: {e!r}")


def eval_interval(
    e: Expr,
    t_box: Interval,
    u_box: Sequence[Interval],
    x_box: Sequence[Interval],
) -> Interval:
    """Natural interval extension over the argument boxes."""
    if isinstance(e, Const):
        return Interval.point(e.value)
    if isinstance(e, Var):
        if e.kind == "t":
            return t_box
        return x_box[e.index] if e.kind == "x" else u_box[e.index]
    if isinstance(e, Binary):
        a = eval_interval(e.left, t_box, u_box, x_box)
        b = eval_interval(e.right, t_box, u_box, x_box)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return a / b
    if isinstance(e, Unary):
        v = eval_interval(e.child, t_box, u_box, x_box)
        if e.op == "neg":
            return -v
        if e.op == "sin":
            return Interval(*sin_bounds(v.lo, v.hi))
        if e.op == "cos":
            return Interval(*cos_bounds(v.lo, v.hi))
        if e.op == "sqrt":
            if v.lo < 0.0:
                raise DomainError(f"sqrt of interval [{v.lo}, {v.hi}]")
            return Interval(math.sqrt(v.lo), math.sqrt(v.hi))
        return Interval(math.exp(v.lo), math.exp(v.hi))
    if isinstance(e, PiecewiseTime):
        return Interval(*_piece_span(e, t_box.lo, t_box.hi))
    raise TypeError(f"not an expression node: {e!r}")


def compile_real(e: Expr) -> RealFn:
    """Build a closure computing eval_real, for tight integration loops."""
    if isinstance(e, Const):
        v = e.value
        return lambda t, u, x: v
    if isinstance(e, Var):
        if e.kind == "t":
            return lambda t, u, x: t
        i = e.index
        if e.kind == "x":
            return lambda t, u, x: x[i]
        return lambda t, u, x: u[i]
    if isinstance(e, Binary):
        lf = compile_real(e.left)
        rf = compile_real(e.right)
        op = e.op
        if op == "+":
            return lambda t, u, x: lf(t, u, x) + rf(t, u, x)
        if op == "-":
            return lambda t, u, x: lf(t, u, x) - rf(t, u, x)
        if op == "*":
            return lambda t, u, x: lf(t, u, x) * rf(t, u, x)
        return lambda t, u, x: lf(t, u, x) / rf(t, u, x)
    if isinstance(e, Unary):
        cf = compile_real(e.child)
        if e.op == "neg":
            return lambda t, u, x: -cf(t, u, x)
        if e.op == "sin":
            return lambda t, u, x: math.sin(cf(t, u, x))
        if e.op == "cos":
            return lambda t, u, x: math.cos(cf(t, u, x))
        if e.op == "sqrt":

            def _sqrt(t, u, x):
                v = cf(t, u, x)
                if v < 0.0:
                    raise DomainError(f"sqrt of negative value {v}")
                return math.sqrt(v)

            return _sqrt
        return lambda t, u, x: math.exp(cf(t, u, x))
    if isinstance(e, PiecewiseTime):
        breaks = list(e.breaks)
        values = list(e.values)
        return lambda t, u, x: values[bisect_left(breaks, t)]
    raise TypeError(f"not an expression node: {e!r}")


def compile_interval(e: Expr) -> PairFn:
    """Build a closure computing the natural extension on (lo, hi) pairs."""
    if isinstance(e, Const):
        pair = (e.value, e.value)
        return lambda t, u, x: pair
    if isinstance(e, Var):
        if e.kind == "t":
            return lambda t, u, x: t
        i = e.index
        if e.kind == "x":
            return lambda t, u, x: x[i]
        return lambda t, u, x: u[i]
    if isinstance(e, Binary):
        lf = compile_interval(e.left)
        rf = compile_interval(e.right)
        op = e.op
        if op == "+":

            def _add(t, u, x):
                al, ah = lf(t, u, x)
                bl, bh = rf(t, u, x)
                return (al + bl, ah + bh)

            return _add
        if op == "-":

            def _sub(t, u, x):
                al, ah = lf(t, u, x)
                bl, bh = rf(t, u, x)
                return (al - bh, ah - bl)

            return _sub
        if op == "*":

            def _mul(t, u, x):
                al, ah = lf(t, u, x)
                bl, bh = rf(t, u, x)
                p1 = al * bl
                p2 = al * bh
                p3 = ah * bl
                p4 = ah * bh
                return (min(p1, p2, p3, p4), max(p1, p2, p3, p4))

            return _mul

        def _div(t, u, x):
            bl, bh = rf(t, u, x)
            if bl <= 0.0 <= bh:
                raise IntervalDivisionError(f"division by interval [{bl}, {bh}] containing zero")
            al, ah = lf(t, u, x)
            q1 = al / bl
            q2 = al / bh
            q3 = ah / bl
            q4 = ah / bh
            return (min(q1, q2, q3, q4), max(q1, q2, q3, q4))

        return _div
    if isinstance(e, Unary):
        cf = compile_interval(e.child)
        if e.op == "neg":

            def _neg(t, u, x):
                lo, hi = cf(t, u, x)
                return (-hi, -lo)

            return _neg
        if e.op == "sin":
            return lambda t, u, x: sin_bounds(*cf(t, u, x))
        if e.op == "cos":
            return lambda t, u, x: cos_bounds(*cf(t, u, x))
        if e.op == "sqrt":

            def _sqrt(t, u, x):
                lo, hi = cf(t, u, x)
                if lo < 0.0:
                    raise DomainError(f"sqrt of interval [{lo}, {hi}]")
                return (math.sqrt(lo), math.sqrt(hi))

            return _sqrt

        def _exp(t, u, x):
            lo, hi = cf(t, u, x)
            return (math.exp(lo), math.exp(hi))

        return _exp
    if isinstance(e, PiecewiseTime):
        pw = e
        return lambda t, u, x: _piece_span(pw, t[0], t[1])
    raise TypeError(f"not an expression node: {e!r}")


def collect_breakpoints(e: Expr) -> set[float]:
    """Breakpoints of every piecewise-in-time node in the expression."""
    if isinstance(e, PiecewiseTime):
        return set(e.breaks)
    if isinstance(e, Unary):
        return collect_breakpoints(e.child)
    if isinstance(e, Binary):
        return collect_breakpoints(e.left) | collect_breakpoints(e.right)
    return set()


def max_var_indices(e: Expr) -> tuple[int, int]:
    """Largest 0-based (x, u) indices referenced; (-1, -1) when absent."""
    if isinstance(e, Var):
        if e.kind == "x":
            return (e.index, -1)
        if e.kind == "u":
            return (-1, e.index)
        return (-1, -1)
    if isinstance(e, Unary):
        return max_var_indices(e.child)
    if isinstance(e, Binary):
        lx, lu = max_var_indices(e.left)
        rx, ru = max_var_indices(e.right)
        return (max(lx, rx), max(lu, ru))
    return (-1, -1)
