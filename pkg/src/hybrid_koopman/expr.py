"""A small expression language for phase-space functions ``f(q, p)``.

Grammar (EBNF)::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = unary , { ( "*" | "/" ) , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;
    atom    = number | "q" | "p" | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "sin" | "cos" | "exp" | "sqrt" | "abs" ;
    number  = digits , [ "." , [ digits ] ] , [ exponent ]
            | "." , digits , [ exponent ] ;
    exponent = ( "e" | "E" ) , [ "+" | "-" ] , digits ;

So ``^`` is right-associative and binds tighter than unary minus
(``-q^2 == -(q^2)``, ``2^-1`` is allowed), which binds tighter than ``*``
and ``/``, which bind tighter than ``+`` and ``-``. There are no other
names: numerical parameters must be substituted before parsing.

Evaluation is in double precision. Division by zero, ``sqrt`` of a
negative number, a negative base raised to a non-integer power, and any
non-finite result are reported with the first offending point.

Inputs are limited to 64 KiB of text, 100 levels of syntactic nesting and
syntax trees 200 nodes deep (a sum of more than about 200 terms is
rejected).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprEvaluationError, ExprSyntaxError, UnknownIdentifierError

MAX_SOURCE_BYTES = 64 * 1024
#: Deepest syntax tree accepted, counted in nodes from the root.
MAX_DEPTH = 200
#: Deepest nesting of parentheses, unary minus and exponents while parsing.
MAX_NESTING = 100

VARIABLES = ("q", "p")
FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


# -- syntax tree ---------------------------------------------------------------


class Expr:
    __slots__ = ()
    prec = 5

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def __repr__(self):
        v = self.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    prec = 3

    def __repr__(self):
        return f"Neg({self.operand!r})"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def __repr__(self):
        return f"Call({self.func}, {self.arg!r})"


@dataclass(frozen=True)
class Binary(Expr):
    left: Expr
    right: Expr
    symbol = "?"

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(Binary):
    symbol, prec = "+", 1


class Sub(Binary):
    symbol, prec = "-", 1


class Mul(Binary):
    symbol, prec = "*", 2


class Div(Binary):
    symbol, prec = "/", 2


class Pow(Binary):
    symbol, prec = "^", 4


BINARY = {cls.symbol: cls for cls in (Add, Sub, Mul, Div, Pow)}


# -- lexer and parser -------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = self._lex(text)
        self.i = 0
        self.depth = 0

    def where(self, pos):
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def fail(self, msg, pos):
        raise ExprSyntaxError(msg, *self.where(pos))

    def _lex(self, text):
        toks, pos = [], 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                self.fail(f"unexpected character {text[pos]!r}", pos)
            if m.lastgroup != "ws":
                toks.append(_Tok(m.lastgroup, m.group(), pos))
            pos = m.end()
        toks.append(_Tok("end", "", len(text)))
        return toks

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        t = self.tok
        if t.text != text or t.kind == "end":
            found = "end of input" if t.kind == "end" else repr(t.text)
            self.fail(f"expected {text!r}, found {found}", t.pos)
        return self.take()

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            self.fail("empty expression", 0)
        e = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}", self.tok.pos)
        return e

    def enter(self):
        self.depth += 1
        if self.depth > MAX_NESTING:
            self.fail("expression nested too deeply", self.tok.pos)

    def expr(self):
        self.enter()
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            cls = BINARY[self.take().text]
            left = cls(left, self.term())
        self.depth -= 1
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            cls = BINARY[self.take().text]
            left = cls(left, self.unary())
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            self.enter()
            e = Neg(self.unary())
            self.depth -= 1
            return e
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            self.enter()
            e = Pow(base, self.unary())
            self.depth -= 1
            return e
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.kind == "name":
            self.take()
            if t.text in VARIABLES:
                return Var(t.text)
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            raise UnknownIdentifierError(t.text, *self.where(t.pos))
        if t.kind == "op" and t.text == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if t.kind == "end" else repr(t.text)
        self.fail(f"expected a number, variable, function or '(', found {found}", t.pos)


def parse(text: str) -> Expr:
    """Parse expression text into an immutable syntax tree.

    Raises
    ------
    ExprSyntaxError
        With 1-based ``line`` and ``column`` of the offending token.
    UnknownIdentifierError
        For any name other than ``q``, ``p`` and the built-in functions.
    """
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    if len(text.encode("utf-8")) > MAX_SOURCE_BYTES:
        raise ExprSyntaxError("expression longer than 64 KiB", 1, 1)
    e = _Parser(text).parse()
    if _depth(e) > MAX_DEPTH:
        raise ExprSyntaxError(f"expression tree deeper than {MAX_DEPTH} levels", 1, 1)
    return e


def _depth(e) -> int:
    # iterative, so long left-leaning sums cannot exhaust the Python stack
    best, stack = 0, [(e, 1)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        if isinstance(node, Binary):
            stack.extend(((node.left, d + 1), (node.right, d + 1)))
        elif isinstance(node, Neg):
            stack.append((node.operand, d + 1))
        elif isinstance(node, Call):
            stack.append((node.arg, d + 1))
    return best


# -- printing ----------------------------------------------------------------------


def to_text(e: Expr) -> str:
    """Render with the fewest parentheses that parse back to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        return "-" + (f"({inner})" if e.operand.prec < Neg.prec else inner)
    if isinstance(e, Pow):
        left = to_text(e.left)
        if e.left.prec <= Pow.prec:
            left = f"({left})"
        right = to_text(e.right)
        if e.right.prec < Neg.prec:
            right = f"({right})"
        return f"{left}^{right}"
    if isinstance(e, Binary):
        left = to_text(e.left)
        if e.left.prec < e.prec:
            left = f"({left})"
        right = to_text(e.right)
        if e.right.prec <= e.prec:
            right = f"({right})"
        return f"{left} {e.symbol} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation ----------------------------------------------------------------------


class _Evaluator:
    def __init__(self, q, p):
        self.q = q
        self.p = p

    def error(self, msg, mask):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise ExprEvaluationError(msg)
        k = int(idx[0])
        q = np.broadcast_to(self.q, mask.shape).ravel()[k]
        p = np.broadcast_to(self.p, mask.shape).ravel()[k]
        raise ExprEvaluationError(msg, k, (float(q), float(p)))

    def __call__(self, e):
        shape = np.broadcast(self.q, self.p).shape
        if isinstance(e, Num):
            return np.full(shape, e.value)
        if isinstance(e, Var):
            return np.broadcast_to(np.asarray(self.q if e.name == "q" else self.p, float), shape)
        if isinstance(e, Neg):
            return -self(e.operand)
        if isinstance(e, Call):
            x = self(e.arg)
            if e.func == "sqrt" and np.any(x < 0):
                self.error("sqrt of a negative number", x < 0)
            return FUNCTIONS[e.func](x)
        a, b = self(e.left), self(e.right)
        if isinstance(e, Add):
            return a + b
        if isinstance(e, Sub):
            return a - b
        if isinstance(e, Mul):
            return a * b
        if isinstance(e, Div):
            if np.any(b == 0):
                self.error("division by zero", b == 0)
            return a / b
        if isinstance(e, Pow):
            bad = (a < 0) & (b != np.round(b))
            if np.any(bad):
                self.error("negative base with non-integer exponent", bad)
            zero_neg = (a == 0) & (b < 0)
            if np.any(zero_neg):
                self.error("division by zero", zero_neg)
            return np.power(a, b)
        raise TypeError(f"not an expression node: {e!r}")


def evaluate(e, q, p) -> np.ndarray:
    """Evaluate pointwise on broadcastable arrays ``q`` and ``p``."""
    if isinstance(e, str):
        e = parse(e)
    q = np.asarray(q, float)
    p = np.asarray(p, float)
    ev = _Evaluator(q, p)
    with np.errstate(all="ignore"):
        out = np.asarray(ev(e), float)
    bad = ~np.isfinite(out)
    if np.any(bad):
        ev.error("non-finite value", bad)
    return out


def evaluate_on_grid(e, grid) -> np.ndarray:
    """Values at every grid point, in the grid's flat ordering."""
    return evaluate(e, grid.q, grid.p).reshape(grid.size).copy()
