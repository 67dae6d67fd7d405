"""Arithmetic expressions over x1..xn: parsing, printing, evaluation, derivatives.

Grammar (standard precedence, ``^`` binds tighter than unary minus)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'

Exponents must fold to integer constants. ``x``, ``y``, ``z`` alias
``x1``, ``x2``, ``x3``; ``pi`` and ``e`` are constants.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from . import dual as D
from .errors import DomainError, NonSmoothError, ParseError

KINK_TOL = 1e-12

FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1, "sqrt": 1, "atan": 1,
    "sinh": 1, "cosh": 1, "abs": 1, "min": 2, "max": 2,
}
NONSMOOTH = {"abs", "min", "max"}
CONSTANTS = {"pi": math.pi, "e": math.e}
ALIASES = {"x": 1, "y": 2, "z": 3}


@dataclass(frozen=True)
class Span:
    line: int
    column: int


_NOSPAN = Span(1, 1)


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    name: str
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: object
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple
    span: Span = field(default=_NOSPAN, compare=False, repr=False)


# --------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int


def _location(src, pos):
    line = src.count("\n", 0, pos) + 1
    col = pos - (src.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _tokenize(src):
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            line, col = _location(src, pos)
            raise ParseError(f"unexpected character {src[pos]!r}", line, col)
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    end = len(src.rstrip())
    toks.append(_Tok("eof", "", end))
    return toks


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, src):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0

    def span(self, tok):
        return Span(*_location(self.src, tok.pos))

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, tok, msg):
        line, col = _location(self.src, tok.pos)
        raise ParseError(msg, line, col)

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            self.fail(tok, f"expected {text!r}, found {found}")
        return tok

    def parse(self):
        e = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(tok, f"unexpected {tok.text!r}")
        return e

    def expr(self):
        left = self.term()
        while self.peek().text in ("+", "-"):
            tok = self.next()
            left = BinOp(tok.text, left, self.term(), self.span(tok))
        return left

    def term(self):
        left = self.unary()
        while self.peek().text in ("*", "/"):
            tok = self.next()
            left = BinOp(tok.text, left, self.unary(), self.span(tok))
        return left

    def unary(self):
        if self.peek().text == "-":
            tok = self.next()
            return Neg(self.unary(), self.span(tok))
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek().text == "^":
            tok = self.next()
            exponent = self.unary()
            value = _fold_constant(exponent)
            if value is None or value != int(value):
                self.fail(tok, "exponent must be an integer constant")
            return Pow(base, exponent, self.span(tok))
        return base

    def primary(self):
        tok = self.next()
        if tok.kind == "num":
            return Num(float(tok.text), self.span(tok))
        if tok.kind == "id":
            name = tok.text
            if self.peek().text == "(":
                if name not in FUNCTIONS:
                    self.fail(tok, f"unknown function {name!r}")
                self.next()
                args = [self.expr()]
                while self.peek().text == ",":
                    self.next()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[name]:
                    self.fail(tok, f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}")
                return Call(name, tuple(args), self.span(tok))
            if name in CONSTANTS:
                return Const(name, self.span(tok))
            if name in ALIASES:
                return Var(ALIASES[name], self.span(tok))
            m = re.fullmatch(r"x([1-9]\d*)", name)
            if m:
                return Var(int(m.group(1)), self.span(tok))
            self.fail(tok, f"unknown identifier {name!r}")
        if tok.text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if tok.kind == "eof":
            self.fail(tok, "unexpected end of input")
        self.fail(tok, f"unexpected {tok.text!r}")


def _fold_constant(e):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        v = _fold_constant(e.operand)
        return None if v is None else -v
    if isinstance(e, BinOp):
        a, b = _fold_constant(e.left), _fold_constant(e.right)
        if a is None or b is None:
            return None
        if e.op == "/":
            return None if b == 0 else a / b
        return {"+": a + b, "-": a - b, "*": a * b}[e.op]
    if isinstance(e, Pow):
        a, b = _fold_constant(e.base), _fold_constant(e.exponent)
        if a is None or b is None or (a == 0 and b < 0):
            return None
        return a ** int(b)
    return None


def parse(src):
    """Parse an expression; raises ParseError carrying line and column."""
    if not isinstance(src, str):
        raise ParseError("expression must be a string")
    return _Parser(src).parse()


# --------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    if isinstance(e, Pow):
        return 4
    if isinstance(e, Num) and e.value < 0:
        return 0
    return 5


def to_string(e):
    """Print with the fewest parentheses that reparse to the same tree."""

    def wrap(sub, need):
        s = to_string(sub)
        return f"({s})" if _prec(sub) < need else s

    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Const):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, 3)
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p + 1)}"
    if isinstance(e, Pow):
        return f"{wrap(e.base, 5)}^{wrap(e.exponent, 3)}"
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(to_string(a) for a in e.args) + ")"
    raise TypeError(f"not an expression node: {e!r}")


def variables(e):
    """Set of 1-based variable indices used by e."""
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, BinOp):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Pow):
        return variables(e.base) | variables(e.exponent)
    if isinstance(e, Call):
        return set().union(*(variables(a) for a in e.args))
    return set()


def dimension(e):
    return max(variables(e), default=0)


def has_nonsmooth(e):
    if isinstance(e, Call):
        return e.name in NONSMOOTH or any(has_nonsmooth(a) for a in e.args)
    if isinstance(e, Neg):
        return has_nonsmooth(e.operand)
    if isinstance(e, BinOp):
        return has_nonsmooth(e.left) or has_nonsmooth(e.right)
    if isinstance(e, Pow):
        return has_nonsmooth(e.base)
    return False


# --------------------------------------------------------------------------
# evaluation


_SMOOTH = {"sin": D.sin, "cos": D.cos, "tan": D.tan, "exp": D.exp, "log": D.log,
           "sqrt": D.sqrt, "atan": D.atan, "sinh": D.sinh, "cosh": D.cosh}


def _domain_fail(e, msg):
    raise DomainError(msg, e.span.line, e.span.column)


def _eval(e, env, differentiating):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Var):
        if e.index > len(env):
            _domain_fail(e, f"x{e.index} is not defined in dimension {len(env)}")
        return env[e.index - 1]
    if isinstance(e, Neg):
        return -_eval(e.operand, env, differentiating)
    if isinstance(e, BinOp):
        a = _eval(e.left, env, differentiating)
        b = _eval(e.right, env, differentiating)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(D.primal(b) == 0):
            _domain_fail(e, "division by zero")
        return a / b
    if isinstance(e, Pow):
        k = int(_fold_constant(e.exponent))
        base = _eval(e.base, env, differentiating)
        if k < 0 and np.any(D.primal(base) == 0):
            _domain_fail(e, "zero raised to a negative power")
        return D.ipow(base, k)
    if isinstance(e, Call):
        args = [_eval(a, env, differentiating) for a in e.args]
        x = args[0]
        px = D.primal(x)
        if e.name == "log" and np.any(px <= 0):
            _domain_fail(e, "log of a nonpositive number")
        if e.name == "sqrt":
            if np.any(px < 0):
                _domain_fail(e, "sqrt of a negative number")
            if differentiating and np.any(px == 0):
                _domain_fail(e, "sqrt is not differentiable at 0")
        if e.name in _SMOOTH:
            return _SMOOTH[e.name](x)
        if e.name == "abs":
            if differentiating and np.any(np.abs(px) <= KINK_TOL):
                raise NonSmoothError("abs evaluated at its kink", e.span.line, e.span.column)
            return D.absval(x)
        y = args[1]
        if differentiating and np.any(np.abs(px - D.primal(y)) <= KINK_TOL):
            raise NonSmoothError(f"{e.name} evaluated at its kink", e.span.line, e.span.column)
        return D.maximum(x, y) if e.name == "max" else D.minimum(x, y)
    raise TypeError(f"not an expression node: {e!r}")


def _columns(x, n=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    return [x[..., i] for i in range(x.shape[-1])]


def evaluate(e, x):
    """Value at a point (shape (n,)) or at many points (shape (..., n))."""
    if isinstance(e, str):
        e = parse(e)
    with np.errstate(all="ignore"):
        out = _eval(e, _columns(x), False)
    shape = np.shape(x)[:-1] if np.ndim(x) else ()
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    return float(out) if out.ndim == 0 else np.array(out)


def eval_with_derivatives(e, x):
    """(value, gradient, hessian) by nested forward-mode duals.

    ``x`` has shape (n,) or (..., n); gradients get a trailing (n,) axis and
    Hessians (n, n). Raises NonSmoothError within 1e-12 of an abs/min/max kink.
    """
    if isinstance(e, str):
        e = parse(e)
    cols = _columns(x)
    n = len(cols)
    shape = cols[0].shape
    val = None
    grad = np.zeros(shape + (n,))
    hess = np.zeros(shape + (n, n))
    zero = np.zeros(shape)
    one = np.ones(shape)
    with np.errstate(all="ignore"):
        for i in range(n):
            for j in range(i, n):
                env = [
                    D.Dual(D.Dual(c, one if k == j else zero), D.Dual(one if k == i else zero, zero))
                    for k, c in enumerate(cols)
                ]
                f = _eval(e, env, True)
                if not isinstance(f, D.Dual):
                    f = D.Dual(D.Dual(f, 0.0), D.Dual(0.0, 0.0))
                fa = f.a if isinstance(f.a, D.Dual) else D.Dual(f.a, 0.0)
                fb = f.b if isinstance(f.b, D.Dual) else D.Dual(f.b, 0.0)
                if val is None:
                    val = np.broadcast_to(fa.a, shape).astype(float)
                grad[..., j] = fa.b
                grad[..., i] = fb.a
                hess[..., i, j] = fb.b
                hess[..., j, i] = fb.b
    if val is None:
        val = np.broadcast_to(np.asarray(_eval(e, cols, False), dtype=float), shape)
    if not shape:
        return float(val), grad, hess
    return np.array(val), grad, hess
