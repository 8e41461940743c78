"""A tiny expression language for Lagrangians and history functions.

Grammar, lowest to highest precedence::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := number | name | name '(' expr ')' | '(' expr ')'

Names are either variables (declared per context, e.g. ``x, y, v`` for the
inner Lagrangian) or the parameters ``alpha, beta, tau, pi``. Functions take
one argument: ``sin cos exp ln abs gamma pospart sign step``, where
``pospart(u) = max(u, 0)`` and ``step`` is its derivative (0 at u = 0).

Evaluation is vectorised: an environment may map names to numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np

from fracvar.fracops import gamma as _gamma

__all__ = [
    "Call",
    "DifferentiationError",
    "EvalError",
    "Expr",
    "ExprError",
    "FUNCTIONS",
    "L_VARS",
    "Neg",
    "Num",
    "PARAMS",
    "PHI_VARS",
    "Param",
    "ParseError",
    "Pow",
    "Var",
    "BinOp",
    "differentiate",
    "evaluate",
    "free_vars",
    "is_constant",
    "l_VARS",
    "parse",
]

L_VARS = frozenset({"x", "y", "v", "w", "z", "y_tau", "v_tau"})
l_VARS = frozenset({"x", "y", "v", "w"})
PHI_VARS = frozenset({"x"})
PARAMS = frozenset({"alpha", "beta", "tau", "pi"})
FUNCTIONS = frozenset(
    {"sin", "cos", "exp", "ln", "abs", "gamma", "pospart", "sign", "step"}
)


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int) -> None:
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset)


class EvalError(ExprError):
    def __init__(self, message: str, subexpr: Expr | None = None) -> None:
        self.subexpr = subexpr
        if subexpr is not None:
            message = f"{message} in '{subexpr}'"
        super().__init__(message)


class DifferentiationError(ExprError):
    pass


# {{{ tree

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = range(1, 6)


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    prec = _PREC_ATOM

    def __str__(self) -> str:
        return _show(self)

    def depth(self) -> int:
        """Tree depth, with variable-free subtrees counted as a single leaf."""
        if is_constant(self):
            return 1
        return 1 + max((c.depth() for c in self.children()), default=0)

    def children(self) -> tuple[Expr, ...]:
        return ()


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    prec = _PREC_NEG

    def children(self):
        return (self.operand,)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def prec(self) -> int:
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}[self.op]

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr
    prec = _PREC_POW

    def children(self):
        return (self.base, self.exponent)


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def children(self):
        return (self.arg,)


@lru_cache(maxsize=4096)
def free_vars(e: Expr) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset({e.name})
    return reduce(frozenset.union, (free_vars(c) for c in e.children()), frozenset())


def is_constant(e: Expr) -> bool:
    """True if ``e`` has no variables (parameters and literals only)."""
    return not free_vars(e)


def _fmt_num(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 else text


def _show(e: Expr) -> str:
    def wrap(child: Expr, min_prec: int) -> str:
        text = _show(child)
        return f"({text})" if child.prec < min_prec else text

    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, _PREC_NEG)
    if isinstance(e, BinOp):
        # left-associative: equal precedence on the right needs parentheses
        return f"{wrap(e.left, e.prec)} {e.op} {wrap(e.right, e.prec + 1)}"
    if isinstance(e, Pow):
        return f"{wrap(e.base, _PREC_ATOM)}^{wrap(e.exponent, _PREC_NEG)}"
    if isinstance(e, Call):
        return f"{e.func}({_show(e.arg)})"
    raise TypeError(f"unknown node {e!r}")


# }}}


# {{{ parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str]) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.take()
        if text != value or kind != "op":
            found = text or "end of input"
            raise ParseError(f"expected {value!r}, found {found!r}", pos)

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                if self.peek()[:2] != ("op", "("):
                    raise ParseError(f"function {text!r} must be called", pos)
                self.take()
                arg = self.expr()
                if self.peek()[:2] == ("op", ","):
                    raise ParseError(f"{text}() takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Call(text, arg)
            if self.peek()[:2] == ("op", "("):
                raise ParseError(f"{text!r} is not a function", pos)
            if text in PARAMS:
                return Param(text)
            if text in self.allowed:
                return Var(text)
            raise UnknownIdentifierError(text, pos)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse(text: str, allowed_vars=L_VARS) -> Expr:
    """Parse ``text`` into an expression over ``allowed_vars``.

    :raises ParseError: on syntax errors (with the byte offset), unknown
        identifiers (:class:`UnknownIdentifierError`) and wrong arity.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    p = _Parser(text, frozenset(allowed_vars))
    node = p.expr()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", pos)
    return node


# }}}


# {{{ evaluation

_PARAM_DEFAULTS = {"pi": math.pi}


def evaluate(e: Expr, env: dict):
    """Evaluate ``e`` with names looked up in ``env`` (scalars or arrays).

    :raises EvalError: on division by zero, logarithms of non-positive
        values, ``0`` raised to a negative power, real powers of negative
        bases, poles of the gamma function and ``sign(0)``.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, (Var, Param)):
        if e.name in env:
            return env[e.name]
        if e.name in _PARAM_DEFAULTS:
            return _PARAM_DEFAULTS[e.name]
        raise EvalError(f"no value bound to {e.name!r}", e)
    if isinstance(e, Neg):
        return -evaluate(e.operand, env)
    if isinstance(e, BinOp):
        lhs, rhs = evaluate(e.left, env), evaluate(e.right, env)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if np.any(np.asarray(rhs) == 0):
            raise EvalError("division by zero", e)
        return lhs / rhs
    if isinstance(e, Pow):
        base = np.asarray(evaluate(e.base, env), dtype=np.float64)
        expo = np.asarray(evaluate(e.exponent, env), dtype=np.float64)
        if np.any((base == 0) & (expo < 0)):
            raise EvalError("zero raised to a negative power", e)
        if np.any((base < 0) & (expo != np.round(expo))):
            raise EvalError("non-integer power of a negative number", e)
        return _scalar(np.power(base, expo))
    if isinstance(e, Call):
        arg = evaluate(e.arg, env)
        return _call(e, np.asarray(arg, dtype=np.float64))
    raise TypeError(f"unknown node {e!r}")


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def _call(e: Call, arg: np.ndarray):
    f = e.func
    if f == "ln":
        if np.any(arg <= 0):
            raise EvalError("logarithm of a non-positive number", e)
        return _scalar(np.log(arg))
    if f == "gamma":
        if np.any((arg <= 0) & (arg == np.round(arg))):
            raise EvalError("gamma function pole", e)
        return _scalar(np.asarray(_gamma(arg)))
    if f == "sign":
        if np.any(arg == 0):
            raise EvalError("sign is undefined at 0", e)
        return _scalar(np.sign(arg))
    ufunc = {
        "sin": np.sin,
        "cos": np.cos,
        "exp": np.exp,
        "abs": np.abs,
        "pospart": lambda u: np.maximum(u, 0.0),
        "step": lambda u: (u > 0).astype(np.float64),
    }[f]
    return _scalar(ufunc(arg))


# }}}


# {{{ differentiation

_ZERO, _ONE = Num(0.0), Num(1.0)


def _add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if b == _ZERO:
        return a
    if a == _ZERO:
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if a == _ZERO:
        return _ZERO
    if b == _ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if b == _ONE:
        return a
    if b == _ZERO:
        return _ONE
    return Pow(a, b)


def differentiate(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var``.

    Literal arithmetic is folded and trivial factors dropped, so the result
    is the literal ``0`` whenever ``e`` does not depend on ``var``.

    ``gamma`` cannot be differentiated through a ``var``-dependent argument;
    ``abs`` differentiates to ``sign`` and ``pospart`` to ``step``.
    """
    if var not in free_vars(e):
        return _ZERO
    d = lambda node: differentiate(node, var)  # noqa: E731

    if isinstance(e, Var):
        return _ONE
    if isinstance(e, Neg):
        return _neg(d(e.operand))
    if isinstance(e, BinOp):
        u, w = e.left, e.right
        if e.op == "+":
            return _add(d(u), d(w))
        if e.op == "-":
            return _sub(d(u), d(w))
        if e.op == "*":
            return _add(_mul(d(u), w), _mul(u, d(w)))
        return _div(_sub(_mul(d(u), w), _mul(u, d(w))), _pow(w, Num(2)))
    if isinstance(e, Pow):
        u, g = e.base, e.exponent
        if var not in free_vars(g):
            return _mul(_mul(g, _pow(u, _sub(g, _ONE))), d(u))
        if var not in free_vars(u):
            return _mul(_mul(e, Call("ln", u)), d(g))
        return _mul(e, _add(_mul(d(g), Call("ln", u)), _div(_mul(g, d(u)), u)))
    if isinstance(e, Call):
        u, du = e.arg, d(e.arg)
        if e.func == "sin":
            return _mul(Call("cos", u), du)
        if e.func == "cos":
            return _mul(_neg(Call("sin", u)), du)
        if e.func == "exp":
            return _mul(e, du)
        if e.func == "ln":
            return _div(du, u)
        if e.func == "abs":
            return _mul(Call("sign", u), du)
        if e.func == "pospart":
            return _mul(Call("step", u), du)
        if e.func in ("sign", "step"):
            return _ZERO
        raise DifferentiationError(
            f"cannot differentiate {e.func}() of an argument depending on {var!r}"
        )
    raise TypeError(f"unknown node {e!r}")


# }}}
