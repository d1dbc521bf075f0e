"""Closed-form expressions in one variable ``t``.

A small recursive-descent parser, a numpy evaluator, a printer whose output
parses back to the same tree, and symbolic differentiation.

Grammar (tightest binding last)::

    sum     := product (('+' | '-') product)*
    product := power (('*' | '/') power)*
    power   := prefix (('^' | '**') integer)*
    prefix  := '-' prefix | '+' prefix | atom
    atom    := number | 't' | 'pi' | 'e' | name '(' sum ')' | '(' sum ')'

Unary minus binds tighter than ``^``, so ``-t^2`` reads as ``(-t)^2``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Expr", "Constant", "Variable", "Sum", "Difference", "Product", "Quotient",
    "Negate", "Power", "Exp", "Sin", "Cos", "ParseError", "EvaluationError",
    "parse", "evaluate", "differentiate", "to_text", "const",
]


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class Constant(Expr):
    value: float
    name: str | None = None


@dataclass(frozen=True)
class Variable(Expr):
    pass


@dataclass(frozen=True)
class Sum(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Difference(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Product(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Quotient(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Negate(Expr):
    arg: Expr


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


T = Variable()
ZERO = Constant(0.0)
ONE = Constant(1.0)

_FUNCTIONS = {"exp": Exp, "sin": Sin, "cos": Cos}
_NAMED = {"pi": math.pi, "e": math.e}


class ParseError(ValueError):
    """Malformed expression text.

    Attributes
    ----------
    offset : int
        Byte offset into the UTF-8 encoded input.
    expected, found : str
        Human-readable descriptions of the expected and the offending token.
    """

    def __init__(self, offset: int, expected: str, found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {offset}: expected {expected}, found {found}")


class EvaluationError(ArithmeticError):
    """Raised when an expression is evaluated at a quotient pole."""


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()])"
    r")"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            stripped = len(rest) - len(rest.lstrip())
            bad = pos + stripped
            raise ParseError(_byte_offset(text, bad), "a token", repr(text[bad]))
        kind = m.lastgroup
        if kind is None:
            break
        toks.append(_Tok(kind, m.group(kind), _byte_offset(text, m.start(kind))))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode("utf-8"))))
    return toks


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, expected: str):
        tok = self.peek()
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ParseError(tok.offset, expected, found)

    def expect_op(self, op: str):
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            self.fail(repr(op))
        self.take()

    def parse(self) -> Expr:
        node = self.sum()
        if self.peek().kind != "end":
            self.fail("end of input")
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            rhs = self.product()
            node = Sum(node, rhs) if op == "+" else Difference(node, rhs)
        return node

    def product(self) -> Expr:
        node = self.power()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.take().text
            rhs = self.power()
            node = Product(node, rhs) if op == "*" else Quotient(node, rhs)
        return node

    def power(self) -> Expr:
        node = self.prefix()
        while self.peek().kind == "op" and self.peek().text in ("^", "**"):
            self.take()
            node = Power(node, self.integer())
        return node

    def integer(self) -> int:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.take()
            n = self.integer()
            self.expect_op(")")
            return n
        sign = 1
        while tok.kind == "op" and tok.text in "+-":
            if tok.text == "-":
                sign = -sign
            self.take()
            tok = self.peek()
        if tok.kind != "num" or not tok.text.isdigit():
            self.fail("integer exponent")
        self.take()
        return sign * int(tok.text)

    def prefix(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            return Negate(self.prefix())
        if tok.kind == "op" and tok.text == "+":
            self.take()
            return self.prefix()
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return Constant(float(tok.text))
        if tok.kind == "name":
            name = tok.text
            if name == "t":
                self.take()
                return T
            if name in _NAMED:
                self.take()
                return Constant(_NAMED[name], name)
            if name in _FUNCTIONS:
                self.take()
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return _FUNCTIONS[name](arg)
            raise ParseError(tok.offset, "expression", f"unknown identifier {name!r}")
        if tok.kind == "op" and tok.text == "(":
            self.take()
            node = self.sum()
            self.expect_op(")")
            return node
        self.fail("expression")


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    >>> parse("2*t") == Product(Constant(2.0), Variable())
    True
    """
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# evaluation

def evaluate(e: Expr, t):
    """Evaluate ``e`` at ``t`` (a float or a numpy array).

    Raises :class:`EvaluationError` if any quotient denominator is exactly zero.
    """
    scalar = np.ndim(t) == 0
    x = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.broadcast_to(_eval(e, x), x.shape)
    return float(out) if scalar else np.array(out, dtype=float)


def _eval(e: Expr, x: np.ndarray):
    if isinstance(e, Constant):
        return np.full(x.shape, e.value)
    if isinstance(e, Variable):
        return x
    if isinstance(e, Sum):
        return _eval(e.left, x) + _eval(e.right, x)
    if isinstance(e, Difference):
        return _eval(e.left, x) - _eval(e.right, x)
    if isinstance(e, Product):
        return _eval(e.left, x) * _eval(e.right, x)
    if isinstance(e, Quotient):
        den = _eval(e.right, x)
        if np.any(den == 0):
            raise EvaluationError("quotient denominator vanishes")
        return _eval(e.left, x) / den
    if isinstance(e, Negate):
        return -_eval(e.arg, x)
    if isinstance(e, Power):
        base = _eval(e.base, x)
        if e.exponent < 0:
            if np.any(base == 0):
                raise EvaluationError("negative power of zero")
            return 1.0 / base ** (-e.exponent)
        return base ** e.exponent
    if isinstance(e, Exp):
        return np.exp(_eval(e.arg, x))
    if isinstance(e, Sin):
        return np.sin(_eval(e.arg, x))
    if isinstance(e, Cos):
        return np.cos(_eval(e.arg, x))
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# construction helpers; they fold identities exactly and never change values

def const(v: float) -> Expr:
    """A constant node; negative values become ``Negate(Constant(|v|))`` so
    that the printed form parses back identically."""
    v = float(v)
    if v < 0 or (v == 0 and math.copysign(1.0, v) < 0):
        return Negate(Constant(-v)) if v != 0 else ZERO
    return Constant(v)


def _is_const(e: Expr, v: float) -> bool:
    return isinstance(e, Constant) and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if isinstance(b, Negate):
        return Difference(a, b.arg)
    return Sum(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Difference(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Product(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    return Quotient(a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    if isinstance(a, Negate):
        return a.arg
    return Negate(a)


def _depends_on_t(e: Expr) -> bool:
    if isinstance(e, Variable):
        return True
    if isinstance(e, Constant):
        return False
    if isinstance(e, Power):
        return _depends_on_t(e.base)
    if isinstance(e, (Negate, Exp, Sin, Cos)):
        return _depends_on_t(e.arg)
    return _depends_on_t(e.left) or _depends_on_t(e.right)


def differentiate(e: Expr) -> Expr:
    """Symbolic derivative with respect to ``t``."""
    if isinstance(e, Constant):
        return ZERO
    if isinstance(e, Variable):
        return ONE
    if isinstance(e, Sum):
        return add(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Difference):
        return sub(differentiate(e.left), differentiate(e.right))
    if isinstance(e, Product):
        return add(mul(differentiate(e.left), e.right), mul(e.left, differentiate(e.right)))
    if isinstance(e, Quotient):
        if not _depends_on_t(e.right):
            return div(differentiate(e.left), e.right)
        num = sub(mul(differentiate(e.left), e.right), mul(e.left, differentiate(e.right)))
        return div(num, Power(e.right, 2))
    if isinstance(e, Negate):
        return neg(differentiate(e.arg))
    if isinstance(e, Power):
        n = e.exponent
        if n == 0:
            return ZERO
        inner = ONE if n == 1 else (e.base if n == 2 else Power(e.base, n - 1))
        return mul(mul(const(n), inner), differentiate(e.base))
    if isinstance(e, Exp):
        return mul(e, differentiate(e.arg))
    if isinstance(e, Sin):
        return mul(Cos(e.arg), differentiate(e.arg))
    if isinstance(e, Cos):
        return neg(mul(Sin(e.arg), differentiate(e.arg)))
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# printing

_PREC_SUM, _PREC_PRODUCT, _PREC_POWER, _PREC_PREFIX, _PREC_ATOM = 1, 2, 3, 4, 5


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _prec(e: Expr) -> int:
    if isinstance(e, (Sum, Difference)):
        return _PREC_SUM
    if isinstance(e, (Product, Quotient)):
        return _PREC_PRODUCT
    if isinstance(e, Power):
        return _PREC_POWER
    if isinstance(e, Negate):
        return _PREC_PREFIX
    if isinstance(e, Constant) and e.name is None and e.value < 0:
        return _PREC_SUM
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_text(e)
    return s if _prec(e) >= min_prec else f"({s})"


def to_text(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_text(e)) == e``."""
    if isinstance(e, Constant):
        if e.name is not None:
            return e.name
        if not math.isfinite(e.value):
            raise ValueError(f"non-finite constant {e.value!r}")
        return _fmt_number(e.value)
    if isinstance(e, Variable):
        return "t"
    if isinstance(e, (Sum, Difference)):
        op = "+" if isinstance(e, Sum) else "-"
        return f"{_wrap(e.left, _PREC_SUM)}{op}{_wrap(e.right, _PREC_PRODUCT)}"
    if isinstance(e, (Product, Quotient)):
        op = "*" if isinstance(e, Product) else "/"
        return f"{_wrap(e.left, _PREC_PRODUCT)}{op}{_wrap(e.right, _PREC_POWER)}"
    if isinstance(e, Power):
        n = e.exponent
        exp_text = str(n) if n >= 0 else f"({n})"
        return f"{_wrap(e.base, _PREC_PREFIX)}^{exp_text}"
    if isinstance(e, Negate):
        return f"-{_wrap(e.arg, _PREC_PREFIX)}"
    for cls, name in ((Exp, "exp"), (Sin, "sin"), (Cos, "cos")):
        if isinstance(e, cls):
            return f"{name}({to_text(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")



