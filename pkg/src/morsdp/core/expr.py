"""Small arithmetic language for user-defined utilities.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | VAR | FUNC '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-d1^2``
is ``-(d1^2)``.  Variables are ``d1 .. dk`` (``d_1`` is also accepted).
Evaluation works on floats and on numpy arrays alike.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import UtilityDomainError, UtilityError

FUNCTIONS = ("exp", "log")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, matches the ``d<k>`` spelling


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg', 'exp' or 'log'
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]


def Add(a, b):
    return Binary("+", a, b)


def Sub(a, b):
    return Binary("-", a, b)


def Mul(a, b):
    return Binary("*", a, b)


def Div(a, b):
    return Binary("/", a, b)


def Pow(a, b):
    return Binary("^", a, b)


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_VAR = re.compile(r"d_?([1-9]\d*)$")


def _tokenize(src):
    pos = 0
    tokens = []
    src = src.rstrip()
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            raise UtilityError(f"lexical error at column {pos + 1}: {src[pos:pos + 10]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, arity):
        self.src = src
        self.arity = arity
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            found = text or "end of input"
            raise UtilityError(f"expected {value!r} at column {pos + 1}, found {found!r}")

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise UtilityError(f"unexpected {text!r} at column {pos + 1}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def primary(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            m = _VAR.match(text)
            if m is None:
                raise UtilityError(f"unknown identifier {text!r} at column {pos + 1}")
            k = int(m.group(1))
            if k > self.arity:
                raise UtilityError(
                    f"variable {text!r} at column {pos + 1} exceeds arity {self.arity}"
                )
            return Var(k)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = text or "end of input"
        raise UtilityError(f"unexpected {found!r} at column {pos + 1}")


def parse_utility_expr(src: str, arity: int) -> Node:
    """Parse ``src`` into an AST over the variables ``d1 .. d<arity>``."""
    if arity < 1:
        raise UtilityError("arity must be at least 1")
    return _Parser(src, arity).parse()


def to_source(node: Node) -> str:
    """Print ``node`` so that parsing the result gives back an equal tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"d{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


def variables(node: Node) -> set:
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return set()


def evaluate(node: Node, d):
    """Evaluate on ``d``: a sequence of floats, or an array whose last axis is the arity."""
    with np.errstate(all="ignore"):
        out = _eval(node, d)
    if np.any(np.isnan(out)):
        raise UtilityDomainError("expression evaluated to NaN (division 0/0 or similar)")
    return out


def _eval(node, d):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return d[..., node.index - 1] if isinstance(d, np.ndarray) else float(d[node.index - 1])
    if isinstance(node, Unary):
        x = _eval(node.arg, d)
        if node.op == "neg":
            return -x
        if node.op == "exp":
            return np.exp(x)
        if np.any(np.asarray(x) <= 0):
            raise UtilityDomainError("log of a non-positive value")
        return np.log(x)
    a = _eval(node.left, d)
    b = _eval(node.right, d)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(np.asarray(b) == 0):
            raise UtilityDomainError("division by zero")
        return np.divide(a, b)
    return np.power(a, b)
