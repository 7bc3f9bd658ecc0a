"""Recursive-descent parser for the configuration expression language.

Grammar (usual precedence, ``^`` binds tightest and associates right):

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := unary ("^" factor)?
    unary   := ("-" | "+")* primary
    primary := NUMBER | NAME | NAME "(" expr ")" | "(" expr ")"

Recognised functions: ``sin cos exp log sqrt``; constants ``pi`` and ``e``.
The allowed variable names are supplied by the caller (``u, v`` for
immersions, ``x1..x4`` for metric components).  Expressions evaluate over
plain numpy arrays or over :class:`~willmore4.jets.Jet` values, so custom
immersions get analytic jets for free.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .jets import Jet

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?|([A-Za-z_][A-Za-z_0-9]*)|(\S))")

_FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
_CONSTANTS = {"pi": math.pi, "e": math.e}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    arg: object


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.variables = variables
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _tokenize(self, text):
        tokens, i = [], 0
        while i < len(text):
            m = _TOKEN.match(text, i)
            if not m or m.end() == i:
                raise ConfigError(f"cannot tokenize expression at offset {i}: {text!r}")
            if m.group(1) is not None:
                tokens.append(("num", m.group(0).strip()))
            elif m.group(2) is not None:
                tokens.append(("name", m.group(2)))
            else:
                tokens.append(("op", m.group(3)))
            i = m.end()
        return tokens

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def _next(self):
        tok = self._peek()
        self.pos += 1
        return tok

    def _expect(self, value):
        kind, tok = self._next()
        if tok != value:
            raise ConfigError(f"expected {value!r} in expression {self.text!r}, got {tok!r}")

    def parse(self):
        node = self.expr()
        if self.pos != len(self.tokens):
            raise ConfigError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self._peek() == ("op", "+") or self._peek() == ("op", "-"):
            _, op = self._next()
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self._peek() == ("op", "*") or self._peek() == ("op", "/"):
            _, op = self._next()
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self._peek() == ("op", "^"):
            self._next()
            node = BinOp("^", node, self.factor())
        return node

    def unary(self):
        sign = 1
        while self._peek() in (("op", "-"), ("op", "+")):
            _, op = self._next()
            if op == "-":
                sign = -sign
        node = self.primary()
        return Neg(node) if sign < 0 else node

    def primary(self):
        kind, tok = self._next()
        if kind == "num":
            return Num(float(tok))
        if kind == "name":
            if self._peek() == ("op", "("):
                if tok not in _FUNCTIONS:
                    raise ConfigError(f"unknown function {tok!r} in {self.text!r}")
                self._next()
                arg = self.expr()
                self._expect(")")
                return Call(tok, arg)
            if tok in _CONSTANTS:
                return Num(_CONSTANTS[tok])
            if tok not in self.variables:
                raise ConfigError(
                    f"unknown variable {tok!r} in {self.text!r}; allowed: {self.variables}")
            return Var(tok)
        if tok == "(":
            node = self.expr()
            self._expect(")")
            return node
        raise ConfigError(f"unexpected token {tok!r} in expression {self.text!r}")


def parse(text: str, variables: tuple[str, ...]):
    """Parse ``text`` into an AST; ``variables`` lists the legal names."""
    if not isinstance(text, str):
        raise ConfigError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, tuple(variables)).parse()


def _apply(func: str, x):
    if isinstance(x, Jet):
        return getattr(x, func)()
    return getattr(np, func)(x)


def evaluate(node, env: dict):
    """Evaluate an AST against ``env`` (numpy arrays or Jet values)."""
    if isinstance(node, Num):
        sample = next(iter(env.values()))
        if isinstance(sample, Jet):
            return Jet.constant(node.value, sample.c.shape[2:])
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return _apply(node.func, evaluate(node.arg, env))
    if isinstance(node, BinOp):
        a, b = evaluate(node.left, env), evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        if node.op == "^":
            if isinstance(b, Jet):
                b = b.value
                if np.ndim(b):
                    b = np.asarray(b).flat[0]
            return a ** b
    raise ConfigError(f"unhandled expression node {node!r}")


def compile_expression(text: str, variables: tuple[str, ...]):
    """Return a callable ``f(**env)`` for ``text``."""
    ast = parse(text, variables)

    def _fn(**env):
        return evaluate(ast, env)

    _fn.source = text
    return _fn
