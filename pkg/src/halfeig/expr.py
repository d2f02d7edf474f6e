"""Coefficient mini-language.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 'x' | 'y' | 'pi' | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Functions: sin cos exp abs (one argument), min max (two or more).
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np


class ExprError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        super().__init__(msg if offset is None else f"{msg} at offset {offset}")


_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}
_VARIADIC = {"min": np.minimum, "max": np.maximum}
_VARS = ("x", "y")
_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Node:
    kind: str  # num, var, neg, bin, call
    value: object = None
    args: tuple = ()


def _tokenize(src: str):
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            bad = len(src) - len(src[pos:].lstrip())
            raise ExprError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExprError(f"expected {value!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = Node("bin", op, (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = Node("bin", op, (node, self.unary()))
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Node("neg", None, (self.unary(),))
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Node("bin", "^", (base, self.unary()))
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Node("num", float(text))
        if kind == "name":
            if text in _VARS:
                return Node("var", text)
            if text == "pi":
                return Node("num", float(np.pi))
            if text in _UNARY or text in _VARIADIC:
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if text in _UNARY and len(args) != 1:
                    raise ExprError(f"{text}() takes one argument", off)
                if text in _VARIADIC and len(args) < 2:
                    raise ExprError(f"{text}() takes at least two arguments", off)
                return Node("call", text, tuple(args))
            raise ExprError(f"unknown identifier {text!r}", off)
        if text == "(":
            node = self.expr()
            self.take(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise ExprError(f"unexpected {what}", off)


@dataclass(frozen=True)
class Expr:
    """A parsed expression; evaluation is vectorized over node coordinates."""

    src: str
    root: Node

    def __call__(self, x=0.0, y=0.0, *, div_tol: float = 1e-14) -> np.ndarray:
        env = {"x": np.asarray(x, dtype=float), "y": np.asarray(y, dtype=float)}
        with np.errstate(all="ignore"):
            out = _eval(self.root, env, div_tol)
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            raise ExprError(f"expression {self.src!r} is not finite on the domain")
        return out

    def __str__(self):
        return self.src


def _eval(node: Node, env, div_tol):
    k = node.kind
    if k == "num":
        return node.value
    if k == "var":
        return env[node.value]
    if k == "neg":
        return -_eval(node.args[0], env, div_tol)
    if k == "call":
        args = [_eval(a, env, div_tol) for a in node.args]
        if node.value in _UNARY:
            return _UNARY[node.value](args[0])
        fn = _VARIADIC[node.value]
        out = args[0]
        for a in args[1:]:
            out = fn(out, a)
        return out
    a, b = (_eval(arg, env, div_tol) for arg in node.args)
    op = node.value
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(np.abs(b) <= div_tol):
            raise ExprError("division by (near) zero")
        return a / b
    return np.power(a, b)


def parse_expr(src) -> Expr:
    if isinstance(src, Expr):
        return src
    if isinstance(src, (int, float)):
        src = repr(float(src))
    if not isinstance(src, str) or not src.strip():
        raise ExprError("empty expression")
    p = _Parser(src)
    root = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise ExprError(f"unexpected {text!r}", off)
    return Expr(src, root)
