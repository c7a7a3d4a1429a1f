"""A tiny piecewise arithmetic language for mapping bodies.

Grammar, lowest precedence first::

    expr    := compare ('?' expr ':' expr)?           # right-assoc
    compare := add (('=='|'!='|'<'|'<='|'>'|'>=') add)?   # non-assoc
    add     := mul (('+'|'-') mul)*
    mul     := power (('*'|'/') power)*
    power   := unary ('^' power)?                      # right-assoc
    unary   := '-' unary | atom
    atom    := NUMBER | VAR | VAR '[' INT ']' | FUNC '(' args ')' | '(' expr ')'

``VAR`` defaults to ``x``; a bare ``x`` means ``x[0]`` and is only allowed
when the dimension is 1. ``FUNC`` is one of ``abs``, ``min``, ``max``.
Several output coordinates are separated by ``;``. Comparisons evaluate to
1.0 or 0.0 using exact binary64 comparison; a condition is true when
nonzero.

Format version: 1.
"""

from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

GRAMMAR_VERSION = 1

FUNCTIONS = {"abs": (1, 1), "min": (2, None), "max": (2, None)}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class ExprEvalError(ArithmeticError):
    def __init__(self, message: str, node: "Node"):
        super().__init__(f"{message} in {to_source(node)!r} (byte offset {node.offset})")
        self.node = node


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = 0


@dataclass(frozen=True)
class Var:
    index: int
    offset: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Cond:
    test: "Node"
    then: "Node"
    orelse: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Node", ...]
    offset: int = 0


Node = Union[Num, Var, Neg, BinOp, Compare, Cond, Call]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>==|!=|<=|>=|[-+*/^<>?:;()\[\],])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", _byte_offset(src, pos))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    toks.append(_Tok("end", "", _byte_offset(src, len(src))))
    return toks


def _byte_offset(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


_COMPARE_OPS = ("==", "!=", "<", "<=", ">", ">=")


class _Parser:
    def __init__(self, src: str, dim: int, var: str):
        self.toks = _tokenize(src)
        self.i = 0
        self.dim = dim
        self.var = var

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "end":
            raise ExprSyntaxError(f"expected {text!r}, found {self._describe()}", self.tok.offset)
        return self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "end" else repr(self.tok.text)

    def outputs(self) -> list[Node]:
        outs = [self.expr()]
        while self.tok.text == ";" and self.tok.kind == "op":
            self.advance()
            outs.append(self.expr())
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self._describe()}", self.tok.offset)
        return outs

    def expr(self) -> Node:
        test = self.compare()
        if self.tok.text == "?":
            off = self.advance().offset
            then = self.expr()
            self.expect(":")
            orelse = self.expr()
            return Cond(test, then, orelse, off)
        return test

    def compare(self) -> Node:
        left = self.add()
        if self.tok.kind == "op" and self.tok.text in _COMPARE_OPS:
            t = self.advance()
            right = self.add()
            if self.tok.kind == "op" and self.tok.text in _COMPARE_OPS:
                raise ExprSyntaxError("comparisons cannot be chained", self.tok.offset)
            return Compare(t.text, left, right, t.offset)
        return left

    def add(self) -> Node:
        left = self.mul()
        while self.tok.kind == "op" and self.tok.text in "+-":
            t = self.advance()
            left = BinOp(t.text, left, self.mul(), t.offset)
        return left

    def mul(self) -> Node:
        left = self.power()
        while self.tok.kind == "op" and self.tok.text in "*/":
            t = self.advance()
            left = BinOp(t.text, left, self.power(), t.offset)
        return left

    def power(self) -> Node:
        base = self.unary()
        if self.tok.text == "^":
            t = self.advance()
            return BinOp("^", base, self.power(), t.offset)
        return base

    def unary(self) -> Node:
        if self.tok.text == "-" and self.tok.kind == "op":
            t = self.advance()
            return Neg(self.unary(), t.offset)
        return self.atom()

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"literal {t.text!r} overflows binary64", t.offset)
            return Num(value, t.offset)
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                return self.call(t)
            if t.text == self.var:
                return self.variable(t)
            raise ExprSyntaxError(f"unknown identifier {t.text!r}", t.offset)
        if t.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        raise ExprSyntaxError(f"unexpected {self._describe()}", t.offset)

    def variable(self, t: _Tok) -> Var:
        if self.tok.text == "[":
            self.advance()
            idx_tok = self.tok
            if idx_tok.kind != "num" or not idx_tok.text.isdigit():
                raise ExprSyntaxError("variable index must be a non-negative integer", idx_tok.offset)
            self.advance()
            self.expect("]")
            index = int(idx_tok.text)
            if index >= self.dim:
                raise ExprSyntaxError(
                    f"index {index} out of range for dimension {self.dim}", idx_tok.offset
                )
            return Var(index, t.offset)
        if self.dim != 1:
            raise ExprSyntaxError(
                f"bare {self.var!r} is only allowed in dimension 1; use {self.var}[i]", t.offset
            )
        return Var(0, t.offset)

    def call(self, t: _Tok) -> Call:
        lo, hi = FUNCTIONS[t.text]
        self.expect("(")
        args = [self.expr()]
        while self.tok.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprSyntaxError(f"{t.text}() got {len(args)} arguments", t.offset)
        return Call(t.text, tuple(args), t.offset)


def parse(src: str, dim: int = 1, var: str = "x") -> tuple[Node, ...]:
    """Parse ``src`` into one AST per output coordinate."""
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    if dim < 1:
        raise ValueError("dim must be >= 1")
    try:
        return tuple(_Parser(src, dim, var).outputs())
    except RecursionError:
        raise ExprSyntaxError("expression nested too deeply", 0) from None


def parse_scalar(src: str, var: str) -> Node:
    """Parse a single-output expression over a scalar variable (e.g. ``n`` or ``r``)."""
    outs = parse(src, 1, var)
    if len(outs) != 1:
        raise ExprSyntaxError("expected a single expression", 0)
    return outs[0]


# -- printing -----------------------------------------------------------------


def to_source(node: Node, var: str = "x", dim: int = 1) -> str:
    """Fully parenthesized source that reparses to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return var if dim == 1 else f"{var}[{node.index}]"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand, var, dim)})"
    if isinstance(node, (BinOp, Compare)):
        return f"({to_source(node.left, var, dim)} {node.op} {to_source(node.right, var, dim)})"
    if isinstance(node, Cond):
        parts = (to_source(n, var, dim) for n in (node.test, node.then, node.orelse))
        return "({} ? {} : {})".format(*parts)
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a, var, dim) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def format_outputs(asts: Sequence[Node], var: str = "x", dim: int = 1) -> str:
    return "; ".join(to_source(a, var, dim) for a in asts)


def strip_offsets(node: Node) -> Node:
    """Copy of ``node`` with all offsets zeroed, for structural comparison."""
    if isinstance(node, Num):
        return Num(node.value)
    if isinstance(node, Var):
        return Var(node.index)
    if isinstance(node, Neg):
        return Neg(strip_offsets(node.operand))
    if isinstance(node, BinOp):
        return BinOp(node.op, strip_offsets(node.left), strip_offsets(node.right))
    if isinstance(node, Compare):
        return Compare(node.op, strip_offsets(node.left), strip_offsets(node.right))
    if isinstance(node, Cond):
        return Cond(*(strip_offsets(n) for n in (node.test, node.then, node.orelse)))
    return Call(node.name, tuple(strip_offsets(a) for a in node.args))


def comparison_constants(asts: Sequence[Node]) -> list[tuple[int, float]]:
    """``(index, value)`` for every comparison of a variable against a literal."""
    found = []

    def walk(n: Node):
        if isinstance(n, Compare):
            for a, b in ((n.left, n.right), (n.right, n.left)):
                if isinstance(a, Var) and isinstance(b, Num):
                    found.append((a.index, b.value))
        for child in _children(n):
            walk(child)

    for a in asts:
        walk(a)
    return found


def _children(n: Node) -> tuple[Node, ...]:
    if isinstance(n, Neg):
        return (n.operand,)
    if isinstance(n, (BinOp, Compare)):
        return (n.left, n.right)
    if isinstance(n, Cond):
        return (n.test, n.then, n.orelse)
    if isinstance(n, Call):
        return n.args
    return ()


# -- evaluation ---------------------------------------------------------------

_CMP = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _power(base: float, exp: float, node: Node) -> float:
    try:
        if exp == int(exp) and abs(exp) <= 1024:
            n = int(exp)
            if n < 0:
                if base == 0.0:
                    raise ExprEvalError("division by zero", node)
                return 1.0 / (base ** -n)
            return base**n
        if base < 0.0:
            raise ExprEvalError("negative base with non-integer exponent", node)
        return math.pow(base, exp)
    except (OverflowError, ZeroDivisionError):
        raise ExprEvalError("power out of range", node) from None


def _finite(value: float, node: Node) -> float:
    if not math.isfinite(value):
        raise ExprEvalError("non-finite intermediate result", node)
    return value


def eval_node(node: Node, x: Sequence[float]) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Neg):
        return -eval_node(node.operand, x)
    if isinstance(node, BinOp):
        a = eval_node(node.left, x)
        b = eval_node(node.right, x)
        if node.op == "+":
            return _finite(a + b, node)
        if node.op == "-":
            return _finite(a - b, node)
        if node.op == "*":
            return _finite(a * b, node)
        if node.op == "/":
            if b == 0.0:
                raise ExprEvalError("division by zero", node)
            return _finite(a / b, node)
        return _finite(_power(a, b, node), node)
    if isinstance(node, Compare):
        return 1.0 if _CMP[node.op](eval_node(node.left, x), eval_node(node.right, x)) else 0.0
    if isinstance(node, Cond):
        branch = node.then if eval_node(node.test, x) != 0.0 else node.orelse
        return eval_node(branch, x)
    if isinstance(node, Call):
        vals = [eval_node(a, x) for a in node.args]
        if node.name == "abs":
            return abs(vals[0])
        return min(vals) if node.name == "min" else max(vals)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_ast(asts: Sequence[Node], at: Sequence[float]) -> tuple[float, ...]:
    """Evaluate one AST per output coordinate at the point ``at``."""
    return tuple(eval_node(a, at) for a in asts)


def eval_node_rows(node: Node, X: np.ndarray) -> np.ndarray:
    """Evaluate ``node`` on every row of ``X``; bitwise equal to :func:`eval_node`.

    Conditionals evaluate each branch only on the rows that select it.
    """
    m = X.shape[0]
    if m == 0:
        return np.empty(0)
    if isinstance(node, Num):
        return np.full(m, node.value)
    if isinstance(node, Var):
        return X[:, node.index].astype(float, copy=True)
    if isinstance(node, Neg):
        return -eval_node_rows(node.operand, X)
    if isinstance(node, BinOp):
        a = eval_node_rows(node.left, X)
        b = eval_node_rows(node.right, X)
        if node.op == "^":
            return np.array([_finite(_power(float(u), float(v), node), node) for u, v in zip(a, b)])
        if node.op == "/" and np.any(b == 0.0):
            raise ExprEvalError("division by zero", node)
        with np.errstate(over="ignore", invalid="ignore"):
            out = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.divide}[node.op](a, b)
        if not np.all(np.isfinite(out)):
            raise ExprEvalError("non-finite intermediate result", node)
        return out
    if isinstance(node, Compare):
        return _CMP[node.op](eval_node_rows(node.left, X), eval_node_rows(node.right, X)).astype(float)
    if isinstance(node, Cond):
        mask = eval_node_rows(node.test, X) != 0.0
        out = np.empty(m)
        if mask.any():
            out[mask] = eval_node_rows(node.then, X[mask])
        if (~mask).any():
            out[~mask] = eval_node_rows(node.orelse, X[~mask])
        return out
    if isinstance(node, Call):
        vals = [eval_node_rows(a, X) for a in node.args]
        if node.name == "abs":
            return np.abs(vals[0])
        # Python's min/max keep the first of equal values; mirror that for -0.0.
        out = vals[0]
        for v in vals[1:]:
            out = np.where(v < out, v, out) if node.name == "min" else np.where(v > out, v, out)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def evaluate_rows(asts: Sequence[Node], X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.column_stack([eval_node_rows(a, X) for a in asts]) if len(X) else np.empty((0, len(asts)))


class Expr:
    """Compiled expression over one scalar variable (schedule rules, rate functions)."""

    def __init__(self, src: str, var: str):
        self.src = src
        self.var = var
        self.node = parse_scalar(src, var)

    def __call__(self, value: float) -> float:
        return eval_node(self.node, (float(value),))

    def __repr__(self) -> str:
        return f"Expr({self.src!r}, var={self.var!r})"
