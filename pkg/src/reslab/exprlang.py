"""Expression language for dispersion relations, invariants and kernels.

Grammar (conventional precedence, ^ right-associative, no implicit
multiplication):

    additive       := multiplicative (('+' | '-') multiplicative)*
    multiplicative := unary (('*' | '/') unary)*
    unary          := ('-' | '+') unary | power
    power          := primary ('^' unary)?
    primary        := NUMBER | 'v'<k> | func '(' args ')' | '(' additive ')'

Functions: sqrt, exp, log, sin, cos, atan, abs (one argument), atan2(y, x),
and the vector forms dot(v, v), norm(v) where the bare identifier v denotes
the whole point. Components are v1..vd, 1-based.

Evaluation is batched through a register tape (see reslab.backend); the
scalar API raises on non-finite intermediates and on abs/norm kinks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from ._ops import (
    ERR_KINK,
    OP_ABS,
    OP_ADD,
    OP_ATAN,
    OP_ATAN2,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_DOT,
    OP_EXP,
    OP_LOG,
    OP_MUL,
    OP_NEG,
    OP_NORM,
    OP_POW,
    OP_POWC,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
)


class ExprParseError(ValueError):
    """Syntax, name, dimension or arity problem, annotated with a position."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(ValueError):
    """Non-finite value or intermediate during evaluation."""


class NonDifferentiableError(EvaluationError):
    """abs/norm evaluated within KINK_TOL of its kink in a derivative mode."""


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Comp:
    index: int  # 1-based


@dataclass(frozen=True)
class VecDot:
    pass


@dataclass(frozen=True)
class VecNorm:
    pass


@dataclass(frozen=True)
class Neg:
    a: object


@dataclass(frozen=True)
class Add:
    a: object
    b: object


@dataclass(frozen=True)
class Sub:
    a: object
    b: object


@dataclass(frozen=True)
class Mul:
    a: object
    b: object


@dataclass(frozen=True)
class Div:
    a: object
    b: object


@dataclass(frozen=True)
class Pow:
    a: object
    b: object


@dataclass(frozen=True)
class Fun:
    name: str
    a: object


@dataclass(frozen=True)
class Atan2:
    y: object
    x: object


_UNARY_FUNCS = {
    "sqrt": OP_SQRT,
    "exp": OP_EXP,
    "log": OP_LOG,
    "sin": OP_SIN,
    "cos": OP_COS,
    "atan": OP_ATAN,
    "abs": OP_ABS,
}
_FUNC_NAMES = set(_UNARY_FUNCS) | {"atan2", "dot", "norm"}


# ---------------------------------------------------------------- tokenizer

_OPS = set("+-*/^(),")


def _tokenize(text):
    toks = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            toks.append((c, c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                val = float(text[i:j])
            except ValueError:
                raise ExprParseError(f"bad number literal '{text[i:j]}'", i)
            toks.append(("num", val, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("ident", text[i:j], i))
            i = j
            continue
        raise ExprParseError(f"unexpected character '{c}'", i)
    toks.append(("end", None, n))
    return toks


# ------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text, d):
        self.text = text
        self.d = d
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind, what):
        t = self.next()
        if t[0] != kind:
            raise ExprParseError(f"expected {what}", t[2])
        return t

    def parse(self):
        node = self.additive()
        t = self.peek()
        if t[0] != "end":
            raise ExprParseError(f"unexpected trailing input '{t[1]}'", t[2])
        return node

    def additive(self):
        node = self.multiplicative()
        while self.peek()[0] in ("+", "-"):
            op = self.next()[0]
            rhs = self.multiplicative()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def multiplicative(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op = self.next()[0]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        t = self.peek()
        if t[0] == "-":
            self.next()
            return Neg(self.unary())
        if t[0] == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[0] == "^":
            self.next()
            return Pow(base, self.unary())
        return base

    def primary(self):
        kind, val, pos = self.next()
        if kind == "num":
            return Num(val)
        if kind == "(":
            node = self.additive()
            self.expect(")", "')'")
            return node
        if kind == "ident":
            if self.peek()[0] == "(":
                return self.funcall(val, pos)
            return self.component(val, pos)
        raise ExprParseError("expected a number, component, function or '('", pos)

    def component(self, name, pos):
        if name == "v":
            raise ExprParseError(
                "bare 'v' is only valid inside dot(v, v) or norm(v)", pos
            )
        if name.startswith("v") and name[1:].isdigit():
            idx = int(name[1:])
            if not 1 <= idx <= self.d:
                raise ExprParseError(
                    f"component {name} out of range for d={self.d}", pos
                )
            return Comp(idx)
        raise ExprParseError(f"unknown identifier '{name}'", pos)

    def funcall(self, name, pos):
        if name not in _FUNC_NAMES:
            raise ExprParseError(f"unknown function '{name}'", pos)
        self.expect("(", "'('")
        if name == "dot":
            self.vector_arg()
            self.expect(",", "','")
            self.vector_arg()
            self.expect(")", "')'")
            return VecDot()
        if name == "norm":
            self.vector_arg()
            self.expect(")", "')'")
            return VecNorm()
        if name == "atan2":
            y = self.additive()
            t = self.next()
            if t[0] != ",":
                raise ExprParseError("atan2 takes exactly two arguments", t[2])
            x = self.additive()
            self.expect(")", "')'")
            return Atan2(y, x)
        arg = self.additive()
        t = self.next()
        if t[0] == ",":
            raise ExprParseError(f"{name} takes exactly one argument", t[2])
        if t[0] != ")":
            raise ExprParseError("expected ')'", t[2])
        return Fun(name, arg)

    def vector_arg(self):
        kind, val, pos = self.next()
        if kind != "ident" or val != "v":
            raise ExprParseError("dot/norm take the bare vector 'v'", pos)


# ------------------------------------------------------------------ printer

_PREC_ADD = 10
_PREC_MUL = 20
_PREC_NEG = 25
_PREC_POW = 30
_PREC_ATOM = 100


def _fmt(node, prec):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Comp):
        return f"v{node.index}"
    if isinstance(node, VecDot):
        return "dot(v, v)"
    if isinstance(node, VecNorm):
        return "norm(v)"
    if isinstance(node, Neg):
        s = f"-{_fmt(node.a, _PREC_NEG + 1)}"
        return f"({s})" if prec > _PREC_NEG else s
    if isinstance(node, Add):
        s = f"{_fmt(node.a, _PREC_ADD)} + {_fmt(node.b, _PREC_ADD + 1)}"
        return f"({s})" if prec > _PREC_ADD else s
    if isinstance(node, Sub):
        s = f"{_fmt(node.a, _PREC_ADD)} - {_fmt(node.b, _PREC_ADD + 1)}"
        return f"({s})" if prec > _PREC_ADD else s
    if isinstance(node, Mul):
        s = f"{_fmt(node.a, _PREC_MUL)}*{_fmt(node.b, _PREC_MUL + 1)}"
        return f"({s})" if prec > _PREC_MUL else s
    if isinstance(node, Div):
        s = f"{_fmt(node.a, _PREC_MUL)}/{_fmt(node.b, _PREC_MUL + 1)}"
        return f"({s})" if prec > _PREC_MUL else s
    if isinstance(node, Pow):
        s = f"{_fmt(node.a, _PREC_POW + 1)}^{_fmt(node.b, _PREC_POW)}"
        return f"({s})" if prec > _PREC_POW else s
    if isinstance(node, Fun):
        return f"{node.name}({_fmt(node.a, 0)})"
    if isinstance(node, Atan2):
        return f"atan2({_fmt(node.y, 0)}, {_fmt(node.x, 0)})"
    raise TypeError(f"bad node {node!r}")


# ----------------------------------------------------------- tape compiler


class _TapeBuilder:
    def __init__(self):
        self.ops = []
        self.ia = []
        self.ib = []
        self.cs = []

    def emit(self, op, a=0, b=0, c=0.0):
        self.ops.append(op)
        self.ia.append(a)
        self.ib.append(b)
        self.cs.append(c)
        return len(self.ops) - 1

    def walk(self, node):
        if isinstance(node, Num):
            return self.emit(OP_CONST, c=node.value)
        if isinstance(node, Comp):
            return self.emit(OP_VAR, a=node.index - 1)
        if isinstance(node, VecDot):
            return self.emit(OP_DOT)
        if isinstance(node, VecNorm):
            return self.emit(OP_NORM)
        if isinstance(node, Neg):
            return self.emit(OP_NEG, a=self.walk(node.a))
        if isinstance(node, (Add, Sub, Mul, Div)):
            op = {Add: OP_ADD, Sub: OP_SUB, Mul: OP_MUL, Div: OP_DIV}[type(node)]
            a = self.walk(node.a)
            b = self.walk(node.b)
            return self.emit(op, a=a, b=b)
        if isinstance(node, Pow):
            a = self.walk(node.a)
            if isinstance(node.b, Num):
                return self.emit(OP_POWC, a=a, c=node.b.value)
            if isinstance(node.b, Neg) and isinstance(node.b.a, Num):
                return self.emit(OP_POWC, a=a, c=-node.b.a.value)
            b = self.walk(node.b)
            return self.emit(OP_POW, a=a, b=b)
        if isinstance(node, Fun):
            return self.emit(_UNARY_FUNCS[node.name], a=self.walk(node.a))
        if isinstance(node, Atan2):
            y = self.walk(node.y)
            x = self.walk(node.x)
            return self.emit(OP_ATAN2, a=y, b=x)
        raise TypeError(f"bad node {node!r}")


@dataclass(frozen=True)
class Tape:
    ops: np.ndarray
    ia: np.ndarray
    ib: np.ndarray
    cs: np.ndarray

    def __len__(self):
        return len(self.ops)


def _compile(node):
    tb = _TapeBuilder()
    tb.walk(node)
    return Tape(
        ops=np.asarray(tb.ops, dtype=np.int32),
        ia=np.asarray(tb.ia, dtype=np.int32),
        ib=np.asarray(tb.ib, dtype=np.int32),
        cs=np.asarray(tb.cs, dtype=np.float64),
    )


# --------------------------------------------------------------- public API


@dataclass
class Expr:
    """A parsed expression over points in R^d."""

    d: int
    root: object
    _tape: Tape | None = field(default=None, repr=False, compare=False)

    def __str__(self):
        return _fmt(self.root, 0)

    @property
    def tape(self):
        if self._tape is None:
            self._tape = _compile(self.root)
        return self._tape


@dataclass(frozen=True)
class Jet:
    """Value, gradient and symmetrized Hessian at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def parse(text, d):
    """Parse an expression over v1..vd; raises ExprParseError with position."""
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    root = _Parser(text, d).parse()
    return Expr(d=d, root=root)


def _check_point(expr, v):
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != expr.d:
        raise ValueError(f"point has dimension {v.shape[0]}, expression has d={expr.d}")
    return v


def values_batch(expr, X):
    """Batched values; returns (values, err) without raising."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    return backend.tape_values(expr.tape, X)


def jet1_batch(expr, X):
    """Batched values and gradients; returns (values, grads, err)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    return backend.tape_jet1(expr.tape, X)


def jet2_batch(expr, X):
    """Batched values, gradients, Hessians; returns (v, g, h, err)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    v, g, h, err = backend.tape_jet2(expr.tape, X)
    h = 0.5 * (h + np.swapaxes(h, 1, 2))
    return v, g, h, err


def _raise_eval(err, expr, v):
    if err == ERR_KINK:
        raise NonDifferentiableError(
            f"'{expr}' is non-differentiable at {list(map(float, v))}"
        )
    raise EvaluationError(
        f"non-finite result evaluating '{expr}' at {list(map(float, v))}"
    )


def evaluate(expr, v):
    """Evaluate at one point; raises EvaluationError on non-finite values."""
    v = _check_point(expr, v)
    vals, err = values_batch(expr, v[None, :])
    if err[0]:
        _raise_eval(err[0], expr, v)
    return float(vals[0])


def jet(expr, v):
    """Value, gradient and Hessian at one point."""
    v = _check_point(expr, v)
    vals, grads, hess, err = jet2_batch(expr, v[None, :])
    if err[0]:
        _raise_eval(err[0], expr, v)
    return Jet(value=float(vals[0]), gradient=grads[0].copy(), hessian=hess[0].copy())


def gradient(expr, v):
    """Value and gradient at one point."""
    v = _check_point(expr, v)
    vals, grads, err = jet1_batch(expr, v[None, :])
    if err[0]:
        _raise_eval(err[0], expr, v)
    return float(vals[0]), grads[0].copy()


def constant(value, d):
    """Expression for a numeric constant."""
    return Expr(d=d, root=Num(float(value)))


def finite_diff_gradient(expr, v, h=1e-5):
    """Central finite-difference gradient, the AD cross-check."""
    v = _check_point(expr, v)
    g = np.empty(expr.d)
    for i in range(expr.d):
        vp = v.copy()
        vm = v.copy()
        vp[i] += h
        vm[i] -= h
        g[i] = (evaluate(expr, vp) - evaluate(expr, vm)) / (2.0 * h)
    return g
