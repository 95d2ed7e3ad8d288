"""Map DSL parser and forward-mode evaluation with dual numbers.

A map file looks like::

    domain 6
    codomain 4
    param alpha
    F1 = x1
    F2 = sin(alpha)*x3 - cos(alpha)*x5
    F3 = x6
    F4 = x2

Parameters are bound at evaluation time so one parsed map serves a sweep.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "sqrt", "exp", "log")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class EvaluationError(ArithmeticError):
    """Domain error raised while evaluating component ``component`` (1-based)."""

    def __init__(self, message: str, component: int | None = None):
        where = f"F{component}: " if component is not None else ""
        super().__init__(where + message)
        self.component = component


# -- expression trees ------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Union[Num, Var, Param, Neg, BinOp, Call]


@dataclass(frozen=True)
class MapDefinition:
    domain_dim: int
    codomain_dim: int
    components: tuple
    params: tuple = ()
    source: str = ""

    def __post_init__(self):
        if self.domain_dim < 1 or self.codomain_dim < 1:
            raise ValueError("dimensions must be positive")
        if self.codomain_dim > self.domain_dim:
            raise ValueError("codomain dimension exceeds domain dimension")
        if len(self.components) != self.codomain_dim:
            raise ValueError("number of components does not match codomain")


# -- dual numbers ----------------------------------------------------------


class Dual:
    """Truncated number ``real + eps * dual`` with ``eps**2 = 0``.

    Both parts may be floats, numpy arrays (several seed directions at once)
    or Duals themselves, which gives second derivatives by nesting.
    """

    __slots__ = ("real", "dual")

    def __init__(self, real, dual):
        self.real = real
        self.dual = dual

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real + other.real, self.dual + other.dual)
        return Dual(self.real + other, self.dual)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real - other.real, self.dual - other.dual)
        return Dual(self.real - other, self.dual)

    def __rsub__(self, other):
        return Dual(other - self.real, -self.dual)

    def __neg__(self):
        return Dual(-self.real, -self.dual)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.real * other.real,
                        self.real * other.dual + self.dual * other.real)
        return Dual(self.real * other, self.dual * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            if base_value(other) == 0.0:
                raise ZeroDivisionError("division by zero")
            q = self.real / other.real
            return Dual(q, (self.dual - q * other.dual) / other.real)
        if other == 0.0:
            raise ZeroDivisionError("division by zero")
        return Dual(self.real / other, self.dual / other)

    def __rtruediv__(self, other):
        if base_value(self) == 0.0:
            raise ZeroDivisionError("division by zero")
        q = other / self.real
        return Dual(q, -q * self.dual / self.real)

    def __repr__(self):
        return f"Dual({self.real!r}, {self.dual!r})"


def base_value(x) -> float:
    while isinstance(x, Dual):
        x = x.real
    return float(x)


def _sin(x):
    if isinstance(x, Dual):
        return Dual(_sin(x.real), _cos(x.real) * x.dual)
    return math.sin(x)


def _cos(x):
    if isinstance(x, Dual):
        return Dual(_cos(x.real), -_sin(x.real) * x.dual)
    return math.cos(x)


def _exp(x):
    if isinstance(x, Dual):
        e = _exp(x.real)
        return Dual(e, e * x.dual)
    return math.exp(x)


def _log(x):
    if base_value(x) <= 0.0:
        raise ValueError("log of non-positive argument")
    if isinstance(x, Dual):
        return Dual(_log(x.real), x.dual / x.real)
    return math.log(x)


def _sqrt(x):
    v = base_value(x)
    if v < 0.0:
        raise ValueError("sqrt of negative argument")
    if isinstance(x, Dual):
        if v == 0.0:
            raise ValueError("sqrt is not differentiable at 0")
        s = _sqrt(x.real)
        return Dual(s, x.dual / (2.0 * s))
    return math.sqrt(x)


_FN = {"sin": _sin, "cos": _cos, "exp": _exp, "log": _log, "sqrt": _sqrt}


@dataclass(frozen=True)
class DualVector:
    value: np.ndarray
    derivative: np.ndarray

    def __post_init__(self):
        if np.shape(self.value)[0] != np.shape(self.derivative)[0]:
            raise ValueError("value and derivative lengths differ")


# -- parsing ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-z][a-z0-9_]*)|(?P<op>[-+*/()]))"
)
_IDENT = re.compile(r"[a-z][a-z0-9_]*\Z")
_VAR = re.compile(r"x(\d+)\Z")


def _tokenize(text: str, line: int, offset: int):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            col = offset + pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ParseError(f"unexpected character {text[col - offset - 1]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), offset + start + 1))
        pos = m.end()
    tokens.append(("end", "", offset + len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, line, domain_dim, params):
        self.tokens = tokens
        self.i = 0
        self.line = line
        self.m = domain_dim
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ParseError(message, self.line, tok[2])

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise self.error(f"expected {value!r}, found {tok[1] or 'end of line'!r}", tok)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return Neg(self.atom())
        return self.atom()

    def atom(self):
        tok = self.take()
        kind, text, col = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                self.expect("(")
                node = Call(text, self.expr())
                self.expect(")")
                return node
            v = _VAR.match(text)
            if v:
                k = int(v.group(1))
                if k < 1 or k > self.m:
                    raise ParseError(
                        f"variable index exceeds domain: {text} (domain {self.m})",
                        self.line, col)
                return Var(k - 1)
            if text in self.params:
                return Param(text)
            raise ParseError(f"undeclared identifier {text!r}", self.line, col)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected token {text or 'end of line'!r}", self.line, col)


def parse_expression(text: str, domain_dim: int, params: Sequence[str] = (),
                     line: int = 1, offset: int = 0) -> Node:
    return _Parser(_tokenize(text, line, offset), line, domain_dim, tuple(params)).parse()


def parse_map(text: str) -> MapDefinition:
    """Parse map DSL source into a :class:`MapDefinition`."""
    domain = codomain = None
    params: list[str] = []
    rhs: list[tuple[int, str, int, int]] = []  # (k, expr text, line, column offset)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip())
        words = stripped.split()
        head = words[0]
        if head in ("domain", "codomain"):
            if len(words) != 2 or not words[1].isdigit() or int(words[1]) < 1:
                raise ParseError(f"{head} expects a positive integer", lineno, indent + 1)
            if head == "domain":
                if domain is not None:
                    raise ParseError("duplicate domain declaration", lineno, indent + 1)
                domain = int(words[1])
            else:
                if codomain is not None:
                    raise ParseError("duplicate codomain declaration", lineno, indent + 1)
                codomain = int(words[1])
        elif head == "param":
            if len(words) != 2 or not _IDENT.match(words[1]):
                raise ParseError("param expects one identifier", lineno, indent + 1)
            name = words[1]
            if name in FUNCTIONS or _VAR.match(name):
                raise ParseError(f"reserved name {name!r}", lineno, indent + 1)
            if name in params:
                raise ParseError(f"duplicate param {name!r}", lineno, indent + 1)
            params.append(name)
        else:
            m = re.match(r"\s*F(\d+)\s*=", line)
            if m is None:
                raise ParseError(f"unrecognised declaration {head!r}", lineno, indent + 1)
            rhs.append((int(m.group(1)), line[m.end():], lineno, m.end()))

    if domain is None:
        raise ParseError("missing domain declaration", 1, 1)
    if codomain is None:
        raise ParseError("missing codomain declaration", 1, 1)
    if codomain > domain:
        raise ParseError(f"codomain {codomain} exceeds domain {domain}", 1, 1)
    if len(rhs) != codomain:
        raise ParseError(
            f"dimension mismatch: codomain {codomain} but {len(rhs)} component lines",
            rhs[-1][2] if rhs else 1, 1)
    components = []
    for expected, (k, body, lineno, offset) in enumerate(rhs, start=1):
        if k != expected:
            raise ParseError(f"expected F{expected}, found F{k}", lineno, 1)
        components.append(parse_expression(body, domain, params, lineno, offset))
    return MapDefinition(domain, codomain, tuple(components), tuple(params), text)


# -- evaluation ------------------------------------------------------------


def _walk(node, xs, env):
    if isinstance(node, Var):
        return xs[node.index]
    if isinstance(node, Num):
        return node.value
    if isinstance(node, BinOp):
        a = _walk(node.left, xs, env)
        b = _walk(node.right, xs, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if not isinstance(b, Dual) and b == 0.0:
            raise ZeroDivisionError("division by zero")
        return a / b
    if isinstance(node, Param):
        return env[node.name]
    if isinstance(node, Neg):
        return -_walk(node.arg, xs, env)
    return _FN[node.fn](_walk(node.arg, xs, env))


def _bind(fmap: MapDefinition, params: Mapping[str, float] | None) -> dict:
    params = dict(params or {})
    missing = [p for p in fmap.params if p not in params]
    if missing:
        raise EvaluationError(f"unbound parameter(s): {', '.join(missing)}")
    return {p: float(params[p]) for p in fmap.params}


def _check_point(fmap, point):
    point = np.asarray(point, dtype=float)
    if point.shape != (fmap.domain_dim,):
        raise ValueError(f"point must have length {fmap.domain_dim}, got shape {point.shape}")
    return point


def _run(fmap, xs, env):
    out = []
    for i, node in enumerate(fmap.components, start=1):
        try:
            out.append(_walk(node, xs, env))
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvaluationError(str(exc), i) from None
    return out


def evaluate(fmap: MapDefinition, point, params=None) -> np.ndarray:
    point = _check_point(fmap, point)
    env = _bind(fmap, params)
    return np.array(_run(fmap, [float(v) for v in point], env), dtype=float)


def _const_dual(v, m):
    # constants and parameters get a zero tangent so every component has an array part
    return v if isinstance(v, Dual) else Dual(float(v), np.zeros(m))


def jacobian(fmap: MapDefinition, point, params=None) -> np.ndarray:
    """n x m Jacobian by forward mode, all m seed directions carried at once."""
    point = _check_point(fmap, point)
    env = _bind(fmap, params)
    m = fmap.domain_dim
    seeds = np.eye(m)
    xs = [Dual(float(point[j]), seeds[j]) for j in range(m)]
    rows = _run(fmap, xs, env)
    return np.array([_const_dual(r, m).dual for r in rows], dtype=float).reshape(fmap.codomain_dim, m)


def directional(fmap: MapDefinition, point, params, direction) -> DualVector:
    """Value and first directional derivative along ``direction``."""
    point = _check_point(fmap, point)
    env = _bind(fmap, params)
    u = np.asarray(direction, dtype=float)
    xs = [Dual(float(point[j]), float(u[j])) for j in range(fmap.domain_dim)]
    rows = _run(fmap, xs, env)
    vals = [r.real if isinstance(r, Dual) else r for r in rows]
    ders = [r.dual if isinstance(r, Dual) else 0.0 for r in rows]
    return DualVector(np.array(vals, dtype=float), np.array(ders, dtype=float))


def directional_second(fmap: MapDefinition, point, params, u, v) -> np.ndarray:
    """D^2 F(point)[u, v] via nested dual numbers."""
    point = _check_point(fmap, point)
    env = _bind(fmap, params)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not np.any(u) or not np.any(v):
        raise ValueError("directions must be nonzero")
    xs = [Dual(Dual(float(point[j]), float(v[j])), Dual(float(u[j]), 0.0))
          for j in range(fmap.domain_dim)]
    out = []
    for r in _run(fmap, xs, env):
        if isinstance(r, Dual) and isinstance(r.dual, Dual):
            out.append(float(r.dual.dual))
        else:
            out.append(0.0)
    return np.array(out, dtype=float)
