"""Expression language for fluxes, sources and data.

Expressions are arithmetic in the variables ``t``, ``x``, ``u`` with the
builtins ``sin cos exp log abs sqrt min max if``.  Evaluation is vectorized
over numpy arrays.  Partial derivatives up to mixed second order come from
hyper-dual forward-mode arithmetic, never from finite differences.

Grammar::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := ("-")? atom ("^" atom)?
    atom   := number | "t" | "x" | "u" | "pi" | "e"
            | ident "(" expr ("," expr)* ")" | "(" expr ")"

``if(c, a, b)`` selects ``a`` where ``c > 0`` and ``b`` elsewhere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Expr",
    "Jet2",
    "ExprSyntaxError",
    "ExprDomainError",
    "parse",
    "eval_jet",
    "jet_arrays",
    "sup_abs_on_box",
    "SELECTORS",
]

VARIABLES = ("t", "x", "u")
CONSTANTS = {"pi": math.pi, "e": math.e}
ARITY = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "abs": 1,
    "sqrt": 1,
    "min": 2,
    "max": 2,
    "if": 3,
}
PIECEWISE = frozenset({"if", "abs", "min", "max"})
SELECTORS = ("value", "d_u", "d_x", "d_xu", "d_xx")


class ExprSyntaxError(ValueError):
    """Malformed expression text.

    ``offset`` is the 1-based byte position of the fault; a missing token at
    the end of the input is reported at ``len(text) + 1``.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class ExprDomainError(ArithmeticError):
    """A builtin was evaluated outside its mathematical domain."""

    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


# ---------------------------------------------------------------------------
# tree


@dataclass(frozen=True)
class Num:
    value: float

    def text(self) -> str:
        return repr(float(self.value))


@dataclass(frozen=True)
class Var:
    name: str

    def text(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: "Node"

    def text(self) -> str:
        return f"(-{self.arg.text()})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"

    def text(self) -> str:
        return f"({self.left.text()} {self.op} {self.right.text()})"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def text(self) -> str:
        return f"{self.name}({', '.join(a.text() for a in self.args)})"


Node = Num | Var | Neg | BinOp | Call


def _walk(node):
    yield node
    if isinstance(node, Neg):
        yield from _walk(node.arg)
    elif isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        for a in node.args:
            yield from _walk(a)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            off = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[off]!r}", off + 1)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value or kind != "op":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {what}", off)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        negate = False
        if self.peek()[:2] == ("op", "-"):
            self.take()
            negate = True
        node = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            node = BinOp("^", node, self.atom())
        return Neg(node) if negate else node

    def atom(self) -> Node:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if val in VARIABLES:
                return Var(val)
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val not in ARITY:
                raise ExprSyntaxError(f"unknown identifier {val!r}", off)
            self.expect("(")
            args = [self.expr()]
            while self.peek()[:2] == ("op", ","):
                self.take()
                args.append(self.expr())
            self.expect(")")
            if len(args) != ARITY[val]:
                raise ExprSyntaxError(
                    f"{val}() takes {ARITY[val]} argument(s), got {len(args)}", off
                )
            return Call(val, tuple(args))
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off)


# ---------------------------------------------------------------------------
# hyper-dual numbers: v + a e1 + b e2 + ab e1 e2 with e1^2 = e2^2 = 0


class HyperDual:
    __slots__ = ("v", "a", "b", "ab")

    def __init__(self, v, a, b, ab):
        self.v, self.a, self.b, self.ab = v, a, b, ab

    def take(self, idx) -> "HyperDual":
        return HyperDual(self.v[idx], self.a[idx], self.b[idx], self.ab[idx])

    def parts(self):
        return (self.v, self.a, self.b, self.ab)

    def __add__(self, o):
        return HyperDual(self.v + o.v, self.a + o.a, self.b + o.b, self.ab + o.ab)

    def __sub__(self, o):
        return HyperDual(self.v - o.v, self.a - o.a, self.b - o.b, self.ab - o.ab)

    def __neg__(self):
        return HyperDual(-self.v, -self.a, -self.b, -self.ab)

    def __mul__(self, o):
        return HyperDual(
            self.v * o.v,
            self.v * o.a + self.a * o.v,
            self.v * o.b + self.b * o.v,
            self.v * o.ab + self.a * o.b + self.b * o.a + self.ab * o.v,
        )

    def apply(self, phi, d1, d2) -> "HyperDual":
        """Chain rule for a scalar function with value/first/second derivative."""

        def scale(part, d):
            # zero seeds contribute nothing even where d is infinite
            return np.where(part == 0.0, 0.0, part * d)

        ab = scale(self.ab, d1) + scale(self.a * self.b, d2)
        return HyperDual(phi, scale(self.a, d1), scale(self.b, d1), ab)


def _safe(fn, *args):
    with np.errstate(all="ignore"):
        return fn(*args)


# ---------------------------------------------------------------------------
# evaluation, shared by plain arrays and hyper-duals


class _Evaluator:
    """Evaluate a tree over flattened, broadcast inputs.

    ``dual`` switches between plain float arrays and hyper-dual arrays.
    Branches of ``if`` are evaluated only on the points that select them so
    that a guarded domain violation in the other branch is not reported.
    """

    def __init__(self, dual: bool):
        self.dual = dual

    def const(self, value, n):
        c = np.full(n, float(value))
        if self.dual:
            z = np.zeros(n)
            return HyperDual(c, z, z.copy(), z.copy())
        return c

    @staticmethod
    def val(obj):
        return obj.v if isinstance(obj, HyperDual) else obj

    @staticmethod
    def subset(obj, idx):
        return obj.take(idx) if isinstance(obj, HyperDual) else obj[idx]

    def check(self, node, result):
        parts = result.parts() if isinstance(result, HyperDual) else (result,)
        for p in parts:
            if not np.all(np.isfinite(p)):
                raise ExprDomainError("non-finite result", node.text())
        return result

    def run(self, node, env, n):
        if isinstance(node, Num):
            return self.const(node.value, n)
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, Neg):
            return -self.run(node.arg, env, n)
        if isinstance(node, BinOp):
            return self.binop(node, env, n)
        return self.call(node, env, n)

    def binop(self, node, env, n):
        lhs = self.run(node.left, env, n)
        rhs = self.run(node.right, env, n)
        op = node.op
        if op == "+":
            return lhs + rhs
        if op == "-":
            return lhs - rhs
        if op == "*":
            return self.check(node, lhs * rhs)
        if op == "/":
            den = self.val(rhs)
            if np.any(den == 0.0):
                raise ExprDomainError("division by zero", node.text())
            if self.dual:
                inv = rhs.apply(_safe(np.reciprocal, den), -1.0 / den**2, 2.0 / den**3)
                return self.check(node, lhs * inv)
            return self.check(node, lhs / rhs)
        return self.power(node, lhs, rhs)

    def power(self, node, base, expo):
        bv = self.val(base)
        if not any(isinstance(m, Var) for m in _walk(node.right)):
            p = float(self.val(expo)[0]) if np.size(self.val(expo)) else 0.0
            integral = p == math.floor(p)
            if not integral and np.any(bv < 0.0):
                raise ExprDomainError("negative base with fractional exponent", node.text())
            if p < 0.0 and np.any(bv == 0.0):
                raise ExprDomainError("zero base with negative exponent", node.text())
            value = _safe(np.power, bv, p)
            if not self.dual:
                return self.check(node, value)
            d1 = p * _safe(np.power, bv, p - 1.0) if p != 0.0 else np.zeros_like(bv)
            d2 = (
                p * (p - 1.0) * _safe(np.power, bv, p - 2.0)
                if p not in (0.0, 1.0)
                else np.zeros_like(bv)
            )
            return self.check(node, base.apply(value, d1, d2))
        if np.any(bv <= 0.0):
            raise ExprDomainError("non-positive base with variable exponent", node.text())
        if not self.dual:
            return self.check(node, _safe(np.power, bv, expo))
        logb = base.apply(np.log(bv), 1.0 / bv, -1.0 / bv**2)
        prod = expo * logb
        e = _safe(np.exp, prod.v)
        return self.check(node, prod.apply(e, e, e))

    def call(self, node, env, n):
        name = node.name
        if name == "if":
            cond = self.val(self.run(node.args[0], env, n))
            sel = cond > 0.0
            out_then = out_else = None
            if np.any(sel):
                idx = np.nonzero(sel)[0]
                sub = {k: self.subset(v, idx) for k, v in env.items()}
                out_then = (idx, self.run(node.args[1], sub, idx.size))
            if not np.all(sel):
                idx = np.nonzero(~sel)[0]
                sub = {k: self.subset(v, idx) for k, v in env.items()}
                out_else = (idx, self.run(node.args[2], sub, idx.size))
            return self.merge(n, out_then, out_else)
        if name in ("min", "max"):
            lhs = self.run(node.args[0], env, n)
            rhs = self.run(node.args[1], env, n)
            lv, rv = self.val(lhs), self.val(rhs)
            pick_left = lv <= rv if name == "min" else lv >= rv
            if not self.dual:
                return np.where(pick_left, lv, rv)
            return HyperDual(*(np.where(pick_left, p, q) for p, q in zip(lhs.parts(), rhs.parts())))
        arg = self.run(node.args[0], env, n)
        v = self.val(arg)
        if name == "log" and np.any(v <= 0.0):
            raise ExprDomainError("log of non-positive value", node.text())
        if name == "sqrt" and np.any(v < 0.0):
            raise ExprDomainError("sqrt of negative value", node.text())
        phi, d1, d2 = _BUILTINS[name](v, self.dual)
        if not self.dual:
            return self.check(node, phi)
        return self.check(node, arg.apply(phi, d1, d2))

    def merge(self, n, first, second):
        if self.dual:
            parts = [np.empty(n) for _ in range(4)]
            for item in (first, second):
                if item is not None:
                    idx, res = item
                    for dst, src in zip(parts, res.parts()):
                        dst[idx] = src
            return HyperDual(*parts)
        out = np.empty(n)
        for item in (first, second):
            if item is not None:
                out[item[0]] = item[1]
        return out


def _sin(v, dual):
    s = np.sin(v)
    return (s, np.cos(v), -s) if dual else (s, None, None)


def _cos(v, dual):
    c = np.cos(v)
    return (c, -np.sin(v), -c) if dual else (c, None, None)


def _exp(v, dual):
    e = _safe(np.exp, v)
    return e, e, e


def _log(v, dual):
    return np.log(v), 1.0 / v, -1.0 / v**2


def _abs(v, dual):
    return np.abs(v), np.sign(v), np.zeros_like(v)


def _sqrt(v, dual):
    s = np.sqrt(v)
    if not dual:
        return s, None, None
    return s, _safe(np.divide, 0.5, s), _safe(lambda q: -0.25 / q**3, s)


_BUILTINS: dict[str, Callable] = {
    "sin": _sin,
    "cos": _cos,
    "exp": _exp,
    "log": _log,
    "abs": _abs,
    "sqrt": _sqrt,
}

_PLAIN = _Evaluator(dual=False)
_DUAL = _Evaluator(dual=True)


def _broadcast(t, x, u):
    t, x, u = np.broadcast_arrays(
        np.asarray(t, dtype=float), np.asarray(x, dtype=float), np.asarray(u, dtype=float)
    )
    shape = t.shape
    flat = [np.ascontiguousarray(a).reshape(-1) for a in (t, x, u)]
    for name, arr in zip(VARIABLES, flat):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite input for {name}")
    return shape, flat


# ---------------------------------------------------------------------------
# public API


@dataclass(frozen=True)
class Expr:
    """Immutable parsed expression in ``(t, x, u)``."""

    root: Node
    source: str = ""

    def __str__(self) -> str:
        return self.root.text()

    @property
    def variables(self) -> frozenset:
        return frozenset(n.name for n in _walk(self.root) if isinstance(n, Var))

    @property
    def is_piecewise(self) -> bool:
        return any(isinstance(n, Call) and n.name in PIECEWISE for n in _walk(self.root))

    def __call__(self, t=0.0, x=0.0, u=0.0):
        """Evaluate with numpy broadcasting; scalars in give a float out."""
        shape, (tf, xf, uf) = _broadcast(t, x, u)
        out = _PLAIN.run(self.root, {"t": tf, "x": xf, "u": uf}, tf.size)
        out = np.asarray(_PLAIN.check(self.root, out), dtype=float).reshape(shape)
        return float(out) if shape == () else out

    def __sub__(self, other: "Expr") -> "Expr":
        return Expr(BinOp("-", self.root, other.root), f"({self.source}) - ({other.source})")

    def __add__(self, other: "Expr") -> "Expr":
        return Expr(BinOp("+", self.root, other.root), f"({self.source}) + ({other.source})")


def parse(text: str) -> Expr:
    """Parse ``text`` into an :class:`Expr`.

    Raises :class:`ExprSyntaxError` with the offending offset for malformed
    input, unknown identifiers and wrong builtin arity.
    """
    if isinstance(text, Expr):
        return text
    return Expr(_Parser(str(text)).parse(), str(text))


def as_expr(obj) -> Expr:
    if isinstance(obj, Expr):
        return obj
    if isinstance(obj, (int, float)):
        return parse(repr(float(obj)))
    return parse(obj)


@dataclass(frozen=True)
class Jet2:
    value: float
    d_u: float
    d_x: float
    d_xu: float
    d_xx: float


def _seeded(values, n, seed_a, seed_b):
    z = np.zeros(n)
    return HyperDual(values, z + seed_a, z + seed_b, z.copy())


def jet_arrays(e: Expr, t, x, u, need_xx: bool = True, order: str = "xu") -> dict:
    """Vectorized jet: dict of arrays keyed by the :data:`SELECTORS` names.

    ``order`` picks which direction is seeded first for the mixed partial;
    both orders give the same ``d_xu`` for C2 expressions.
    """
    shape, (tf, xf, uf) = _broadcast(t, x, u)
    n = tf.size
    first, second = (1.0, 0.0), (0.0, 1.0)
    xs, us = (first, second) if order == "xu" else (second, first)
    env = {
        "t": _seeded(tf, n, 0.0, 0.0),
        "x": _seeded(xf, n, *xs),
        "u": _seeded(uf, n, *us),
    }
    r = _DUAL.check(e.root, _DUAL.run(e.root, env, n))
    d_x, d_u = (r.a, r.b) if order == "xu" else (r.b, r.a)
    out = {"value": r.v, "d_u": d_u, "d_x": d_x, "d_xu": r.ab}
    if need_xx:
        env = {
            "t": _seeded(tf, n, 0.0, 0.0),
            "x": _seeded(xf, n, 1.0, 1.0),
            "u": _seeded(uf, n, 0.0, 0.0),
        }
        out["d_xx"] = _DUAL.run(e.root, env, n).ab
    return {k: np.asarray(v, dtype=float).reshape(shape) for k, v in out.items()}


def eval_jet(e: Expr, t: float, x: float, u: float) -> Jet2:
    """Value and partials ``d_u, d_x, d_xu, d_xx`` at a single point."""
    j = jet_arrays(e, t, x, u)
    return Jet2(**{k: float(j[k]) for k in SELECTORS})


def _axis_points(lo: float, hi: float, samples: int) -> np.ndarray:
    # dyadic 2^k + 1 grids so that refining the sample count nests the points
    if lo == hi:
        return np.array([float(lo)])
    if hi < lo:
        raise ValueError("empty box axis")
    if samples < 2:
        raise ValueError("samples_per_axis must be at least 2")
    k = max(1, math.ceil(math.log2(samples - 1))) if samples > 2 else 1
    return np.linspace(lo, hi, 2**k + 1)


def box_grid(e: Expr, box: Sequence[Sequence[float]], samples: int):
    """Tensor sample grid on ``box``; axes absent from ``e`` collapse to a point."""
    axes = []
    used = e.variables
    for name, (lo, hi) in zip(VARIABLES, box):
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise ValueError(f"empty box axis {name}: [{lo}, {hi}]")
        axes.append(_axis_points(lo, hi, samples) if name in used else np.array([lo]))
    return np.meshgrid(*axes, indexing="ij", sparse=True)


def sup_abs_on_box(e: Expr, selector, box, samples_per_axis: int = 33):
    """Maximum of ``|selector|`` over a tensor grid on ``box`` (corners included).

    This is a sampled lower estimate of the true supremum.  ``selector`` may
    be a single name or a sequence of names, in which case a dict is returned.
    """
    names = (selector,) if isinstance(selector, str) else tuple(selector)
    for s in names:
        if s not in SELECTORS:
            raise ValueError(f"unknown selector {s!r}")
    T, X, U = box_grid(e, box, samples_per_axis)
    if names == ("value",):
        vals = {"value": np.asarray(e(T, X, U))}
    else:
        vals = jet_arrays(e, T, X, U, need_xx="d_xx" in names)
    out = {s: float(np.max(np.abs(vals[s]))) for s in names}
    return out[names[0]] if isinstance(selector, str) else out
