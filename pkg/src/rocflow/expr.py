"""Curvature-function expressions in ``psi`` and ``s`` with second-order jets.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 'psi' | 's' | FUNC '(' expr ')' | '(' expr ')'

with ``FUNC`` one of exp, log, sqrt.  Evaluation propagates a
:class:`Jet2` (value, two first and three second partials) so any
expression yields a full :class:`~rocflow.flows.FlowJet` without a tape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import EvalDomain, ExpressionSyntaxError, UnknownIdentifier
from .flows import FlowJet, FlowSpec

FUNCTIONS = ("exp", "log", "sqrt")
VARIABLES = ("psi", "s")


# --------------------------------------------------------------------------
# second-order jets


@dataclass(frozen=True)
class Jet2:
    """Truncated second-order Taylor data in (psi, s).

    Components may be floats or equally shaped numpy arrays.
    """

    v: object
    dp: object = 0.0
    ds: object = 0.0
    dpp: object = 0.0
    dps: object = 0.0
    dss: object = 0.0

    @classmethod
    def const(cls, c):
        return cls(c)

    @classmethod
    def var_psi(cls, p):
        one = np.ones_like(p, dtype=float) if isinstance(p, np.ndarray) else 1.0
        return cls(p, one)

    @classmethod
    def var_s(cls, s):
        one = np.ones_like(s, dtype=float) if isinstance(s, np.ndarray) else 1.0
        return cls(s, 0.0, one)

    def chain(self, f0, f1, f2) -> "Jet2":
        """Compose a scalar function with value f0, f' = f1 and f'' = f2."""
        return Jet2(
            f0,
            f1 * self.dp,
            f1 * self.ds,
            f1 * self.dpp + f2 * self.dp * self.dp,
            f1 * self.dps + f2 * self.dp * self.ds,
            f1 * self.dss + f2 * self.ds * self.ds,
        )

    def __add__(self, o):
        o = _lift(o)
        return Jet2(self.v + o.v, self.dp + o.dp, self.ds + o.ds,
                    self.dpp + o.dpp, self.dps + o.dps, self.dss + o.dss)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.v, -self.dp, -self.ds, -self.dpp, -self.dps, -self.dss)

    def __sub__(self, o):
        return self + (-_lift(o))

    def __rsub__(self, o):
        return _lift(o) + (-self)

    def __mul__(self, o):
        o = _lift(o)
        return Jet2(
            self.v * o.v,
            self.dp * o.v + self.v * o.dp,
            self.ds * o.v + self.v * o.ds,
            self.dpp * o.v + 2 * self.dp * o.dp + self.v * o.dpp,
            self.dps * o.v + self.dp * o.ds + self.ds * o.dp + self.v * o.dps,
            self.dss * o.v + 2 * self.ds * o.ds + self.v * o.dss,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        if np.any(np.asarray(self.v) == 0):
            raise EvalDomain("division by zero")
        inv = 1.0 / self.v
        return self.chain(inv, -inv * inv, 2 * inv * inv * inv)

    def __truediv__(self, o):
        return self * _lift(o).reciprocal()

    def __rtruediv__(self, o):
        return _lift(o) * self.reciprocal()

    def __pow__(self, o):
        o = _lift(o)
        if _is_const(o):
            return self._pow_const(o.v)
        # general case a^b = exp(b log a)
        return (o * self.log()).exp()

    def __rpow__(self, o):
        return _lift(o).__pow__(self)

    def _pow_const(self, k):
        k = float(k)
        v = np.asarray(self.v, dtype=float)
        if k == 0:
            return Jet2(np.ones_like(v) if v.ndim else 1.0)
        if k.is_integer():
            if k < 0 and np.any(v == 0):
                raise EvalDomain("division by zero in negative power")
        elif np.any(v <= 0):
            raise EvalDomain("non-integer power of a non-positive number")
        f1 = k * self.v ** (k - 1)
        f2 = 0.0 * v if k == 1 else k * (k - 1) * self.v ** (k - 2)
        return self.chain(self.v**k, f1, f2)

    def exp(self):
        e = np.exp(self.v)
        return self.chain(e, e, e)

    def log(self):
        if np.any(np.asarray(self.v) <= 0):
            raise EvalDomain("log of a non-positive number")
        inv = 1.0 / self.v
        return self.chain(np.log(self.v), inv, -inv * inv)

    def sqrt(self):
        if np.any(np.asarray(self.v) <= 0):
            raise EvalDomain("sqrt of a non-positive number is not differentiable")
        r = np.sqrt(self.v)
        return self.chain(r, 0.5 / r, -0.25 / (r * self.v))

    def to_flowjet(self) -> FlowJet:
        return FlowJet(self.v, self.dp, self.ds, self.dpp, self.dps, self.dss)


def _lift(x) -> Jet2:
    return x if isinstance(x, Jet2) else Jet2.const(x)


def _is_const(j: Jet2) -> bool:
    return all(np.all(np.asarray(c) == 0) for c in (j.dp, j.ds, j.dpp, j.dps, j.dss))


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")

_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 30}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = []  # (kind, value, 1-based column)
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:  # only trailing whitespace remains
                break
            if m.group(1):
                self.tokens.append(("num", m.group(1), m.start(1) + 1))
            elif m.group(2):
                self.tokens.append(("id", m.group(2), m.start(2) + 1))
            elif m.group(3):
                ch = m.group(3)
                if ch not in "+-*/^()":
                    raise ExpressionSyntaxError(f"unexpected character {ch!r}", m.start(3) + 1)
                self.tokens.append(("op", ch, m.start(3) + 1))
            pos = m.end()
        self.end = len(text) + 1
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", None, self.end)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, value):
        kind, v, col = self.take()
        if v != value:
            found = "end of input" if kind == "eof" else repr(v)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", col)

    def parse(self):
        if not self.tokens:
            raise ExpressionSyntaxError("empty expression", 1)
        node = self.expr(0)
        kind, v, col = self.peek()
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected {v!r}", col)
        return node

    # precedence climbing
    def expr(self, min_bp):
        left = self.prefix()
        while True:
            kind, op, _ = self.peek()
            if kind != "op" or op not in _BINARY or _BINARY[op] < min_bp:
                return left
            bp = _BINARY[op]
            self.take()
            if op == "^":
                right = self.unary_rhs()
                left = BinOp(op, left, right)
            else:
                right = self.expr(bp + 1)
                left = BinOp(op, left, right)

    def unary_rhs(self):
        # exponent binds unary minus and further powers: 2^-3^2 = 2^(-(3^2))
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Neg(self.unary_rhs())
        return self.expr(_BINARY["^"])

    def prefix(self):
        kind, v, col = self.take()
        if kind == "op" and v == "-":
            return Neg(self.expr(_BINARY["*"] + 1))
        if kind == "num":
            node = Num(float(v))
        elif kind == "id":
            if v in VARIABLES:
                node = Var(v)
            elif v in FUNCTIONS:
                self.expect("(")
                node = Call(v, self.expr(0))
                self.expect(")")
            else:
                raise UnknownIdentifier(f"unknown identifier {v!r}", col)
        elif kind == "op" and v == "(":
            node = self.expr(0)
            self.expect(")")
        else:
            found = "end of input" if kind == "eof" else repr(v)
            raise ExpressionSyntaxError(f"unexpected {found}", col)
        return node


def parse_flow_expression(text: str):
    """Parse ``text`` into an immutable AST.

    >>> parse_flow_expression("psi^2")
    BinOp(op='^', left=Var(name='psi'), right=Num(value=2.0))
    """
    return _Parser(text).parse()


# --------------------------------------------------------------------------
# printing


def _fmt_num(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _BINARY[node.op]
    if isinstance(node, Neg):
        return 25
    return 40


def to_string(node) -> str:
    """Print with the fewest parentheses that re-parse to the same tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = to_string(node.arg)
        # -(a*b) and -a*b parse alike only when the product groups the same way
        if _prec(node.arg) <= 20 or isinstance(node.arg, Neg):
            inner = f"({inner})"
        return "-" + inner
    p = _BINARY[node.op]
    left, right = to_string(node.left), to_string(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < p and not isinstance(node.right, Neg):
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    sep = " " if p == 10 else ""
    return f"{left}{sep}{node.op}{sep}{right}"


# --------------------------------------------------------------------------
# evaluation


def jet_eval_ast(node, psi, s) -> Jet2:
    return evaluate(node, {"psi": Jet2.var_psi(psi), "s": Jet2.var_s(s)})


def evaluate(node, env: dict) -> Jet2:
    """Evaluate with variables bound to arbitrary jets (change of variables)."""
    if isinstance(node, Num):
        return Jet2.const(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return getattr(evaluate(node.arg, env), node.func)()
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b


def _broadcast(j: FlowJet, psi, s) -> FlowJet:
    shape = np.broadcast(np.asarray(psi), np.asarray(s)).shape
    if not shape:
        return FlowJet(*(float(v) for v in j.as_tuple()))
    return FlowJet(*(np.broadcast_to(np.asarray(v, dtype=float), shape).copy() for v in j.as_tuple()))


def jet_eval(ast, psi, s) -> FlowJet:
    """FlowJet of the expression at (psi, s); scalars or arrays."""
    with np.errstate(all="ignore"):
        jet = jet_eval_ast(ast, psi, s).to_flowjet()
    out = _broadcast(jet, psi, s)
    if not all(np.all(np.isfinite(v)) for v in out.as_tuple()):
        raise EvalDomain("expression is not finite at the requested point")
    return out


def flow_from_expression(text: str, name: str | None = None) -> FlowSpec:
    """FlowSpec backed by AD of a parsed expression (``sign`` left unknown)."""
    ast = parse_flow_expression(text)
    return FlowSpec(name or "expr", {}, None, lambda p, s: jet_eval(ast, p, s), (), to_string(ast))


def catalog_expression(catalog_id: str, params: dict) -> str:
    """Grammar transcription of a catalog flow (used for equivalence checks)."""
    if catalog_id == "linear_weingarten":
        a, b, c = params["a"], params["b"], params["c"]
        return f"{a!r} + (2*{b!r}*psi + {c!r})/(psi^2 - s^2)"
    n = float(params["n"])
    sign = "" if n > 0 else "-"
    if catalog_id == "mean_curv_pow":
        return f"{sign}(psi/(psi^2 - s^2))^{n!r}"
    if catalog_id == "gauss_curv_pow":
        return f"{sign}(psi^2 - s^2)^{-n!r}"
    if catalog_id == "mean_radius_pow":
        return f"{sign}psi^{-n!r}"
    raise KeyError(catalog_id)


def expression_sample(rng, depth: int = 3):
    """Random well-behaved AST over the cone (for property tests)."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.35:
            return Var("psi")
        if r < 0.6:
            return Var("s")
        return Num(float(rng.integers(1, 5)))
    pick = rng.random()
    a = expression_sample(rng, depth - 1)
    if pick < 0.1:
        return Call("exp", BinOp("/", a, Num(4.0)))
    if pick < 0.2:
        return Call("log", BinOp("+", Num(2.0), BinOp("*", a, a)))
    if pick < 0.3:
        return Call("sqrt", BinOp("+", Num(1.0), BinOp("*", a, a)))
    if pick < 0.4:
        k = float(rng.choice([-1.5, 0.5, 2.0, 3.0]))
        expo = Neg(Num(-k)) if k < 0 else Num(k)
        return BinOp("^", BinOp("+", Num(1.0), BinOp("*", a, a)), expo)
    b = expression_sample(rng, depth - 1)
    if pick < 0.55:
        return BinOp("+", a, b)
    if pick < 0.7:
        return BinOp("-", a, b)
    if pick < 0.85:
        return BinOp("*", a, b)
    return BinOp("/", a, BinOp("+", Num(1.0), BinOp("*", b, b)))

