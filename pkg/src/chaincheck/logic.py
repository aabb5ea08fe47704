"""Chain-logic formulas: AST, concrete syntax, and bounded evaluation.

Formulas are interpreted over the chain size N >= 1.  Atomic formulas are
labels: a value expression over squared norms of the family, paired with an
interval.  The bounded evaluator is the testing oracle: straight three-valued
semantics with an explicit horizon, no spectral machinery.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chaincheck.mps import MPSFamily, clamp_norm_value, norm_sq

MAX_OFFSET = 16
DIV_TOL = 1e-12
BOUNDARY_TOL = 1e-9


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownLabelError(KeyError):
    pass


class DivisionByNearZeroError(ZeroDivisionError):
    pass


# ---------------------------------------------------------------------------
# Value expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SizeRef:
    """Reference to a chain size: fixed size j, or current size plus offset."""

    kind: str  # "fixed" | "offset"
    value: int

    def __post_init__(self):
        if self.kind not in ("fixed", "offset"):
            raise ValueError(f"bad size reference kind {self.kind!r}")
        if self.kind == "fixed" and self.value < 1:
            raise ValueError("fixed size reference must be >= 1")
        if self.kind == "offset" and not (0 <= self.value <= MAX_OFFSET):
            raise ValueError(f"offset must be in [0, {MAX_OFFSET}]")


@dataclass(frozen=True)
class Linear:
    """const + sum of coeff * val(ref)."""

    const: float = 0.0
    terms: tuple[tuple[float, SizeRef], ...] = ()

    def max_offset(self) -> int:
        offs = [r.value for _, r in self.terms if r.kind == "offset"]
        return max(offs, default=0)


@dataclass(frozen=True)
class Ratio:
    num: Linear
    den: Linear

    def max_offset(self) -> int:
        return max(self.num.max_offset(), self.den.max_offset())


@dataclass(frozen=True)
class Product:
    left: Linear
    right: Linear

    def max_offset(self) -> int:
        return max(self.left.max_offset(), self.right.max_offset())


ValueExpr = Linear | Ratio | Product


# ---------------------------------------------------------------------------
# Intervals and labels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_open: bool = True
    hi_open: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("interval lower bound above upper bound")
        if self.lo == self.hi and (self.lo_open or self.hi_open):
            raise ValueError("degenerate interval must be closed on both sides")

    def contains(self, x: float) -> bool:
        lo_ok = x > self.lo if self.lo_open else x >= self.lo
        hi_ok = x < self.hi if self.hi_open else x <= self.hi
        return lo_ok and hi_ok

    def boundary_distance(self, x: float) -> float:
        d = math.inf
        if math.isfinite(self.lo):
            d = min(d, abs(x - self.lo))
        if math.isfinite(self.hi):
            d = min(d, abs(x - self.hi))
        return d

    def __str__(self) -> str:
        lo = "-inf" if self.lo == -math.inf else f"{self.lo:g}"
        hi = "inf" if self.hi == math.inf else f"{self.hi:g}"
        return f"{'(' if self.lo_open else '['}{lo}, {hi}{')' if self.hi_open else ']'}"


def parse_interval(text: str) -> Interval:
    m = re.fullmatch(r"\s*([\[(])\s*([^,]+)\s*,\s*([^\])]+)\s*([\])])\s*", text)
    if not m:
        raise ValueError(f"malformed interval {text!r}")

    def num(s: str) -> float:
        s = s.strip()
        if s in ("inf", "+inf", "oo"):
            return math.inf
        if s in ("-inf", "-oo"):
            return -math.inf
        return float(s)

    return Interval(num(m.group(2)), num(m.group(3)), m.group(1) == "(", m.group(4) == ")")


@dataclass(frozen=True)
class Label:
    name: str
    expr: ValueExpr
    interval: Interval


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class Lbl(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    sub: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    sub: Formula


@dataclass(frozen=True)
class Globally(Formula):
    sub: Formula


def _or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


_TOKEN = re.compile(r"\s*(->|[!&|()^]|true\b|[A-Za-z_][A-Za-z0-9_]*|\d+)")


class _Parser:
    """Recursive descent over: -> (lowest), |, &, unary !/X/E/G (highest)."""

    def __init__(self, text: str, label_names):
        self.text = text
        self.pos = 0
        self.labels = set(label_names)
        self.tokens: list[tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m:
                if text[pos:].strip():
                    raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
                break
            self.tokens.append((m.group(1), m.start(1)))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def here(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self) -> str:
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek() is not None:
            raise FormulaSyntaxError(f"trailing input {self.peek()!r}", self.here())
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return _or(Not(left), self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = _or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise FormulaSyntaxError("formula ended unexpectedly", self.here())
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            reps = 1
            if self.peek() == "^":
                self.take()
                count = self.take()
                if count is None or not count.isdigit():
                    raise FormulaSyntaxError("X^ needs an integer", self.here())
                reps = int(count)
            f = self.unary()
            for _ in range(reps):
                f = Next(f)
            return f
        if tok == "E":
            self.take()
            return Eventually(self.unary())
        if tok == "G":
            self.take()
            return Globally(self.unary())
        if tok == "(":
            self.take()
            f = self.implies()
            if self.peek() != ")":
                raise FormulaSyntaxError("missing closing parenthesis", self.here())
            self.take()
            return f
        if tok == "true":
            self.take()
            return TrueF()
        if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", tok):
            self.take()
            if tok not in self.labels:
                raise UnknownLabelError(tok)
            return Lbl(tok)
        raise FormulaSyntaxError(f"unexpected token {tok!r}", self.here())


def parse_formula(text: str, label_names) -> Formula:
    return _Parser(text, label_names).parse()


def render(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Lbl):
        return f.name
    if isinstance(f, Not):
        return f"!({render(f.sub)})"
    if isinstance(f, And):
        return f"({render(f.left)} & {render(f.right)})"
    if isinstance(f, Next):
        return f"X ({render(f.sub)})"
    if isinstance(f, Eventually):
        return f"E ({render(f.sub)})"
    if isinstance(f, Globally):
        return f"G ({render(f.sub)})"
    raise TypeError(f"not a formula node: {f!r}")


def labels_in(f: Formula) -> set[str]:
    if isinstance(f, Lbl):
        return {f.name}
    if isinstance(f, (Not, Next, Eventually, Globally)):
        return labels_in(f.sub)
    if isinstance(f, And):
        return labels_in(f.left) | labels_in(f.right)
    return set()


# ---------------------------------------------------------------------------
# Value-expression concrete syntax:  val(N+o), val(j), reals, + - * /
# ---------------------------------------------------------------------------

_VTOKEN = re.compile(r"\s*(val\(\s*N\s*(?:\+\s*\d+)?\s*\)|val\(\s*\d+\s*\)|\d+\.?\d*(?:[eE][+-]?\d+)?|[-+*/()])")


def parse_value_expr(text: str) -> ValueExpr:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _VTOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise ValueError(f"bad value expression near {text[pos:]!r}")
            break
        tokens.append(m.group(1).replace(" ", ""))
        pos = m.end()

    idx = 0

    def peek():
        return tokens[idx] if idx < len(tokens) else None

    def take():
        nonlocal idx
        t = peek()
        idx += 1
        return t

    def atom() -> Linear:
        t = take()
        if t is None:
            raise ValueError("value expression ended unexpectedly")
        if t == "(":
            e = expr()
            if take() != ")":
                raise ValueError("missing ) in value expression")
            if not isinstance(e, Linear):
                raise ValueError("ratios and products cannot be nested")
            return e
        if t.startswith("val("):
            inner = t[4:-1]
            if inner.startswith("N"):
                off = int(inner[2:]) if len(inner) > 1 else 0
                return Linear(0.0, ((1.0, SizeRef("offset", off)),))
            return Linear(0.0, ((1.0, SizeRef("fixed", int(inner))),))
        if t == "-":
            a = atom()
            return _scale(a, -1.0)
        return Linear(float(t), ())

    def _scale(a: Linear, c: float) -> Linear:
        return Linear(a.const * c, tuple((coef * c, r) for coef, r in a.terms))

    def _add(a: Linear, b: Linear, sign: float) -> Linear:
        return Linear(a.const + sign * b.const, a.terms + tuple((c * sign, r) for c, r in b.terms))

    def term():
        a = atom()
        while peek() == "*":
            take()
            b = atom()
            if not a.terms:
                a = _scale(b, a.const)
            elif not b.terms:
                a = _scale(a, b.const)
            else:
                return Product(a, b)  # product of two genuine linear forms
        return a

    def expr():
        a = term()
        while peek() in ("+", "-"):
            op = take()
            b = term()
            if isinstance(a, Linear) and isinstance(b, Linear):
                a = _add(a, b, 1.0 if op == "+" else -1.0)
            else:
                raise ValueError("products cannot be combined additively")
        return a

    result = expr()
    if peek() == "/":
        take()
        den = expr()
        if peek() is not None:
            raise ValueError("division is only allowed at the top level")
        if not (isinstance(result, Linear) and isinstance(den, Linear)):
            raise ValueError("ratio must divide two linear forms")
        if not den.terms and den.const == 0.0:
            raise ValueError("ratio denominator is syntactically zero")
        return Ratio(result, den)
    if peek() is not None:
        raise ValueError(f"trailing token {peek()!r} in value expression")
    return result


# ---------------------------------------------------------------------------
# Chain model and evaluation
# ---------------------------------------------------------------------------


class ValueProvider:
    """Supplies the squared-norm sequence; subclasses choose the method."""

    def value(self, n: int) -> float:
        raise NotImplementedError

    def values(self, ns) -> np.ndarray:
        return np.array([self.value(int(n)) for n in ns])


class PowerValues(ValueProvider):
    """Norms via transfer-matrix powers (the definitional route)."""

    def __init__(self, family: MPSFamily):
        self.family = family
        self._cache: dict[int, float] = {}

    def value(self, n: int) -> float:
        if n not in self._cache:
            self._cache[n] = norm_sq(self.family, n)
        return self._cache[n]


class SpectralValues(ValueProvider):
    """Norms as sums of transfer-matrix eigenvalue powers.

    Shares the exact eigenvalues used by the checker's asymptotic analysis,
    so pointwise checks and class analysis cannot disagree with each other.
    """

    def __init__(self, eigs: np.ndarray):
        self.eigs = np.asarray(eigs, dtype=np.complex128)
        self._table = np.zeros(0)
        self._powers = None
        self._filled = 0

    def _extend(self, upto: int) -> None:
        if upto <= self._filled:
            return
        size = max(upto, 2 * max(self._filled, 16))
        table = np.zeros(size + 1)
        powers = np.ones_like(self.eigs) if self._powers is None else self._powers
        table[: self._filled + 1] = np.resize(self._table, self._filled + 1)
        for n in range(self._filled + 1, size + 1):
            powers = powers * self.eigs
            table[n] = float(np.sum(powers).real)
        self._table = table
        self._powers = powers
        self._filled = size

    def value(self, n: int) -> float:
        self._extend(n)
        return float(self._table[n])

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=int)
        if ns.size:
            self._extend(int(ns.max()))
        return self._table[ns]


@dataclass
class ChainModel:
    """An MPS family with its label table and a value source."""

    family: MPSFamily
    labels: dict[str, Label]
    provider: ValueProvider = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.provider is None:
            self.provider = PowerValues(self.family)

    def value(self, n: int) -> float:
        return clamp_norm_value(self.provider.value(n))


def eval_linear(model: ChainModel, e: Linear, n: int) -> float:
    total = e.const
    for coef, ref in e.terms:
        size = ref.value if ref.kind == "fixed" else n + ref.value
        total += coef * model.value(size)
    return total


def eval_expr(model: ChainModel, e: ValueExpr, n: int) -> float:
    if n < 1:
        raise ValueError("chain size must be >= 1")
    if isinstance(e, Linear):
        return eval_linear(model, e, n)
    if isinstance(e, Product):
        return eval_linear(model, e.left, n) * eval_linear(model, e.right, n)
    if isinstance(e, Ratio):
        den = eval_linear(model, e.den, n)
        if abs(den) <= DIV_TOL:
            raise DivisionByNearZeroError(f"denominator {den:.3e} at size {n}")
        return eval_linear(model, e.num, n) / den


def holds_label(model: ChainModel, lbl: Label, n: int, *, three_valued: bool = False) -> bool | None:
    """Interval membership of the label's expression at size n.

    Strict mode compares floating-point values exactly and is the oracle's
    satisfaction relation.  The three-valued mode returns None when the value
    sits within BOUNDARY_TOL of an interval endpoint.
    """
    v = eval_expr(model, lbl.expr, n)
    if three_valued and lbl.interval.boundary_distance(v) <= BOUNDARY_TOL:
        return None
    return lbl.interval.contains(v)


def eval_bounded(model: ChainModel, f: Formula, n: int, horizon: int) -> bool | None:
    """Three-valued bounded semantics; None means undetermined at this horizon."""
    if n > horizon:
        return None
    if isinstance(f, TrueF):
        return True
    if isinstance(f, Lbl):
        return holds_label(model, model.labels[f.name], n)
    if isinstance(f, Not):
        r = eval_bounded(model, f.sub, n, horizon)
        return None if r is None else not r
    if isinstance(f, And):
        a = eval_bounded(model, f.left, n, horizon)
        b = eval_bounded(model, f.right, n, horizon)
        if a is False or b is False:
            return False
        if a is True and b is True:
            return True
        return None
    if isinstance(f, Next):
        return eval_bounded(model, f.sub, n + 1, horizon)
    if isinstance(f, Eventually):
        for j in range(n, horizon + 1):
            if eval_bounded(model, f.sub, j, horizon) is True:
                return True
        return None  # beyond the horizon nothing is decided
    if isinstance(f, Globally):
        for j in range(n, horizon + 1):
            if eval_bounded(model, f.sub, j, horizon) is False:
                return False
        return None
    raise TypeError(f"not a formula node: {f!r}")


# ---------------------------------------------------------------------------
# Spec file: {"labels": {name: {"expr": ..., "in"/"abs_lt": ...}}, "formula": ...}
# ---------------------------------------------------------------------------


def label_from_json(name: str, body: dict) -> Label:
    expr = parse_value_expr(str(body["expr"]))
    if "in" in body:
        interval = parse_interval(str(body["in"]))
    elif "abs_lt" in body:
        x = float(body["abs_lt"])
        interval = Interval(-x, x, True, True)
    else:
        raise ValueError(f"label {name!r} needs an 'in' or 'abs_lt' field")
    return Label(name, expr, interval)


def load_spec(path: str | Path) -> tuple[dict[str, Label], Formula, str]:
    data = json.loads(Path(path).read_text())
    labels = {name: label_from_json(name, body) for name, body in data["labels"].items()}
    text = str(data["formula"])
    return labels, parse_formula(text, labels.keys()), text
