"""Evidence-set approximation for chain-logic formulas.

For an atomic label the value sequence restricted to a residue class is an
exponential polynomial whose per-shell coefficients are constant along the
class.  The leading nonzero shell decides the sign/limit behaviour; a
certified bound on everything below it yields a threshold past which the
class is decided, and the prefix is settled point by point.  Boolean/spatial
connectives then propagate the per-label over/under approximations through
exact semilinear set algebra.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from chaincheck.logic import (
    ChainModel,
    Formula,
    TrueF,
    Lbl,
    Not,
    And,
    Next,
    Eventually,
    Globally,
    Interval,
    Label,
    Linear,
    Product,
    Ratio,
    SpectralValues,
    eval_expr,
    holds_label,
    render,
)
from chaincheck.mps import MPSFamily
from chaincheck.semilinear import EvidenceApprox, SemilinearSet
from chaincheck.spectral import Decomposition, SpectralProfile, build_profile

COEFF_ZERO_TOL = 1e-9  # relative snap for structurally-zero shell coefficients
FP_SLACK = 1e-12
THRESHOLD_CAP = 10**6
REFINE_WINDOW = 192


@dataclass
class ClassRecord:
    """Analysis outcome for one residue class of one label."""

    residue: int
    kind: str  # "in" | "out" | "indecisive"
    threshold: int | None = None
    leading_radius: float | None = None
    leading_value: float | None = None
    note: str = ""


@dataclass
class AtomicAnalysis:
    label: str
    modulus: int
    classes: list[ClassRecord] = field(default_factory=list)
    diagnostics: str = ""

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "modulus": self.modulus,
            "classes": [
                {
                    "residue": c.residue,
                    "kind": c.kind,
                    "threshold": c.threshold,
                    "leading_radius": c.leading_radius,
                    "leading_value": c.leading_value,
                }
                for c in self.classes
            ],
            "diagnostics": self.diagnostics,
        }


@dataclass
class Verdict:
    status: str  # "T" | "F" | "U"
    approx: EvidenceApprox
    start: int
    per_label: dict[str, AtomicAnalysis]
    runtime_s: float = 0.0

    def to_json(self, formula: str = "") -> dict:
        return {
            "formula": formula,
            "verdict": self.status,
            "omega_plus": self.approx.over.to_json(),
            "omega_minus": self.approx.under.to_json(),
            "per_label": {k: v.to_json() for k, v in self.per_label.items()},
            "runtime_s": self.runtime_s,
        }


# ---------------------------------------------------------------------------
# Per-class shell forms
# ---------------------------------------------------------------------------


@dataclass
class ShellEntry:
    radius: float
    coeff: float | None  # None when the shell's angles defeat class analysis
    cap: float  # sum over shell of |weight|, bounds the shell's contribution


@dataclass
class ClassForm:
    """Shell decomposition of a linear expression on one residue class.

    value(N) = sum over entries coeff * radius^N  plus terms bounded by
    cap * radius^N for entries whose coefficient is unknown.  Entries are
    sorted by decreasing radius; the constant part is folded into radius 1.
    """

    entries: list[ShellEntry]
    scale: float

    def tail_from(self, idx: int, n: int) -> float:
        return sum(e.cap * e.radius**n for e in self.entries[idx + 1 :])

    def tail_exact_zero_from(self, idx: int) -> bool:
        return all(e.cap == 0.0 or e.radius == 0.0 for e in self.entries[idx + 1 :])


class AnalysisContext:
    """Shared spectral data for one model: profile, value provider, caches."""

    def __init__(self, model: ChainModel, dec: Decomposition, profile: SpectralProfile | None = None):
        self.model = model
        self.dec = dec
        self.profile = profile if profile is not None else build_profile(model.family, dec)
        if self.profile.dense and not isinstance(model.provider, SpectralValues):
            model.provider = SpectralValues(self.profile.eigs)
        self._label_cache: dict[str, tuple[EvidenceApprox, AtomicAnalysis]] = {}

    @property
    def modulus(self) -> int:
        return self.profile.modulus

    def class_form(self, e: Linear, residue: int) -> ClassForm:
        kappa = self.modulus
        entries: list[ShellEntry] = []
        scale = abs(e.const)
        fixed_const = e.const
        for coef, ref in e.terms:
            if ref.kind == "fixed":
                fixed_const += coef * self.model.value(ref.value)
                scale += abs(coef) * abs(self.model.value(ref.value))
        offsets = [(c, r.value) for c, r in e.terms if r.kind == "offset"]

        for sh in self.profile.shells:
            if sh.radius <= 1e-13:
                continue  # nilpotent part: zero contribution for n >= 1
            weights = np.zeros(len(sh.eigs), dtype=np.complex128)
            for coef, off in offsets:
                weights += coef * sh.eigs**off
            cap = float(np.sum(np.abs(weights)))
            scale += cap * max(sh.radius, 1.0)
            if sh.period is None:
                entries.append(ShellEntry(sh.radius, None, cap))
                continue
            phase = (sh.eigs / sh.radius) ** residue
            phi = complex(np.sum(weights * phase))
            entries.append(ShellEntry(sh.radius, float(phi.real), cap))

        # The constant rides the radius-1.0 shell (1^N = 1).
        if fixed_const != 0.0:
            for entry in entries:
                if abs(entry.radius - 1.0) <= 1e-12 and entry.coeff is not None:
                    entry.coeff += fixed_const
                    entry.cap += abs(fixed_const)
                    break
            else:
                entries.append(ShellEntry(1.0, fixed_const, abs(fixed_const)))
        entries.sort(key=lambda s: -s.radius)
        return ClassForm(entries, max(scale, 1.0))

    def values(self, ns) -> np.ndarray:
        vals = self.model.provider.values(ns)
        return np.where((vals < 0) & (np.abs(vals) <= 1e-9), 0.0, vals)


# ---------------------------------------------------------------------------
# Class decisions for linear forms
# ---------------------------------------------------------------------------


def _leading(form: ClassForm) -> tuple[int | None, str]:
    """Index of the leading decidable shell, or a verdict for degenerate cases."""
    snap = COEFF_ZERO_TOL * form.scale
    for i, e in enumerate(form.entries):
        if e.coeff is None:
            if e.cap > snap:
                return None, "aperiodic"  # dominant behaviour unresolvable
            continue
        if abs(e.coeff) > snap:
            return i, ""
    return None, "zero"


def _smallest_in_class(bound: int, residue: int, kappa: int) -> int:
    """Smallest n >= max(bound, 1) congruent to residue mod kappa."""
    n = max(bound, 1)
    shift = (residue - n) % kappa
    return n + shift


def _certify_side(form: ClassForm, idx: int, residue: int, kappa: int) -> tuple[int | None, int]:
    """Smallest class-N from which |leading term| strictly dominates the tail.

    Returns (threshold, sign of the leading coefficient).
    """
    e = form.entries[idx]
    sign = 1 if e.coeff > 0 else -1
    slack = FP_SLACK * form.scale

    def ok(n: int) -> bool:
        return abs(e.coeff) * e.radius**n > form.tail_from(idx, n) + slack

    return _search_threshold(ok, residue, kappa), sign


def _search_threshold(ok, residue: int, kappa: int) -> int | None:
    """Smallest class member satisfying a predicate that is eventually monotone."""
    n = _smallest_in_class(1, residue, kappa)
    if ok(n):
        return n
    lo, hi = n, None
    probe = n
    while probe <= THRESHOLD_CAP:
        probe = probe + max(kappa, probe)  # geometric jumps, stay in class
        probe = _smallest_in_class(probe, residue, kappa)
        if ok(probe):
            hi = probe
            break
        lo = probe
    if hi is None:
        return None
    while hi - lo > kappa:
        mid = _smallest_in_class(lo + (hi - lo) // 2, residue, kappa)
        if mid <= lo or mid >= hi:
            break
        if ok(mid):
            hi = mid
        else:
            lo = mid
    # The predicate may not be perfectly monotone near the crossover; walk
    # down to the true smallest member.
    while hi - kappa >= 1 and ok(hi - kappa):
        hi -= kappa
    return hi


@dataclass
class LinearDecision:
    kind: str  # "in" | "out" | "indecisive"
    threshold: int | None
    leading_radius: float | None = None
    leading_value: float | None = None
    note: str = ""


def _decide_linear(
    form: ClassForm, interval: Interval, residue: int, kappa: int
) -> LinearDecision:
    """Eventual position of the class values relative to the interval."""
    idx, status = _leading(form)
    slack = FP_SLACK * form.scale

    if idx is None:
        if status == "aperiodic":
            return LinearDecision("indecisive", None, note="aperiodic dominant shell")
        # Everything snapped to zero: the value is 0 up to the total decay bound.
        def enveloped(n: int) -> bool:
            return form.tail_from(-1, n) + slack < _margin(interval, 0.0)

        if _interior(interval, 0.0):
            t = _search_threshold(enveloped, residue, kappa)
            return LinearDecision("in", t, 0.0, 0.0) if t else LinearDecision("indecisive", None)
        if _exterior(interval, 0.0):
            def outside(n: int) -> bool:
                return form.tail_from(-1, n) + slack < _margin_out(interval, 0.0)

            t = _search_threshold(outside, residue, kappa)
            return LinearDecision("out", t, 0.0, 0.0) if t else LinearDecision("indecisive", None)
        # Exactly on a boundary: decidable only when the remainder vanishes identically.
        if form.tail_exact_zero_from(-1):
            kind = "in" if interval.contains(0.0) else "out"
            return LinearDecision(kind, _smallest_in_class(1, residue, kappa), 0.0, 0.0)
        return LinearDecision("indecisive", None, note="value pinned to an interval endpoint")

    e = form.entries[idx]
    r, phi = e.radius, e.coeff

    if r > 1.0 + 1e-12:
        unbounded = (interval.hi == math.inf) if phi > 0 else (interval.lo == -math.inf)
        if unbounded:
            barrier = interval.lo if phi > 0 else -interval.hi  # cross the finite side
            if not math.isfinite(barrier):
                t = _certify_side(form, idx, residue, kappa)[0]
                return _dec("in", t, r, phi)

            def beyond(n: int) -> bool:
                return abs(phi) * r**n - form.tail_from(idx, n) - slack > abs(barrier)

            t = _search_threshold(beyond, residue, kappa)
            return _dec("in", t, r, phi)
        bar = max(abs(x) for x in (interval.lo, interval.hi) if math.isfinite(x))

        def escaped(n: int) -> bool:
            return abs(phi) * r**n - form.tail_from(idx, n) - slack > bar

        t = _search_threshold(escaped, residue, kappa)
        return _dec("out", t, r, phi)

    if abs(r - 1.0) <= 1e-12:
        limit = phi
        if _interior(interval, limit):
            def inside(n: int) -> bool:
                return form.tail_from(idx, n) + slack < _margin(interval, limit)

            t = _search_threshold(inside, residue, kappa)
            return _dec("in", t, r, limit)
        if _exterior(interval, limit):
            def outside(n: int) -> bool:
                return form.tail_from(idx, n) + slack < _margin_out(interval, limit)

            t = _search_threshold(outside, residue, kappa)
            return _dec("out", t, r, limit)
        return _boundary_case(form, idx, interval, limit, residue, kappa)

    # r < 1: the leading term decays; limit is 0 (no constant survived).
    limit = 0.0
    if _interior(interval, limit):
        def inside(n: int) -> bool:
            return abs(phi) * r**n + form.tail_from(idx, n) + slack < _margin(interval, limit)

        t = _search_threshold(inside, residue, kappa)
        return _dec("in", t, r, limit)
    if _exterior(interval, limit):
        def outside(n: int) -> bool:
            return abs(phi) * r**n + form.tail_from(idx, n) + slack < _margin_out(interval, limit)

        t = _search_threshold(outside, residue, kappa)
        return _dec("out", t, r, limit)
    return _boundary_case(form, idx - 1, interval, limit, residue, kappa, side_idx=idx)


def _dec(kind: str, t: int | None, r: float, v: float) -> LinearDecision:
    if t is None:
        return LinearDecision("indecisive", None, r, v, note="threshold cap exceeded")
    return LinearDecision(kind, t, r, v)


def _boundary_case(
    form: ClassForm,
    idx: int,
    interval: Interval,
    limit: float,
    residue: int,
    kappa: int,
    side_idx: int | None = None,
) -> LinearDecision:
    """Limit sits exactly on an interval endpoint; the next shell breaks the tie."""
    if side_idx is None:
        side_idx, status = _next_decidable(form, idx)
        if side_idx is None:
            if status == "zero" and form.tail_exact_zero_from(idx):
                kind = "in" if interval.contains(limit) else "out"
                return LinearDecision(kind, _smallest_in_class(1, residue, kappa), 1.0, limit)
            return LinearDecision("indecisive", None, note="undecidable interval boundary")
    e = form.entries[side_idx]
    t, sign = _certify_side(form, side_idx, residue, kappa)
    if t is None:
        return LinearDecision("indecisive", None, note="threshold cap exceeded at boundary shell")
    approached = limit + sign * 0.5 * min(1.0, _opposite_margin(interval, limit))
    value_in = interval.contains(approached) if _on_boundary(interval, limit) else interval.contains(limit)
    # For open endpoints the side sign decides membership; closed endpoints
    # contain the limit regardless, but the approach side still matters for
    # the opposite bound, which `approached` accounts for.
    return LinearDecision("in" if value_in else "out", t, e.radius, limit)


def _next_decidable(form: ClassForm, idx: int) -> tuple[int | None, str]:
    snap = COEFF_ZERO_TOL * form.scale
    for j in range(idx + 1, len(form.entries)):
        e = form.entries[j]
        if e.coeff is None:
            if e.cap > snap:
                return None, "aperiodic"
            continue
        if abs(e.coeff) > snap:
            return j, ""
    return None, "zero"


def _interior(i: Interval, x: float) -> bool:
    return i.lo < x < i.hi


def _exterior(i: Interval, x: float) -> bool:
    return x < i.lo or x > i.hi


def _on_boundary(i: Interval, x: float) -> bool:
    return x == i.lo or x == i.hi


def _margin(i: Interval, x: float) -> float:
    return min(x - i.lo, i.hi - x)


def _margin_out(i: Interval, x: float) -> float:
    return i.lo - x if x < i.lo else x - i.hi


def _opposite_margin(i: Interval, x: float) -> float:
    if x == i.lo:
        return i.hi - x if math.isfinite(i.hi) else math.inf
    if x == i.hi:
        return x - i.lo if math.isfinite(i.lo) else math.inf
    return math.inf


# ---------------------------------------------------------------------------
# Ratio and product reductions
# ---------------------------------------------------------------------------


def _combine_decisions(parts: list[LinearDecision]) -> LinearDecision:
    """Conjunction of side conditions: in iff all in, out iff any out."""
    for p in parts:
        if p.kind == "out":
            return p
    if all(p.kind == "in" for p in parts):
        t = max(p.threshold for p in parts)
        lead = parts[0]
        return LinearDecision("in", t, lead.leading_radius, lead.leading_value)
    notes = "; ".join(p.note for p in parts if p.note)
    return LinearDecision("indecisive", None, note=notes)


def _scale_linear(e: Linear, c: float) -> Linear:
    return Linear(e.const * c, tuple((coef * c, r) for coef, r in e.terms))


def _sub_linear(a: Linear, b: Linear) -> Linear:
    return Linear(a.const - b.const, a.terms + tuple((-c, r) for c, r in b.terms))


def _decide_class(ctx: AnalysisContext, label: Label, residue: int) -> LinearDecision:
    kappa = ctx.modulus
    expr, interval = label.expr, label.interval

    if isinstance(expr, Linear):
        return _decide_linear(ctx.class_form(expr, residue), interval, residue, kappa)

    if isinstance(expr, Ratio):
        den_form = ctx.class_form(expr.den, residue)
        idx, status = _leading(den_form)
        if idx is None:
            return LinearDecision("indecisive", None, note="denominator has no resolvable sign")
        t_den, den_sign = _certify_side(den_form, idx, residue, kappa)
        if t_den is None:
            return LinearDecision("indecisive", None, note="denominator sign threshold cap")
        conditions: list[LinearDecision] = []
        # num/den in (lo, hi)  <=>  num - lo*den and hi*den - num are positive
        # (for eventually-positive den; signs flip otherwise).
        for bound, flip in ((interval.lo, False), (interval.hi, True)):
            if not math.isfinite(bound):
                continue
            diff = _sub_linear(_scale_linear(expr.den, bound), expr.num) if flip else _sub_linear(expr.num, _scale_linear(expr.den, bound))
            target = Interval(0.0, math.inf, not (interval.hi_open if flip else interval.lo_open) is False, True)
            # open bound -> strict positivity (0, inf); closed -> [0, inf)
            open_side = interval.hi_open if flip else interval.lo_open
            target = Interval(0.0, math.inf, open_side, True)
            d = _decide_linear(ctx.class_form(diff if den_sign > 0 else _scale_linear(diff, -1.0), residue), target, residue, kappa)
            conditions.append(d)
        combined = _combine_decisions(conditions) if conditions else LinearDecision("in", 1)
        t = max(t_den, combined.threshold) if combined.threshold else None
        return LinearDecision(combined.kind, t, combined.leading_radius, combined.leading_value, combined.note)

    if isinstance(expr, Product):
        lf = ctx.class_form(expr.left, residue)
        rf = ctx.class_form(expr.right, residue)
        li, ls = _leading(lf)
        ri, rs = _leading(rf)
        if (li is None and ls == "aperiodic") or (ri is None and rs == "aperiodic"):
            return LinearDecision("indecisive", None, note="aperiodic factor")
        if li is None or ri is None:
            # One factor is identically ~0: the product is bounded by the
            # other factor's total cap times this factor's decay.
            zf, other = (lf, rf) if li is None else (rf, lf)
            other_cap0 = sum(e.cap * max(e.radius, 1.0) for e in other.entries) + 1.0

            def small(n: int) -> bool:
                return zf.tail_from(-1, n) * other_cap0 * max_radius(other) ** n < _margin(interval, 0.0)

            def max_radius(f: ClassForm) -> float:
                return max((e.radius for e in f.entries), default=0.0)

            if _interior(interval, 0.0):
                t = _search_threshold(small, residue, kappa)
                return _dec("in", t, 0.0, 0.0)
            if _exterior(interval, 0.0):
                return LinearDecision("indecisive", None, note="vanishing product vs distant interval")
            if zf.tail_exact_zero_from(-1):
                kind = "in" if interval.contains(0.0) else "out"
                return LinearDecision(kind, _smallest_in_class(1, residue, kappa), 0.0, 0.0)
            return LinearDecision("indecisive", None, note="vanishing product on an endpoint")
        le, re_ = lf.entries[li], rf.entries[ri]
        r = le.radius * re_.radius
        phi = le.coeff * re_.coeff

        def prod_tail(n: int) -> float:
            t1, t2 = lf.tail_from(li, n), rf.tail_from(ri, n)
            a = abs(le.coeff) * le.radius**n
            b = abs(re_.coeff) * re_.radius**n
            return a * t2 + b * t1 + t1 * t2

        synth = ClassForm(
            [ShellEntry(r, phi, abs(phi)), ShellEntry(_sub_radius(lf, li, rf, ri), None, 0.0)],
            lf.scale * rf.scale,
        )
        # Reuse the linear decision logic with a custom tail.
        return _decide_with_tail(synth, prod_tail, interval, residue, kappa)

    raise TypeError(f"unsupported expression {expr!r}")


def _sub_radius(lf: ClassForm, li: int, rf: ClassForm, ri: int) -> float:
    cands = []
    if li + 1 < len(lf.entries):
        cands.append(lf.entries[li + 1].radius * rf.entries[ri].radius)
    if ri + 1 < len(rf.entries):
        cands.append(lf.entries[li].radius * rf.entries[ri + 1].radius)
    return max(cands, default=0.0)


def _decide_with_tail(form: ClassForm, tail, interval: Interval, residue: int, kappa: int) -> LinearDecision:
    e = form.entries[0]
    r, phi = e.radius, e.coeff
    slack = FP_SLACK * form.scale
    if abs(phi) <= COEFF_ZERO_TOL * form.scale:
        if _interior(interval, 0.0):
            t = _search_threshold(lambda n: tail(n) + slack < _margin(interval, 0.0), residue, kappa)
            return _dec("in", t, r, 0.0)
        return LinearDecision("indecisive", None, note="vanishing product coefficient")
    if r > 1.0 + 1e-12:
        unbounded = (interval.hi == math.inf) if phi > 0 else (interval.lo == -math.inf)
        barrier = max((abs(x) for x in (interval.lo, interval.hi) if math.isfinite(x)), default=0.0)
        t = _search_threshold(lambda n: abs(phi) * r**n - tail(n) - slack > barrier, residue, kappa)
        return _dec("in" if unbounded else "out", t, r, phi)
    if abs(r - 1.0) <= 1e-12:
        limit = phi
    else:
        limit = 0.0
    if _interior(interval, limit):
        t = _search_threshold(
            lambda n: (abs(phi) * r**n if limit == 0.0 else 0.0) + tail(n) + slack < _margin(interval, limit),
            residue,
            kappa,
        )
        return _dec("in", t, r, limit)
    if _exterior(interval, limit):
        t = _search_threshold(
            lambda n: (abs(phi) * r**n if limit == 0.0 else 0.0) + tail(n) + slack < _margin_out(interval, limit),
            residue,
            kappa,
        )
        return _dec("out", t, r, limit)
    # Limit on a boundary: decide by the approach side when the tail allows.
    sign = 1 if phi > 0 else -1
    t = _search_threshold(lambda n: abs(phi) * r**n > tail(n) + slack, residue, kappa)
    if t is None:
        return LinearDecision("indecisive", None, note="product boundary undecided")
    approached = limit + sign * 0.5 * min(1.0, _opposite_margin(interval, limit))
    return LinearDecision("in" if interval.contains(approached) else "out", t, r, limit)


# ---------------------------------------------------------------------------
# Atomic evidence (Solve-Atomic)
# ---------------------------------------------------------------------------


def _strict_holds(ctx: AnalysisContext, label: Label, ns: np.ndarray) -> np.ndarray:
    out = np.zeros(len(ns), dtype=bool)
    for i, n in enumerate(ns):
        try:
            out[i] = holds_label(ctx.model, label, int(n))
        except ZeroDivisionError:
            out[i] = False
    return out


def label_evidence(
    family_or_ctx,
    dec: Decomposition | None = None,
    label: Label | None = None,
    *,
    ctx: AnalysisContext | None = None,
) -> tuple[EvidenceApprox, AtomicAnalysis]:
    """Semilinear over/under approximation of a label's evidence set.

    Residue classes (mod the profile modulus) are classified independently:
    decided-in classes contribute their certified suffix plus the strictly
    checked prefix members to the under-approximation and the whole class to
    the over-approximation; decided-out classes contribute only their
    unresolved prefix members to the over-approximation; everything else is
    indecisive and lands in the over-approximation wholesale.
    """
    if ctx is None:
        if isinstance(family_or_ctx, AnalysisContext):
            ctx = family_or_ctx
        else:
            model = family_or_ctx if isinstance(family_or_ctx, ChainModel) else ChainModel(family_or_ctx, {})
            ctx = AnalysisContext(model, dec)
    assert label is not None
    kappa = ctx.modulus
    analysis = AtomicAnalysis(label.name, kappa)
    over = SemilinearSet.empty()
    under = SemilinearSet.empty()

    for residue in range(1, kappa + 1):
        try:
            d = _decide_class(ctx, label, residue)
        except Exception as exc:  # spectral failures poison only this label
            analysis.diagnostics = f"{type(exc).__name__}: {exc}"
            return EvidenceApprox.unknown(), analysis
        first = _smallest_in_class(1, residue, kappa)
        rec = ClassRecord(residue, d.kind, d.threshold, d.leading_radius, d.leading_value, d.note)
        analysis.classes.append(rec)

        if d.kind == "in":
            over = over.union(SemilinearSet.progression(first, kappa))
            under = under.union(SemilinearSet.progression(d.threshold, kappa))
            prefix = np.arange(first, d.threshold, kappa)
            if prefix.size:
                hold = _strict_holds(ctx, label, prefix)
                under = under.add_points(prefix[hold].tolist())
        elif d.kind == "out":
            prefix = np.arange(first, d.threshold, kappa)
            if prefix.size:
                hold = _strict_holds(ctx, label, prefix)
                members = prefix[hold].tolist()
                over = over.add_points(members)
                under = under.add_points(members)
        else:
            over = over.union(SemilinearSet.progression(first, kappa))

    return EvidenceApprox(over, under), analysis


# ---------------------------------------------------------------------------
# Formula propagation (Check-All)
# ---------------------------------------------------------------------------


def _refine(ctx: AnalysisContext, label: Label, approx: EvidenceApprox, window: int) -> EvidenceApprox:
    """Align the approximations with strict pointwise checks on a finite window."""
    if window <= 0:
        return approx
    ns = np.arange(1, window + 1)
    hold = _strict_holds(ctx, label, ns)
    over = approx.over.remove_points(ns[~hold].tolist())
    under = approx.under.add_points(ns[hold].tolist()).intersect(over)
    return EvidenceApprox(over, under)


def formula_evidence(
    ctx: AnalysisContext,
    f: Formula,
    *,
    refine_window: int = REFINE_WINDOW,
    _analyses: dict[str, AtomicAnalysis] | None = None,
) -> EvidenceApprox:
    """Evidence sets for a formula by structural recursion over exact set algebra."""
    analyses = _analyses if _analyses is not None else {}
    universe = SemilinearSet.universe()

    def rec(g: Formula) -> EvidenceApprox:
        if isinstance(g, TrueF):
            return EvidenceApprox.exact(universe)
        if isinstance(g, Lbl):
            key = g.name
            if key not in ctx._label_cache:
                label = ctx.model.labels[key]
                approx, analysis = label_evidence(ctx, label=label)
                approx = _refine(ctx, label, approx, refine_window)
                ctx._label_cache[key] = (approx, analysis)
            approx, analysis = ctx._label_cache[key]
            analyses[key] = analysis
            return approx
        if isinstance(g, Not):
            a = rec(g.sub)
            return EvidenceApprox(universe.minus(a.under), universe.minus(a.over))
        if isinstance(g, And):
            a, b = rec(g.left), rec(g.right)
            return EvidenceApprox(a.over.intersect(b.over), a.under.intersect(b.under))
        if isinstance(g, Next):
            a = rec(g.sub)
            return EvidenceApprox(a.over.shift_down(1), a.under.shift_down(1))
        if isinstance(g, Eventually):
            a = rec(g.sub)
            return EvidenceApprox(_eventually(a.over), _eventually(a.under))
        if isinstance(g, Globally):
            inner = rec(Eventually(Not(g.sub)))
            return EvidenceApprox(universe.minus(inner.under), universe.minus(inner.over))
        raise TypeError(f"not a formula node: {g!r}")

    return rec(f)


def _eventually(s: SemilinearSet) -> SemilinearSet:
    if s.is_empty():
        return SemilinearSet.empty()
    if not s.is_finite():
        return SemilinearSet.universe()
    return SemilinearSet.interval(1, s.supremum())


def verdict(
    ctx: AnalysisContext,
    f: Formula,
    start: int = 1,
    *,
    refine_window: int = REFINE_WINDOW,
) -> Verdict:
    """T if start is certified, F if start is excluded, U otherwise."""
    t0 = time.perf_counter()
    analyses: dict[str, AtomicAnalysis] = {}
    approx = formula_evidence(ctx, f, refine_window=refine_window, _analyses=analyses)
    if start in approx.under:
        status = "T"
    elif start not in approx.over:
        status = "F"
    else:
        status = "U"
    return Verdict(status, approx, start, analyses, time.perf_counter() - t0)


def asymptotic_verdict(
    ctx: AnalysisContext,
    f: Formula,
    *,
    refine_window: int = REFINE_WINDOW,
) -> Verdict:
    """Eventual-behaviour verdict: T when the under-approximation is cofinite
    (the property is certified for all large sizes), F when the
    over-approximation is finite (it fails for all large sizes), else U."""
    t0 = time.perf_counter()
    analyses: dict[str, AtomicAnalysis] = {}
    approx = formula_evidence(ctx, f, refine_window=refine_window, _analyses=analyses)
    if approx.under.is_cofinite():
        status = "T"
    elif approx.over.is_finite():
        status = "F"
    else:
        status = "U"
    return Verdict(status, approx, 0, analyses, time.perf_counter() - t0)
