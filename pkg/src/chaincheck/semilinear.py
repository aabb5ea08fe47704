"""Canonical semilinear sets of positive integers and their exact algebra.

A set is a finite part plus finitely many arithmetic progressions
{s, s+k, s+2k, ...} sharing one modulus k.  The universe is {1, 2, 3, ...}.
Canonical form: minimal modulus, at most one progression per residue class,
each progression start pulled as low as membership allows, finite part
disjoint from the progressions.  Canonical representations are unique, so
dataclass equality is set equality.

Operations work on an explicit membership window plus the eventual residue
pattern; the window is always long enough (past all starts plus two periods)
to make every operation exact.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np


class EmptySetError(ValueError):
    """Supremum of the empty set requested."""


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def _divisors(n: int) -> list[int]:
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out


@dataclass(frozen=True)
class SemilinearSet:
    finite: tuple[int, ...]
    starts: tuple[int, ...]
    modulus: int

    # -- constructors -------------------------------------------------------

    @staticmethod
    def empty() -> "SemilinearSet":
        return SemilinearSet((), (), 1)

    @staticmethod
    def universe() -> "SemilinearSet":
        return SemilinearSet((), (1,), 1)

    @staticmethod
    def from_points(points) -> "SemilinearSet":
        pts = sorted({int(p) for p in points if p >= 1})
        return _from_members(pts, (), 1)

    @staticmethod
    def progression(start: int, step: int) -> "SemilinearSet":
        if start < 1 or step < 1:
            raise ValueError("progression needs start >= 1 and step >= 1")
        return _from_members([], (start,), step)

    @staticmethod
    def interval(lo: int, hi: int) -> "SemilinearSet":
        lo = max(1, lo)
        if hi < lo:
            return SemilinearSet.empty()
        return SemilinearSet.from_points(range(lo, hi + 1))

    @staticmethod
    def upward(start: int) -> "SemilinearSet":
        return SemilinearSet.progression(max(1, start), 1)

    # -- membership and structure -------------------------------------------

    def __contains__(self, n: int) -> bool:
        if n < 1:
            return False
        i = bisect.bisect_left(self.finite, n)
        if i < len(self.finite) and self.finite[i] == n:
            return True
        for s in self.starts:
            if n >= s and (n - s) % self.modulus == 0:
                return True
        return False

    def is_empty(self) -> bool:
        return not self.finite and not self.starts

    def is_finite(self) -> bool:
        return not self.starts

    def supremum(self) -> int:
        if self.is_empty():
            raise EmptySetError("empty set has no supremum")
        if self.starts:
            raise EmptySetError("supremum of an infinite set is not an integer")
        return max(self.finite)

    def is_cofinite(self) -> bool:
        residues = {s % self.modulus for s in self.starts}
        return len(residues) == self.modulus

    def enumerate_up_to(self, h: int) -> list[int]:
        out = [n for n in self.finite if n <= h]
        for s in self.starts:
            out.extend(range(s, h + 1, self.modulus))
        return sorted(set(out))

    # -- algebra -------------------------------------------------------------

    def union(self, other: "SemilinearSet") -> "SemilinearSet":
        return _combine(self, other, np.logical_or)

    def intersect(self, other: "SemilinearSet") -> "SemilinearSet":
        return _combine(self, other, np.logical_and)

    def complement(self) -> "SemilinearSet":
        h = _window_len(self)
        bits = np.logical_not(_bits(self, h))
        return _rebuild(bits, self.modulus)

    def minus(self, other: "SemilinearSet") -> "SemilinearSet":
        return _combine(self, other, lambda a, b: np.logical_and(a, np.logical_not(b)))

    def shift_down(self, by: int) -> "SemilinearSet":
        """Element-wise subtraction, clipped to the universe: {n - by : n - by >= 1}."""
        if by < 0:
            raise ValueError("shift must be nonnegative")
        if by == 0 or self.is_empty():
            return self
        h = _window_len(self) + by
        bits = _bits(self, h)
        shifted = np.zeros(h - by + 1, dtype=bool)
        shifted[1:] = bits[1 + by :]
        return _rebuild(shifted, self.modulus)

    def remove_points(self, points) -> "SemilinearSet":
        pts = [p for p in points if p >= 1]
        if not pts:
            return self
        return self.minus(SemilinearSet.from_points(pts))

    def add_points(self, points) -> "SemilinearSet":
        pts = [p for p in points if p >= 1]
        if not pts:
            return self
        return self.union(SemilinearSet.from_points(pts))

    # -- rendering -----------------------------------------------------------

    def __str__(self) -> str:
        if self.is_empty():
            return "{}"
        parts = []
        if self.finite:
            parts.append("{" + ",".join(str(n) for n in self.finite) + "}")
        for s in self.starts:
            parts.append(f"({s} + {self.modulus}N)")
        return " ∪ ".join(parts)

    def to_json(self) -> dict:
        return {
            "finite": list(self.finite),
            "residues": list(self.starts),
            "modulus": self.modulus,
        }

    @staticmethod
    def from_json(data: dict) -> "SemilinearSet":
        return _from_members(
            [int(x) for x in data["finite"]],
            tuple(int(x) for x in data["residues"]),
            int(data["modulus"]),
        )


# -- internal window machinery ----------------------------------------------


def _structure_bound(s: SemilinearSet) -> int:
    vals = list(s.finite) + list(s.starts)
    return max(vals) if vals else 1


def _window_len(*sets: SemilinearSet, extra: int = 0) -> int:
    k = reduce(_lcm, (s.modulus for s in sets), 1)
    b = max(_structure_bound(s) for s in sets)
    return b + 2 * k + extra + 1


def _bits(s: SemilinearSet, h: int) -> np.ndarray:
    bits = np.zeros(h + 1, dtype=bool)  # index 0 unused
    for n in s.finite:
        if n <= h:
            bits[n] = True
    for st in s.starts:
        if st <= h:
            bits[st : h + 1 : s.modulus] = True
    return bits


def _rebuild(bits: np.ndarray, kappa: int) -> SemilinearSet:
    """Extract the canonical set from a window whose tail is kappa-periodic."""
    h = len(bits) - 1
    best = None
    for d in _divisors(kappa):
        cand = _extract(bits, h, d)
        if cand is None:
            continue
        if np.array_equal(_bits(cand, h), bits):
            best = cand
            break
    assert best is not None, "canonical extraction failed"
    return best


def _extract(bits: np.ndarray, h: int, d: int) -> SemilinearSet | None:
    starts = []
    for c in range(1, d + 1):
        positions = np.arange(c, h + 1, d)
        if positions.size == 0:
            continue
        member = bits[positions]
        if member[-1]:
            missing = positions[~member]
            starts.append(int(missing[-1]) + d if missing.size else int(positions[0]))
    prog = np.zeros(h + 1, dtype=bool)
    for s in starts:
        prog[s :: d] = True
    finite = np.nonzero(bits & ~prog)[0]
    # A class that is intermittently on near the top of the window cannot be
    # represented at this modulus; the caller verifies and tries a larger divisor.
    return SemilinearSet(tuple(int(x) for x in finite), tuple(sorted(starts)), d)


def _from_members(finite, starts, modulus) -> SemilinearSet:
    raw = SemilinearSet(tuple(sorted(set(finite))), tuple(sorted(set(starts))), modulus)
    h = _window_len(raw)
    return _rebuild(_bits(raw, h), raw.modulus)


def _combine(a: SemilinearSet, b: SemilinearSet, op) -> SemilinearSet:
    k = _lcm(a.modulus, b.modulus)
    h = _window_len(a, b)
    bits = op(_bits(a, h), _bits(b, h))
    return _rebuild(bits, k)


@dataclass(frozen=True)
class EvidenceApprox:
    """Paired over/under semilinear approximations of an evidence set."""

    over: SemilinearSet
    under: SemilinearSet

    def __post_init__(self):
        if not _subset(self.under, self.over):
            raise ValueError("under-approximation must be contained in the over-approximation")

    @staticmethod
    def exact(s: SemilinearSet) -> "EvidenceApprox":
        return EvidenceApprox(s, s)

    @staticmethod
    def unknown() -> "EvidenceApprox":
        return EvidenceApprox(SemilinearSet.universe(), SemilinearSet.empty())

    def is_exact(self) -> bool:
        return self.over == self.under


def _subset(a: SemilinearSet, b: SemilinearSet) -> bool:
    return a.minus(b).is_empty()
