"""Periodic MPS families: Kraus data, transfer-matrix norms, brute-force oracle.

A family is a set of d matrices of size D x D.  The squared norm of the
N-site state equals the trace of the N-th power of the transfer matrix
sum_k conj(A_k) (x) A_k, which is what `norm_sq` computes.  The brute-force
routines expand all d^N index words and exist as an independent oracle.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from chaincheck import matcore
from chaincheck.matcore import (
    DENSE_DIM_LIMIT,
    NumericalInconsistencyError,
    ShapeError,
    as_matrix,
)

TRACE_PRESERVING_TOL = 1e-9
BRUTE_FORCE_GUARD = 10**7


class TooLargeError(ValueError):
    """Brute-force expansion would exceed the word-count guard."""


@dataclass(frozen=True)
class KrausSet:
    """The d matrices of size D x D defining an MPS family and its CP map."""

    mats: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.mats:
            raise ShapeError("a Kraus set needs at least one matrix")
        mats = tuple(as_matrix(m) for m in self.mats)
        d0 = mats[0].shape
        if d0[0] != d0[1]:
            raise ShapeError(f"Kraus matrices must be square, got {d0}")
        for m in mats:
            if m.shape != d0:
                raise ShapeError("all Kraus matrices must share one shape")
        object.__setattr__(self, "mats", mats)

    @property
    def d(self) -> int:
        return len(self.mats)

    @property
    def D(self) -> int:
        return self.mats[0].shape[0]

    @property
    def trace_preserving(self) -> bool:
        s = sum(m.conj().T @ m for m in self.mats)
        return bool(np.linalg.norm(s - np.eye(self.D)) <= TRACE_PRESERVING_TOL)


@dataclass
class MPSFamily:
    """A size-indexed family of periodic MPS generated by one Kraus set.

    The cached transfer matrix is built at most once; afterwards the object
    is effectively immutable and safe for concurrent readers.
    """

    kraus: KrausSet
    name: str = "family"
    _liouville: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return self.kraus.d

    @property
    def D(self) -> int:
        return self.kraus.D

    def liouville(self) -> np.ndarray:
        if self._liouville is None:
            self._liouville = liouville_matrix(self.kraus)
        return self._liouville


def liouville_matrix(k: KrausSet) -> np.ndarray:
    """The D^2 x D^2 transfer matrix sum_k conj(A_k) (x) A_k."""
    dim = k.D * k.D
    out = np.zeros((dim, dim), dtype=np.complex128)
    for a in k.mats:
        out += matcore.kron(np.conj(a), a)
    return out


def _real_trace(value: complex, context: str) -> float:
    tol = 1e-8 * max(1.0, abs(value.real))
    if abs(value.imag) > tol:
        raise NumericalInconsistencyError(
            f"{context}: trace has imaginary part {value.imag:.3e} beyond tolerance"
        )
    return float(value.real)


def norm_sq(f: MPSFamily, n: int) -> float:
    """Squared norm of the n-site state, i.e. Re tr(M^n) for the transfer matrix M.

    Dense repeated squaring for D^2 <= 1024; above that the trace is
    accumulated by propagating identity columns through the matrix-free
    transfer action, in batches, without ever forming M^n.
    """
    if n < 1:
        raise ValueError("chain size must be >= 1")
    dim = f.D * f.D
    if dim <= DENSE_DIM_LIMIT:
        m = f.liouville()
        t = complex(np.trace(np.linalg.matrix_power(m, n)))
        return _real_trace(t, f"norm_sq(n={n})")
    apply_m = matcore.liouville_action(f.kraus.mats)
    total = 0.0 + 0.0j
    batch = max(1, (1 << 22) // dim)
    for start in range(0, dim, batch):
        idx = np.arange(start, min(start + batch, dim))
        cols = np.zeros((dim, idx.size), dtype=np.complex128)
        cols[idx, np.arange(idx.size)] = 1.0
        for _ in range(n):
            cols = apply_m(cols)
        total += cols[idx, np.arange(idx.size)].sum()
    return _real_trace(complex(total), f"norm_sq(n={n})")


def brute_force_amplitudes(f: MPSFamily, n: int) -> dict[tuple[int, ...], complex]:
    """Amplitude tr(A_{k1} ... A_{kn}) for every index word, 1-based indices.

    This is the O(d^n D^3) oracle; guarded at 10^7 words.
    """
    if f.d**n > BRUTE_FORCE_GUARD:
        raise TooLargeError(f"{f.d}^{n} words exceed the brute-force guard")
    out: dict[tuple[int, ...], complex] = {}

    def walk(prefix: tuple[int, ...], acc: np.ndarray):
        if len(prefix) == n:
            out[prefix] = complex(np.trace(acc))
            return
        for k, a in enumerate(f.kraus.mats, start=1):
            walk(prefix + (k,), acc @ a)

    walk((), np.eye(f.D, dtype=np.complex128))
    return out


def brute_force_norm_sq(f: MPSFamily, n: int) -> float:
    amps = brute_force_amplitudes(f, n)
    return float(sum(abs(a) ** 2 for a in amps.values()))


def clamp_norm_value(value: float) -> float:
    """Tiny negative norms are floating-point noise; clamp them to zero."""
    if value < 0.0 and abs(value) <= 1e-9:
        return 0.0
    return value


# ---------------------------------------------------------------------------
# Model file format:
#   {"name": str, "d": int, "D": int,
#    "matrices": [ [[ [re, im], ... ] ...] ... ]}
# `matrices` is a length-d list of D x D row-major arrays of [re, im] pairs.
# ---------------------------------------------------------------------------


def _matrix_from_json(rows, D: int, index: int, path: str) -> np.ndarray:
    if len(rows) != D:
        raise ShapeError(f"{path}: matrix {index} has {len(rows)} rows, expected {D}")
    out = np.zeros((D, D), dtype=np.complex128)
    for i, row in enumerate(rows):
        if len(row) != D:
            raise ShapeError(f"{path}: matrix {index} row {i} has {len(row)} entries, expected {D}")
        for j, cell in enumerate(row):
            if not (isinstance(cell, (list, tuple)) and len(cell) == 2):
                raise ShapeError(f"{path}: matrix {index} entry ({i},{j}) is not an [re, im] pair")
            re, im = float(cell[0]), float(cell[1])
            if not (math.isfinite(re) and math.isfinite(im)):
                raise ShapeError(f"{path}: matrix {index} entry ({i},{j}) is not finite")
            out[i, j] = complex(re, im)
    return out


def load_model(path: str | Path) -> MPSFamily:
    path = Path(path)
    data = json.loads(path.read_text())
    try:
        name = str(data["name"])
        d, D = int(data["d"]), int(data["D"])
        rows = data["matrices"]
    except (KeyError, TypeError) as exc:
        raise ShapeError(f"{path}: missing or malformed field: {exc}") from exc
    if d < 1 or D < 1:
        raise ShapeError(f"{path}: dimensions must be positive")
    if len(rows) != d:
        raise ShapeError(f"{path}: expected {d} matrices, found {len(rows)}")
    mats = tuple(_matrix_from_json(m, D, k, str(path)) for k, m in enumerate(rows))
    return MPSFamily(KrausSet(mats), name=name)


def save_model(f: MPSFamily, path: str | Path) -> None:
    data = {
        "name": f.name,
        "d": f.d,
        "D": f.D,
        "matrices": [
            [[[float(z.real), float(z.imag)] for z in row] for row in m]
            for m in f.kraus.mats
        ],
    }
    Path(path).write_text(json.dumps(data))
