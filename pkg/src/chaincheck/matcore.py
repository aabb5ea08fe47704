"""Dense complex linear-algebra kernels and matrix-free eigensolvers.

All matrices are numpy arrays of complex128.  Every function here is pure;
arrays are never mutated in place, so everything is safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Above this dimension eigenproblems go through the matrix-free block
# power iteration instead of a dense factorization.
DENSE_DIM_LIMIT = 1024


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolver failed to reach the requested residual."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class NumericalInconsistencyError(ArithmeticError):
    """A quantity that must be real (or zero) came out significantly complex."""


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ShapeError("matrix contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def conj_entrywise(a) -> np.ndarray:
    return np.conj(as_matrix(a))


def trace(a) -> complex:
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"trace of non-square matrix {a.shape}")
    return complex(np.trace(a))


def apply_cp_map(mats: Sequence[np.ndarray], x: np.ndarray) -> np.ndarray:
    """Apply X -> sum_k A_k X A_k^dagger without forming the superoperator.

    Cost is O(d D^3) per call; `x` must be D x D.
    """
    x = as_matrix(x)
    d0 = mats[0].shape[0]
    if x.shape != (d0, d0):
        raise ShapeError(f"state has shape {x.shape}, expected {(d0, d0)}")
    out = np.zeros_like(x)
    for a in mats:
        out += a @ x @ a.conj().T
    return out


def liouville_action(mats: Sequence[np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    """Matrix-free action of sum_k conj(A_k) (x) A_k on vectorized matrices.

    The returned callable accepts a vector of length D^2 or a (D^2, k) block
    of columns.  Column-stacking convention: vec(A X B^dagger) =
    (conj(B) (x) A) vec(X), so this is the map X -> sum A_k X A_k^dagger.
    """
    d = mats[0].shape[0]
    stacked = np.stack([np.asarray(a, dtype=np.complex128) for a in mats])

    def apply(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.complex128)
        single = v.ndim == 1
        cols = v[:, None] if single else v
        # vec is column-stacking: entry (i, j) of X sits at index j*D + i.
        xs = cols.T.reshape(-1, d, d).transpose(0, 2, 1)  # (b, D, D) matrices
        out = np.einsum("sij,bjk,slk->bil", stacked, xs, stacked.conj(), optimize=True)
        res = out.transpose(0, 2, 1).reshape(cols.shape[1], -1).T
        return res[:, 0] if single else res

    return apply


def materialize(apply_m: Callable[[np.ndarray], np.ndarray], dim: int) -> np.ndarray:
    """Build the dense matrix of a linear action by applying it to identity columns."""
    return np.asarray(apply_m(np.eye(dim, dtype=np.complex128)))


@dataclass(frozen=True)
class EigenPair:
    value: complex
    vector: np.ndarray

    def residual(self, apply_m) -> float:
        return float(np.linalg.norm(apply_m(self.vector) - self.value * self.vector))


def _ritz_pairs(apply_m, basis: np.ndarray) -> list[EigenPair]:
    w = np.asarray(apply_m(basis))
    h = basis.conj().T @ w
    vals, vecs = np.linalg.eig(h)
    order = np.argsort(-np.abs(vals))
    pairs = []
    for i in order:
        v = basis @ vecs[:, i]
        n = np.linalg.norm(v)
        if n > 0:
            pairs.append(EigenPair(complex(vals[i]), v / n))
    return pairs


def dominant_eigs(
    apply_m: Callable[[np.ndarray], np.ndarray],
    dim: int,
    count: int,
    tol: float = 1e-10,
    *,
    max_iters: int = 5000,
    rng: np.random.Generator | None = None,
    dense_limit: int = DENSE_DIM_LIMIT,
) -> list[EigenPair]:
    """Eigenpairs of largest modulus of a linear action on C^dim.

    Below `dense_limit` the operator is materialized and factorized densely.
    Above it, block power iteration with QR re-orthonormalization is used;
    the orthonormalization deflates already-converged directions, and Ritz
    extraction on the projected block resolves equal-modulus clusters that
    defeat single-vector iteration.  Residuals are checked against
    tol * ||M||_F (estimated in matrix-free mode).
    """
    if count > dim:
        raise ShapeError(f"requested {count} eigenpairs from a {dim}-dim space")
    if rng is None:
        rng = np.random.default_rng(0)

    if dim <= dense_limit:
        m = materialize(apply_m, dim)
        scale = max(float(np.linalg.norm(m)), 1e-300)
        vals, vecs = np.linalg.eig(m)
        order = np.argsort(-np.abs(vals))[:count]
        pairs = []
        best = np.inf
        for i in order:
            v = vecs[:, i] / np.linalg.norm(vecs[:, i])
            p = EigenPair(complex(vals[i]), v)
            best = min(best, p.residual(apply_m))
            pairs.append(p)
        if best > tol * scale:
            raise ConvergenceError("dense eigensolve residual above tolerance", best)
        return pairs

    block = min(dim, max(2 * count + 2, count + 4))
    v = rng.standard_normal((dim, block)) + 1j * rng.standard_normal((dim, block))
    v, _ = np.linalg.qr(v)
    # Frobenius norm estimate from the random block: E||MG||_F^2 = (k/dim)||M||_F^2.
    probe = np.asarray(apply_m(v))
    scale = max(float(np.linalg.norm(probe)) * np.sqrt(dim / block), 1e-300)

    best = np.inf
    for it in range(max_iters):
        w = np.asarray(apply_m(v))
        v, _ = np.linalg.qr(w)
        if it % 5 == 4 or it == max_iters - 1:
            pairs = _ritz_pairs(apply_m, v)[:count]
            res = max(p.residual(apply_m) for p in pairs) if pairs else np.inf
            best = min(best, res)
            if res <= tol * scale:
                return pairs
    raise ConvergenceError(f"block power iteration did not converge in {max_iters} iterations", best)
