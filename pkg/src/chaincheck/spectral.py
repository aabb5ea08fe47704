"""Irreducible decomposition of the transfer CP map and its spectral data.

The bond space is split along common invariant subspaces of the Kraus
matrices.  Restricting to the block-diagonal parts preserves every word
trace, so the family's norm sequence decomposes over the blocks.  Each
irreducible component carries the data the evidence analysis needs: spectral
radius, peripheral period (the peripheral values of an irreducible CP map
are the radius times the p-th roots of unity), peripheral eigenpairs, and
the second spectral radius after deflating the peripheral pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np

from chaincheck import matcore
from chaincheck.matcore import ConvergenceError, EigenPair, DENSE_DIM_LIMIT
from chaincheck.mps import KrausSet, MPSFamily, liouville_matrix

PERIOD_TOL = 1e-6
SHELL_TOL = 1e-8
RADIUS_ONE_SNAP = 1e-9
KAPPA_CAP = 4096
BURN_IN_CAP = 10**4


class RankToleranceError(RuntimeError):
    """A candidate subspace is neither clearly invariant nor clearly not."""

    def __init__(self, defect: float):
        super().__init__(f"ambiguous invariance defect {defect:.3e}")
        self.defect = defect


class PeriodDetectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class IrreducibleComponent:
    """One irreducible block of the transfer map, in its own orthonormal basis."""

    basis: np.ndarray  # D x D_m, columns orthonormal in the ambient space
    kraus: KrausSet  # restricted matrices, D_m x D_m
    radius: float
    period: int
    peripheral: tuple[EigenPair, ...]
    second_radius: float
    degenerate: bool = False
    eigs: np.ndarray | None = field(default=None, compare=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class Decomposition:
    components: tuple[IrreducibleComponent, ...]
    modulus: int  # lcm of the component periods

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(c.dim for c in self.components)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def minimal_invariant_subspace(k: KrausSet, seed: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the smallest subspace containing `seed` that is
    closed under every Kraus matrix, built by breadth-first closure."""
    seed = np.asarray(seed, dtype=np.complex128).ravel()
    nrm = np.linalg.norm(seed)
    if nrm == 0:
        raise ValueError("seed vector must be nonzero")
    if tol is None:
        scale = max(np.linalg.norm(m, 2) for m in k.mats)
        tol = 1e-9 * max(scale, 1.0)
    basis = [seed / nrm]
    queue = [basis[0]]
    while queue and len(basis) < k.D:
        v = queue.pop()
        for a in k.mats:
            w = a @ v
            for _ in range(2):  # twice-repeated Gram-Schmidt for stability
                for b in basis:
                    w = w - (b.conj() @ w) * b
            n = np.linalg.norm(w)
            if n > tol:
                w = w / n
                basis.append(w)
                queue.append(w)
                if len(basis) == k.D:
                    break
    return np.stack(basis, axis=1)


def _invariance_defect(mats, basis: np.ndarray) -> float:
    p = basis @ basis.conj().T
    eye = np.eye(p.shape[0])
    return max(float(np.linalg.norm((eye - p) @ a @ p)) for a in mats)


def _find_proper_invariant(k: KrausSet, rng: np.random.Generator) -> np.ndarray | None:
    """A proper invariant subspace, or None if the set looks irreducible.

    Seeds are eigenvectors of random Kraus combinations: when the map is
    reducible those eigenvectors generically lie inside single blocks, while
    plain random seeds almost surely have components in every block and
    close up to the full space.
    """
    if k.D == 1:
        return None
    best: np.ndarray | None = None
    for _ in range(8):
        coeffs = rng.standard_normal(k.d) + 1j * rng.standard_normal(k.d)
        combo = sum(c * a for c, a in zip(coeffs, k.mats))
        _, vecs = np.linalg.eig(combo)
        seeds = [vecs[:, i] for i in range(vecs.shape[1])]
        seeds.append(rng.standard_normal(k.D) + 1j * rng.standard_normal(k.D))
        for seed in seeds:
            if np.linalg.norm(seed) < 1e-12:
                continue
            basis = minimal_invariant_subspace(k, seed)
            m = basis.shape[1]
            if m < k.D and (best is None or m < best.shape[1]):
                defect = _invariance_defect(k.mats, basis)
                if defect > 1e-6:
                    continue
                if defect > 1e-8:
                    raise RankToleranceError(defect)
                best = basis
                if m == 1:
                    return best
        if best is not None:
            return best
    return None


def _restrict(k: KrausSet, basis: np.ndarray) -> KrausSet:
    return KrausSet(tuple(basis.conj().T @ a @ basis for a in k.mats))


def _orthogonal_complement(basis: np.ndarray) -> np.ndarray:
    d = basis.shape[0]
    p = np.eye(d) - basis @ basis.conj().T
    q, r = np.linalg.qr(p)
    keep = np.abs(np.diag(r)) > 1e-10
    return q[:, keep]


def spectral_radius(k: KrausSet, *, dense_limit: int = DENSE_DIM_LIMIT) -> float:
    dim = k.D * k.D
    pairs = matcore.dominant_eigs(matcore.liouville_action(k.mats), dim, 1, dense_limit=dense_limit)
    rho = abs(pairs[0].value)
    if k.trace_preserving and abs(rho - 1.0) <= RADIUS_ONE_SNAP:
        return 1.0
    return rho


def _rational_period(value: complex, radius: float, max_den: int) -> int | None:
    """Smallest q with (value/radius)^q = 1 within tolerance, or None."""
    if radius <= 0:
        return None
    mu = value / radius
    theta = np.angle(mu) / (2 * np.pi)
    q = Fraction(theta).limit_denominator(max_den).denominator
    if abs(mu**q - 1.0) <= 1e-7:
        return q
    return None


def detect_period(
    eigs_or_action,
    dim: int,
    radius: float,
    max_p: int,
    *,
    dense_limit: int = DENSE_DIM_LIMIT,
) -> int:
    """Peripheral period from the normalized trace sequence tr(M^n)/r^n.

    For an irreducible CP map the sequence settles to the pattern
    0,...,0,p (p-1 zeros then p) once sub-peripheral modes die out.  The
    trace sequence is evaluated from the spectrum; above the dense limit the
    peripheral Ritz values stand in for the full spectrum.
    """
    if radius <= 0:
        raise ValueError("period detection needs a positive spectral radius")
    if isinstance(eigs_or_action, np.ndarray) and eigs_or_action.ndim == 1:
        eigs = eigs_or_action
    elif dim <= dense_limit:
        eigs = np.linalg.eigvals(matcore.materialize(eigs_or_action, dim))
    else:
        pairs = matcore.dominant_eigs(eigs_or_action, dim, min(max_p + 2, dim), dense_limit=dense_limit)
        qs = []
        for p in pairs:
            if abs(p.value) >= radius * (1 - SHELL_TOL):
                q = _rational_period(p.value, radius, max_p)
                if q is None:
                    raise PeriodDetectionError("peripheral Ritz value is not a root of unity")
                qs.append(q)
        return reduce(_lcm, qs, 1)

    sub = np.abs(eigs[np.abs(eigs) < radius * (1 - SHELL_TOL)])
    s = float(sub.max()) if sub.size else 0.0
    if s == 0.0:
        burn = 1
    else:
        burn = min(int(math.ceil(math.log(1e-10) / math.log(s / radius))) + 1, BURN_IN_CAP)
    normalized = eigs / radius
    for p in range(1, max_p + 1):
        ok = True
        for n in range(burn, burn + 2 * max_p + 1):
            t = np.sum(normalized**n).real
            expected = p if n % p == 0 else 0.0
            if abs(t - expected) > PERIOD_TOL:
                ok = False
                break
        if ok:
            return p
    raise PeriodDetectionError(f"no period up to {max_p} fits the trace pattern")


def peripheral_pairs(
    k: KrausSet,
    radius: float,
    period: int,
    *,
    dense_limit: int = DENSE_DIM_LIMIT,
    rng: np.random.Generator | None = None,
) -> tuple[EigenPair, ...]:
    """Eigenpairs at radius * (period-th roots of unity).

    Dense mode reads them off the full spectrum.  Matrix-free mode runs power
    iteration on the root-of-unity projector filter that isolates each
    peripheral mode (inverse-free: only polynomials in the action are used).
    """
    dim = k.D * k.D
    apply_m = matcore.liouville_action(k.mats)
    targets = [radius * np.exp(2j * np.pi * l / period) for l in range(period)]
    if rng is None:
        rng = np.random.default_rng(7)

    if dim <= dense_limit:
        m = matcore.materialize(apply_m, dim)
        vals, vecs = np.linalg.eig(m)
        out = []
        for t in targets:
            i = int(np.argmin(np.abs(vals - t)))
            v = vecs[:, i] / np.linalg.norm(vecs[:, i])
            pair = EigenPair(complex(vals[i]), v)
            if abs(pair.value - t) > 1e-7 * max(radius, 1.0):
                raise ConvergenceError(
                    f"no eigenvalue near peripheral target {t:.6f}", abs(pair.value - t)
                )
            out.append(pair)
        return tuple(out)

    out = []
    for l, t in enumerate(targets):
        omega = np.exp(2j * np.pi * l / period)
        pair = None
        for _ in range(5):
            v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            best = np.inf
            for _ in range(400):
                # Damp sub-peripheral modes, then project onto the target mode.
                for _ in range(period):
                    v = apply_m(v) / radius
                acc = v.copy()
                w = v
                for tpow in range(1, period):
                    w = apply_m(w) / radius
                    acc = acc + w * omega ** (-tpow)
                nrm = np.linalg.norm(acc)
                if nrm < 1e-14:
                    break
                v = acc / nrm
                res = float(np.linalg.norm(apply_m(v) - t * v))
                best = min(best, res)
                if res <= 1e-8 * max(radius, 1.0):
                    pair = EigenPair(complex(t), v)
                    break
            if pair is not None:
                break
        if pair is None:
            raise ConvergenceError(f"peripheral mode at {t:.6f} did not converge", best)
        out.append(pair)
    return tuple(out)


def second_radius(
    k: KrausSet,
    pairs: tuple[EigenPair, ...],
    *,
    dense_limit: int = DENSE_DIM_LIMIT,
) -> float:
    """Spectral radius of the transfer action with the peripheral pairs deflated."""
    dim = k.D * k.D
    if dim <= len(pairs):
        return 0.0
    apply_m = matcore.liouville_action(k.mats)

    def deflated(v):
        v = np.asarray(v)
        w = np.asarray(apply_m(v))
        for p in pairs:
            overlap = p.vector.conj() @ v
            if v.ndim == 1:
                w = w - p.value * p.vector * overlap
            else:
                w = w - p.value * np.outer(p.vector, overlap)
        return w

    res = matcore.dominant_eigs(deflated, dim, 1, dense_limit=dense_limit)
    return abs(res[0].value)


def analyze_component(
    basis: np.ndarray,
    restricted: KrausSet,
    *,
    dense_limit: int = DENSE_DIM_LIMIT,
    rng: np.random.Generator | None = None,
) -> IrreducibleComponent:
    dim = restricted.D * restricted.D
    dense = dim <= dense_limit
    eigs = np.linalg.eigvals(liouville_matrix(restricted)) if dense else None

    radius = spectral_radius(restricted, dense_limit=dense_limit)
    if radius <= 1e-12:
        # Nilpotent block: no peripheral data, contributes nothing for n >= D_m.
        return IrreducibleComponent(basis, restricted, 0.0, 1, (), 0.0, degenerate=False, eigs=eigs)

    source = eigs if dense else matcore.liouville_action(restricted.mats)
    period = detect_period(source, dim, radius, max_p=dim, dense_limit=dense_limit)
    pairs = peripheral_pairs(restricted, radius, period, dense_limit=dense_limit, rng=rng)
    s = second_radius(restricted, pairs, dense_limit=dense_limit)
    degenerate = not (s < radius - 1e-12)
    return IrreducibleComponent(basis, restricted, radius, period, pairs, s, degenerate, eigs)


def decompose(
    k: KrausSet,
    *,
    rng: np.random.Generator | int | None = None,
    dense_limit: int = DENSE_DIM_LIMIT,
) -> Decomposition:
    """Split the bond space into irreducible blocks and analyze each one."""
    if isinstance(rng, (int, np.integer)) or rng is None:
        rng = np.random.default_rng(0 if rng is None else rng)

    blocks: list[np.ndarray] = []

    def split(ambient_basis: np.ndarray, mats: KrausSet):
        sub = _find_proper_invariant(mats, rng)
        if sub is None:
            blocks.append(ambient_basis)
            return
        comp = _orthogonal_complement(sub)
        # Off-diagonal parts never contribute to word traces, so recursing on
        # the two block-diagonal restrictions preserves the norm sequence.
        split(ambient_basis @ sub, _restrict(mats, sub))
        split(ambient_basis @ comp, _restrict(mats, comp))

    split(np.eye(k.D, dtype=np.complex128), k)

    comps = tuple(
        analyze_component(b, _restrict(k, b), dense_limit=dense_limit, rng=rng) for b in blocks
    )
    modulus = reduce(_lcm, (c.period for c in comps if c.radius > 0), 1)
    return Decomposition(comps, modulus)


# ---------------------------------------------------------------------------
# Spectral profile: the full shell structure used by the evidence analysis.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shell:
    radius: float
    period: int | None  # None: angles are not roots of unity (aperiodic shell)
    eigs: np.ndarray


@dataclass(frozen=True)
class SpectralProfile:
    eigs: np.ndarray  # full transfer spectrum, all blocks
    shells: tuple[Shell, ...]  # sorted by decreasing radius
    modulus: int  # residue modulus covering every periodic shell
    dense: bool

    def tail_sum(self, below: float, n: int) -> float:
        """Certified bound on |sum of lambda^n over eigenvalues with |lambda| < below|."""
        mods = np.abs(self.eigs)
        mask = mods < below * (1 - SHELL_TOL)
        return float(np.sum(mods[mask] ** n))


def build_profile(family: MPSFamily, dec: Decomposition, *, dense_limit: int = DENSE_DIM_LIMIT) -> SpectralProfile:
    dim = family.D * family.D
    if dim <= dense_limit:
        eigs = np.linalg.eigvals(family.liouville())
        dense = True
    else:
        # Matrix-free fallback: exact peripheral structure per component plus
        # conservative placeholders for everything below and across blocks.
        parts = []
        for c in dec.components:
            parts.extend(abs(c.radius) * np.exp(2j * np.pi * np.arange(c.period) / c.period))
            sub = c.dim * c.dim - c.period
            parts.extend([c.second_radius * np.exp(1j)] * max(sub, 0))  # aperiodic marker angle
        for i, a in enumerate(dec.components):
            for j, b in enumerate(dec.components):
                if i != j:
                    bound = math.sqrt(max(a.radius, 1e-300) * max(b.radius, 1e-300))
                    parts.extend([bound * np.exp(1j)] * (a.dim * b.dim))
        eigs = np.asarray(parts, dtype=np.complex128)
        dense = False

    mods = np.abs(eigs)
    rho = float(mods.max(initial=0.0))
    order = np.argsort(-mods)
    shells: list[Shell] = []
    used = np.zeros(len(eigs), dtype=bool)
    for idx in order:
        if used[idx]:
            continue
        r = mods[idx]
        members = (~used) & (np.abs(mods - r) <= SHELL_TOL * max(rho, 1.0))
        used |= members
        vals = eigs[members]
        if r <= 1e-13:
            shells.append(Shell(0.0, 1, vals))
            continue
        qs = []
        aperiodic = False
        for v in vals:
            q = _rational_period(v, r, max_den=max(64, 2 * family.D * family.D))
            if q is None:
                aperiodic = True
                break
            qs.append(q)
        period = None if aperiodic else reduce(_lcm, qs, 1)
        shells.append(Shell(float(r), period, vals))

    kappa = dec.modulus
    for sh in shells:
        if sh.period is not None:
            kappa = _lcm(kappa, sh.period)
        if kappa > KAPPA_CAP:
            kappa = dec.modulus
            break
    return SpectralProfile(eigs, tuple(shells), kappa, dense)


def tail_bound(dec: Decomposition, profile: SpectralProfile, r: float, n: int) -> float:
    """Upper bound on the total sub-shell trace contribution at power n.

    Dense mode sums |lambda|^n over every eigenvalue below the shell, which
    bounds |sum lambda^n| because traces weight each eigenvalue by exactly
    its algebraic multiplicity.  Matrix-free mode falls back to per-component
    counts times sub-shell radii.
    """
    if profile.dense:
        return profile.tail_sum(r, n) * (1 + 1e-12)
    total = 0.0
    for c in dec.components:
        if c.radius < r * (1 - SHELL_TOL):
            total += (c.dim**2) * c.radius**n
        else:
            total += max(c.dim**2 - c.period, 0) * c.second_radius**n
    # Cross-block transfer operators live at radius <= sqrt(r_i r_j); without
    # their spectra the bound keeps the full count at that radius.
    for i, a in enumerate(dec.components):
        for j, b in enumerate(dec.components):
            if i != j:
                cross = math.sqrt(max(a.radius, 0.0) * max(b.radius, 0.0))
                total += a.dim * b.dim * cross**n
    return total
