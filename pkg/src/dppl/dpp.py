"""Finite L-ensemble determinantal point processes.

Subsets are plain tuples of strictly increasing 0-based indices. Kernels are
wrapped in :class:`KernelEnsemble`, which keeps the quality vector and the
similarity matrix it was built from when those are known.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .numerics import (
    SingularMatrixError,
    SymmetryError,
    is_symmetric,
    logdet_lu,
    solve,
    sym_eig,
)

EIG_CLAMP = 1e-9
PROB_TOL = 1e-9
ENUM_MAX_N = 20
P0_EXHAUSTIVE_MAX_N = 8

Subset = tuple


class NumericFailure(RuntimeError):
    """Raised when a kernel turns out not to define a valid DPP."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KernelEnsemble:
    L: np.ndarray
    g: np.ndarray | None = None
    S: np.ndarray | None = None

    def __post_init__(self):
        L = _frozen(self.L)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError(f"L must be square, got shape {L.shape}")
        if not np.all(np.isfinite(L)):
            raise ValueError("L has non-finite entries")
        object.__setattr__(self, "L", L)
        if self.g is not None:
            object.__setattr__(self, "g", _frozen(self.g))
        if self.S is not None:
            object.__setattr__(self, "S", _frozen(self.S))

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def symmetric(self) -> bool:
        return is_symmetric(self.L)


def as_subset(indices: Iterable[int], n: int | None = None) -> Subset:
    """Validate and normalize an index collection into a sorted tuple."""
    idx = sorted(int(i) for i in indices)
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in subset {idx}")
    if idx and idx[0] < 0:
        raise ValueError(f"negative index in subset {idx}")
    if n is not None and idx and idx[-1] >= n:
        raise ValueError(f"index {idx[-1]} out of range for ground set of size {n}")
    return tuple(idx)


def subset_from_mask(mask) -> Subset:
    return tuple(int(i) for i in np.flatnonzero(mask))


def build_kernel(g, s) -> KernelEnsemble:
    """L_ij = g_i * s_ij * g_j."""
    g = np.asarray(g, dtype=float)
    s = np.asarray(s, dtype=float)
    if g.ndim != 1 or s.shape != (g.size, g.size):
        raise ValueError(f"dimension mismatch: g has {g.shape}, s has {s.shape}")
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise ValueError("quality values must be positive and finite")
    return KernelEnsemble(g[:, None] * s * g[None, :], g=g, S=s)


def logdet_sub(L: np.ndarray, y: Subset) -> float:
    """log det(L_Y), or -inf when the minor is not positive. log det(L_empty) = 0."""
    if not y:
        return 0.0
    idx = np.asarray(y)
    sign, val = logdet_lu(L[np.ix_(idx, idx)])
    return val if sign > 0 else -math.inf


def log_normalizer(k: KernelEnsemble) -> float:
    sign, val = logdet_lu(k.L + np.eye(k.n))
    if sign <= 0:
        raise SingularMatrixError(-1, "L + I is singular or has non-positive determinant")
    return val


def subset_log_prob(k: KernelEnsemble, y) -> float:
    y = as_subset(y, k.n)
    return logdet_sub(k.L, y) - log_normalizer(k)


def marginal_kernel(k: KernelEnsemble) -> np.ndarray:
    """K = L (L + I)^-1."""
    a = k.L + np.eye(k.n)
    # K = L A^-1  <=>  A^T K^T = L^T
    return solve(a.T, k.L.T).T


def all_subsets(n: int):
    for r in range(n + 1):
        yield from itertools.combinations(range(n), r)


def enumerate_probs(k: KernelEnsemble) -> dict[Subset, float]:
    """Exact P(Y) for every subset, computed from minors (small n only)."""
    if k.n > ENUM_MAX_N:
        raise ValueError(f"enumeration guard: n={k.n} > {ENUM_MAX_N}")
    logz = log_normalizer(k)
    return {y: math.exp(logdet_sub(k.L, y) - logz) for y in all_subsets(k.n)}


# -- sampling ---------------------------------------------------------------

_BATCH_FLOATS = 4_000_000


def _chunks(size: int, n: int):
    step = max(1, _BATCH_FLOATS // max(1, n * n))
    for start in range(0, size, step):
        yield min(step, size - start)


def _spectrum(k: KernelEnsemble):
    if not k.symmetric:
        raise SymmetryError("kernel is not symmetric; use sample_sequential instead")
    values, vectors = sym_eig(k.L)
    floor = -EIG_CLAMP * max(1.0, float(np.max(np.abs(k.L))) if k.n else 1.0)
    if values.size and values[0] < floor:
        raise NumericFailure(f"kernel has negative eigenvalue {values[0]:.3g}")
    return np.clip(values, 0.0, None), vectors


def _elementary_batch(vectors: np.ndarray, keep: np.ndarray, rng) -> np.ndarray:
    """Draw from elementary DPPs spanned by the eigenvector columns flagged in ``keep``.

    ``keep`` is a (B, n) boolean mask over eigenvector indices; row b of the
    result is the sample for draw b and always has ``keep[b].sum()`` members.
    """
    bsz, n = keep.shape
    # rows of W[b] are the item vectors b_i restricted to the selected eigenvectors
    W = vectors[None, :, :] * keep[:, None, :]
    counts = keep.sum(axis=1)
    out = np.zeros((bsz, n), dtype=bool)
    rows = np.arange(bsz)
    for step in range(int(counts.max(initial=0))):
        live = counts > step
        norms = np.einsum("bij,bij->bi", W, W)
        norms[out] = 0.0
        cum = np.cumsum(norms, axis=1)
        u = rng.random(bsz) * cum[:, -1]
        pick = np.minimum((cum < u[:, None]).sum(axis=1), n - 1)
        pick_live = pick[live]
        out[rows[live], pick_live] = True
        b = W[rows, pick, :]
        bb = np.einsum("bi,bi->b", b, b)
        bb[~live | (bb <= 0)] = np.inf
        W -= np.einsum("bij,bj->bi", W, b)[:, :, None] * (b / bb[:, None])[:, None, :]
    return out


def draw_spectral(k: KernelEnsemble, rng, size: int) -> np.ndarray:
    """``size`` independent draws as a (size, n) boolean membership array."""
    values, vectors = _spectrum(k)
    n = k.n
    p = values / (1.0 + values)
    parts = []
    for b in _chunks(size, n):
        keep = rng.random((b, n)) < p[None, :]
        parts.append(_elementary_batch(vectors, keep, rng))
    return np.concatenate(parts) if parts else np.zeros((0, n), dtype=bool)


def sample_spectral(k: KernelEnsemble, rng) -> Subset:
    """One exact draw via the eigendecomposition (symmetric kernels only)."""
    return subset_from_mask(draw_spectral(k, rng, 1)[0])


def sample_elementary(vectors: np.ndarray, rng) -> Subset:
    """Draw from the elementary DPP whose marginal kernel is V V^T."""
    vectors = np.asarray(vectors, dtype=float)
    n, r = vectors.shape
    padded = np.zeros((n, n))
    padded[:, :r] = vectors
    keep = np.zeros((1, n), dtype=bool)
    keep[0, :r] = True
    return subset_from_mask(_elementary_batch(padded, keep, rng)[0])


def draw_sequential(k: KernelEnsemble, rng, size: int) -> np.ndarray:
    """Item-by-item exact sampler valid for any P0 kernel, symmetric or not.

    Works on the marginal kernel K = I - (L + I)^-1. Item i is included with
    its current conditional probability K_ii; the decision is then folded into
    the remaining block by a Schur-complement (LU) update, with the pivot
    shifted by -1 when the item is excluded.
    """
    n = k.n
    if n == 0:
        return np.zeros((size, 0), dtype=bool)
    K0 = np.eye(n) - solve(k.L + np.eye(n), np.eye(n))
    parts = []
    for b in _chunks(size, n):
        K = np.broadcast_to(K0, (b, n, n)).copy()
        out = np.zeros((b, n), dtype=bool)
        for i in range(n):
            p = K[:, i, i]
            if np.any(p < -PROB_TOL) or np.any(p > 1 + PROB_TOL):
                bad = p[(p < -PROB_TOL) | (p > 1 + PROB_TOL)][0]
                raise NumericFailure(
                    f"conditional inclusion probability {bad:.6g} for item {i}; kernel is not P0"
                )
            take = rng.random(b) < p
            out[:, i] = take
            piv = np.where(take, p, p - 1.0)
            if i + 1 < n:
                piv = np.where(piv == 0.0, np.inf, piv)
                col = K[:, i + 1:, i] / piv[:, None]
                K[:, i + 1:, i + 1:] -= col[:, :, None] * K[:, i, None, i + 1:]
        parts.append(out)
    return np.concatenate(parts) if parts else np.zeros((0, n), dtype=bool)


def sample_sequential(k: KernelEnsemble, rng) -> Subset:
    return subset_from_mask(draw_sequential(k, rng, 1)[0])


def sample(k: KernelEnsemble, rng) -> Subset:
    """Spectral draw for symmetric kernels, sequential otherwise."""
    return sample_spectral(k, rng) if k.symmetric else sample_sequential(k, rng)


# -- MAP inference ----------------------------------------------------------

def _relaxed_matrix(k: KernelEnsemble, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (k.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({k.n},)")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("relaxed point must lie in [0, 1]^n")
    return x[:, None] * (k.L - np.eye(k.n)) + np.eye(k.n)


def multilinear_value(k: KernelEnsemble, x) -> float:
    """F(x) = log det(diag(x)(L - I) + I); -inf where the determinant is not positive."""
    sign, val = logdet_lu(_relaxed_matrix(k, x))
    return val if sign > 0 else -math.inf


def multilinear_gradient(k: KernelEnsemble, x) -> np.ndarray:
    a = _relaxed_matrix(k, x)
    try:
        inv = solve(a, np.eye(k.n))
    except SingularMatrixError:
        return np.full(k.n, -np.inf)
    # tr(A^-1 (L - I)_i) = ((L - I) A^-1)_ii
    return np.einsum("ij,ji->i", k.L - np.eye(k.n), inv)


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, tol: float = 1e-6) -> tuple[float, float]:
    """Maximize f on [0, 1]; returns (argmax, value), endpoints included."""
    lo, hi = 0.0, 1.0
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    best = max(((c, fc), (d, fd), (1.0, f(1.0))), key=lambda t: t[1])
    return best


def local_opt(k: KernelEnsemble, upper=None, tol: float = 1e-7, max_iter: int = 500) -> np.ndarray:
    """Conditional-gradient ascent of F over the box [0, upper], started at 0."""
    n = k.n
    upper = np.ones(n) if upper is None else np.clip(np.asarray(upper, dtype=float), 0.0, 1.0)
    x = np.zeros(n)
    fx = 0.0
    for _ in range(max_iter):
        grad = multilinear_gradient(k, x)
        y = np.where(grad > 0, upper, 0.0)
        d = y - x
        if not np.any(d):
            break
        a, fa = _golden_max(lambda t: multilinear_value(k, np.clip(x + t * d, 0.0, upper)))
        if not fa > fx + tol:
            if fa > fx:
                x, fx = np.clip(x + a * d, 0.0, upper), fa
            break
        x, fx = np.clip(x + a * d, 0.0, upper), fa
    return x


def map_infer(k: KernelEnsemble, delta: float = 0.5) -> Subset:
    """Approximate argmax_Y det(L_Y): two local optima of F, threshold-rounded."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if k.n == 0:
        return ()
    x = local_opt(k)
    y = local_opt(k, 1.0 - x)
    best = x if multilinear_value(k, x) >= multilinear_value(k, y) else y
    return subset_from_mask(best > delta)


def enumerate_map(k: KernelEnsemble) -> Subset:
    """Exact argmax of log det(L_Y); ties go to the smaller, then lexicographically first, set."""
    if k.n > ENUM_MAX_N:
        raise ValueError(f"enumeration guard: n={k.n} > {ENUM_MAX_N}")
    best, best_val = (), 0.0
    for y in all_subsets(k.n):
        if not y:
            continue
        val = logdet_sub(k.L, y)
        if val > best_val + 1e-12:
            best, best_val = y, val
    return best


# -- P0 checks --------------------------------------------------------------

def principal_minors_ok(a, tol: float = 1e-9) -> bool:
    """Every principal minor >= -tol * (max|a_ij|)^|Y|, checked exhaustively."""
    a = np.asarray(a, dtype=float)
    scale = max(float(np.max(np.abs(a))) if a.size else 0.0, 1e-300)
    for r in range(1, a.shape[0] + 1):
        for y in itertools.combinations(range(a.shape[0]), r):
            idx = np.asarray(y)
            if np.linalg.det(a[np.ix_(idx, idx)]) < -tol * scale**r:
                return False
    return True


def row_dominance_certificate(a, rtol: float = 1e-12) -> bool:
    """Nonnegative diagonal dominating each row's off-diagonal absolute sum."""
    a = np.asarray(a, dtype=float)
    diag = np.diag(a)
    radii = np.sum(np.abs(a), axis=1) - np.abs(diag)
    slack = rtol * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    return bool(np.all(diag >= -slack) and np.all(diag - radii >= -slack))


def p0_status(a) -> str:
    """How a candidate kernel's P0 property was established.

    'exhaustive' (all principal minors, n <= 8), 'certificate' (row
    dominance), 'spectral' (symmetric with nonnegative spectrum), 'failed',
    or 'unverified' when no check applies.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] <= P0_EXHAUSTIVE_MAX_N:
        return "exhaustive" if principal_minors_ok(a) else "failed"
    if row_dominance_certificate(a):
        return "certificate"
    if is_symmetric(a):
        values = np.linalg.eigvalsh(0.5 * (a + a.T))
        return "spectral" if values[0] >= -EIG_CLAMP * max(1.0, np.max(np.abs(a))) else "failed"
    return "unverified"
