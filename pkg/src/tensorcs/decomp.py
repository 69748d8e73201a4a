"""Singular value decomposition and the tensor decompositions built on it.

The SVD is a one-sided Jacobi iteration: deterministic for a given input,
accurate for the desk-scale dense matrices this package works with. The
weak Tucker-style decomposition recursively unfolds a tensor and splits
each unfolding by SVD, producing a sum of rank-one terms whose per-mode
factors lie in the corresponding mode spaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor_ops import mode_product, outer, unfold

_JACOBI_EPS = 1e-13
_MAX_SWEEPS = 60
#: Singular values below RELATIVE_NULL_TOL * sigma_1 are treated as zero.
RELATIVE_NULL_TOL = 1e-12


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD with strictly positive singular values, nonincreasing."""

    singular_values: np.ndarray
    left_vectors: np.ndarray   # columns u_i
    right_vectors: np.ndarray  # columns v_i

    @property
    def rank(self) -> int:
        return int(self.singular_values.size)

    def reconstruct(self) -> np.ndarray:
        u, s, v = self.left_vectors, self.singular_values, self.right_vectors
        return (u * s) @ v.T

    def truncated(self, k: int) -> "SvdResult":
        k = min(k, self.rank)
        return SvdResult(
            self.singular_values[:k],
            self.left_vectors[:, :k],
            self.right_vectors[:, :k],
        )


@dataclass
class WeakDecomposition:
    """Sum of K rank-one terms; each term is a list of d factor vectors."""

    factors: list = field(default_factory=list)

    @property
    def term_count(self) -> int:
        return len(self.factors)

    @property
    def order(self) -> int:
        return len(self.factors[0]) if self.factors else 0

    def reconstruct(self, dims) -> np.ndarray:
        out = np.zeros(tuple(int(n) for n in dims))
        for term in self.factors:
            out += outer(term)
        return out


def svd(a) -> SvdResult:
    """One-sided Jacobi SVD of a dense matrix.

    Returns only the strictly positive part of the spectrum (rank r
    factors); exact zeros and values below ``RELATIVE_NULL_TOL * sigma_1``
    are dropped.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    if not np.all(np.isfinite(a)):
        raise ValueError("svd requires finite entries")
    m, n = a.shape
    transposed = n > m
    b = np.array(a.T if transposed else a, order="F")
    rows, cols = b.shape
    v = np.eye(cols)

    for _ in range(_MAX_SWEEPS):
        rotated = False
        for p in range(cols - 1):
            for q in range(p + 1, cols):
                bp = b[:, p]
                bq = b[:, q]
                alpha = bp @ bp
                beta = bq @ bq
                gamma = bp @ bq
                if alpha == 0.0 or beta == 0.0:
                    continue
                if abs(gamma) <= _JACOBI_EPS * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if abs(zeta) > 1e150:
                    # 1 + zeta^2 would overflow; the rotation angle is
                    # ~1/(2 zeta) in this regime.
                    t = 0.5 / zeta
                else:
                    t = math.copysign(1.0, zeta) / (
                        abs(zeta) + math.sqrt(1.0 + zeta * zeta)
                    )
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                b[:, p], b[:, q] = c * bp - s * bq, s * bp + c * bq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break

    norms = np.linalg.norm(b, axis=0)
    order = np.argsort(-norms, kind="stable")
    norms = norms[order]
    cutoff = norms[0] * RELATIVE_NULL_TOL if norms.size and norms[0] > 0 else 0.0
    keep = norms > max(cutoff, 0.0)
    norms = norms[keep]
    idx = order[keep]
    u = b[:, idx] / norms
    w = v[:, idx]
    if transposed:
        u, w = w, u
    return SvdResult(norms.copy(), u, w)


def best_rank_k(a, k: int) -> np.ndarray:
    """Best rank-k approximation in Frobenius and spectral norm."""
    if k < 1:
        raise ValueError("k must be >= 1")
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    res = svd(a)
    if k >= res.rank:
        return a.copy()
    t = res.truncated(k)
    return t.reconstruct()


def numerical_rank(a, threshold: float) -> int:
    """Count of singular values strictly greater than `threshold`."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return int(np.count_nonzero(svd(a).singular_values > threshold))


def rank_decompose_matrix(y) -> WeakDecomposition:
    """Rank decomposition of a matrix into K = rank(y) rank-one terms with
    the sqrt(sigma) scale split evenly between the two factors."""
    res = svd(y)
    roots = np.sqrt(res.singular_values)
    factors = [
        [res.left_vectors[:, i] * roots[i], res.right_vectors[:, i] * roots[i]]
        for i in range(res.rank)
    ]
    return WeakDecomposition(factors)


def weak_tucker_decompose(y, rank_tol: float = 0.0, max_rank: int | None = None) -> WeakDecomposition:
    """Decompose a tensor of order d >= 2 into rank-one terms by
    successive unfold-and-SVD.

    Singular values <= max(rank_tol, 1e-10 * sigma_1) are dropped at each
    level; `max_rank` additionally caps the number of terms kept per
    level. Each factor in mode j lies in the column space of the mode-j
    unfolding of `y`.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim < 2:
        raise ValueError("weak_tucker_decompose requires order >= 2")
    return WeakDecomposition(_split(y, rank_tol, max_rank))


def _split(t: np.ndarray, rank_tol: float, max_rank: int | None) -> list:
    res = svd(unfold(t, 0))
    if res.rank == 0:
        return []
    cutoff = max(rank_tol, 1e-10 * res.singular_values[0])
    keep = int(np.count_nonzero(res.singular_values > cutoff))
    if max_rank is not None:
        keep = min(keep, max_rank)
    terms = []
    rest_dims = t.shape[1:]
    for i in range(keep):
        root = math.sqrt(res.singular_values[i])
        head = res.left_vectors[:, i] * root
        tail = res.right_vectors[:, i] * root
        if len(rest_dims) == 1:
            terms.append([head, tail])
        else:
            sub = np.reshape(tail, rest_dims, order="F")
            for subterm in _split(sub, rank_tol, max_rank):
                terms.append([head] + subterm)
    return terms


def core_tucker_coefficients(x, bases, rel_tol: float = 1e-8) -> np.ndarray:
    """Coefficients of `x` in the product basis given by per-mode basis
    matrices; raises if the bases do not span the mode spaces of `x`."""
    x = np.asarray(x, dtype=np.float64)
    if len(bases) != x.ndim:
        raise ValueError("one basis matrix per mode is required")
    coeff = x
    mats = []
    for j, basis in enumerate(bases):
        basis = np.atleast_2d(np.asarray(basis, dtype=np.float64))
        if basis.shape[0] != x.shape[j]:
            raise ValueError(f"basis for mode {j} has {basis.shape[0]} rows, expected {x.shape[j]}")
        mats.append(basis)
        coeff = mode_product(coeff, _pinv(basis), j)
    recon = coeff
    for j, basis in enumerate(mats):
        recon = mode_product(recon, basis, j)
    scale = np.linalg.norm(x)
    if np.linalg.norm(recon - x) > rel_tol * max(scale, 1.0):
        raise ValueError("bases do not span the mode spaces of the input")
    return coeff


def _pinv(a: np.ndarray) -> np.ndarray:
    res = svd(a)
    if res.rank == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    return (res.right_vectors / res.singular_values) @ res.left_vectors.T
