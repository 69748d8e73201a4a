"""Dense tensor primitives: mode products, unfolding/folding, Kronecker and
outer products, and the norms used throughout the package.

Tensors are plain ``numpy.ndarray`` objects with float64 entries. The
linearization rule everywhere (including the DTF1 file format) is
column-major: the first mode index varies fastest. Mode indices are
0-based.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

#: Default absolute tolerance for deciding that an entry is zero.
ZERO_TOL = 1e-9


def _as_tensor(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim < 1:
        a = a.reshape(1)
    return a


def _check_mode(x: np.ndarray, mode: int) -> None:
    if not 0 <= mode < x.ndim:
        raise ValueError(f"mode {mode} out of range for order-{x.ndim} tensor")


def mode_product(x, u, mode: int) -> np.ndarray:
    """Contract mode `mode` of tensor `x` with the rows of matrix `u`.

    The result has the shape of `x` with ``shape[mode]`` replaced by
    ``u.shape[0]``; entry-wise it is the sum over the contracted index of
    ``x[..., a, ...] * u[j, a]``.
    """
    x = _as_tensor(x)
    u = np.asarray(u, dtype=np.float64)
    _check_mode(x, mode)
    if u.ndim != 2:
        raise ValueError("u must be a matrix")
    if u.shape[1] != x.shape[mode]:
        raise ValueError(
            f"cannot contract mode {mode} of size {x.shape[mode]} "
            f"with a matrix of {u.shape[1]} columns"
        )
    out = np.tensordot(u, x, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def unfold(x, mode: int) -> np.ndarray:
    """Matricize `x` along `mode`.

    Returns the ``N_mode x prod(other dims)`` matrix whose columns are the
    mode fibers. Columns are ordered with the lowest-numbered remaining
    mode varying fastest, which makes the identity

        unfold(mode_product-chain(x), i)
            == U_i @ unfold(x, i) @ kron(U_d, ..., skipping U_i, ..., U_1).T

    hold verbatim (see `kronecker`).
    """
    x = _as_tensor(x)
    _check_mode(x, mode)
    return np.reshape(np.moveaxis(x, mode, 0), (x.shape[mode], -1), order="F")


def fold(m, mode: int, dims) -> np.ndarray:
    """Inverse of `unfold`: rebuild a tensor of shape `dims` from its
    mode-`mode` unfolding."""
    m = np.asarray(m, dtype=np.float64)
    dims = tuple(int(n) for n in dims)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for dims {dims}")
    rest = dims[:mode] + dims[mode + 1 :]
    expected = (dims[mode], math.prod(rest) if rest else 1)
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match unfolding shape {expected}")
    t = np.reshape(m, (dims[mode],) + rest, order="F")
    return np.moveaxis(t, 0, mode)


def kronecker(a, b) -> np.ndarray:
    """Kronecker product of two matrices (block matrix ``a[i,j] * b``)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    return np.kron(a, b)


def kron_chain(matrices) -> np.ndarray:
    """Kronecker product of a sequence of matrices, left to right."""
    mats = [np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in matrices]
    if not mats:
        raise ValueError("empty matrix list")
    return reduce(np.kron, mats)


def outer(vectors) -> np.ndarray:
    """Outer (tensor) product of ``d >= 1`` vectors; the result is the
    rank-one tensor whose entries are products of vector entries."""
    vecs = [np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]
    if not vecs:
        raise ValueError("outer product of an empty vector list")
    return reduce(np.multiply.outer, vecs)


def frobenius_norm(x) -> float:
    return float(np.linalg.norm(_as_tensor(x).ravel()))


def l1_norm(v) -> float:
    return float(np.sum(np.abs(np.asarray(v, dtype=np.float64))))


def l2_norm(v) -> float:
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64).ravel()))


def count_nonzeros(x, tol: float = ZERO_TOL) -> int:
    """Number of entries with absolute value above `tol`."""
    return int(np.count_nonzero(np.abs(_as_tensor(x)) > tol))
