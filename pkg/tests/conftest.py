"""Shared helpers for the test suite."""

import numpy as np
import pytest

from tensorcs.sensing import check_nsp_exhaustive, stream, box_muller


def plant_sparse(dims, k, rng, offset=2.0):
    """Return a k-sparse tensor with well-separated nonzero magnitudes.

    Entries are drawn away from zero (|value| >= offset - 3 sigma in
    practice) so that support detection in the tests is unambiguous.
    """
    dims = tuple(int(n) for n in dims)
    total = int(np.prod(dims))
    x = np.zeros(total)
    support = rng.choice(total, size=k, replace=False)
    signs = rng.choice([-1.0, 1.0], size=k)
    x[support] = signs * (offset + rng.random(k))
    return x.reshape(dims)


import functools


@functools.lru_cache(maxsize=None)
def _nsp_gaussian_cached(m, n, k, seed, max_tries):
    for attempt in range(max_tries):
        gen = stream(seed + attempt, 0)
        a = box_muller(gen, (m, n)) / np.sqrt(m)
        if check_nsp_exhaustive(a, k):
            return a, seed + attempt
    raise RuntimeError(f"no NSP matrix found near seed {seed}")


def nsp_gaussian(m, n, k, seed, max_tries=80):
    """Draw gaussian matrices until one passes the exhaustive NSP check.

    Returns (matrix, seed_used). Raises if no matrix within `max_tries`
    consecutive seeds satisfies the property. Order-2 NSP needs headroom
    in the aspect ratio (around m >= 9 for n = 12), so callers pick (m, k)
    pairs where the property occurs at a workable rate.
    """
    a, used = _nsp_gaussian_cached(m, n, k, seed, max_tries)
    return a.copy(), used


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
