"""Measurement ensembles, the mode-wise sampling operator, noise
injection, measurement planning, and a small-scale exhaustive null space
property check.

Randomness: every random quantity is drawn from a PCG64 stream derived
from a 64-bit seed via ``SeedSequence(seed, spawn_key=(index,))``. Mode
matrix i uses stream index i; noise uses the dedicated stream index
``NOISE_STREAM``. Gaussian variates are produced by the Box-Muller
transform on the generator's uniforms, so regeneration from the same seed
is bit-exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .tensor_ops import mode_product
from . import tensorio

NOISE_STREAM = 1 << 31

DISTRIBUTIONS = ("gaussian", "bernoulli")


def stream(seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def box_muller(gen: np.random.Generator, shape) -> np.ndarray:
    """Standard normal variates from uniform draws via Box-Muller."""
    n = int(np.prod(shape))
    half = (n + 1) // 2
    u1 = np.maximum(gen.random(half), np.finfo(np.float64).tiny)
    u2 = gen.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    g = np.concatenate([r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)])
    return g[:n].reshape(shape)


@dataclass(frozen=True)
class MeasurementEnsemble:
    """Per-mode measurement matrices U_i of shape (m_i, N_i)."""

    matrices: tuple
    distribution: str
    seed: int

    @property
    def signal_dims(self) -> tuple:
        return tuple(u.shape[1] for u in self.matrices)

    @property
    def measurement_dims(self) -> tuple:
        return tuple(u.shape[0] for u in self.matrices)

    @property
    def order(self) -> int:
        return len(self.matrices)


@dataclass(frozen=True)
class MeasurementPlan:
    k: int
    c: float
    dims: tuple
    per_mode_m: tuple
    clamped: tuple          # True where the per-mode bound exceeded N_i
    total_m_gtcs: int
    total_m_kcs: int
    gtcs_ratio_worse: bool  # mode-wise sampling needs more measurements


def generate_ensemble(dims, per_mode_m, distribution: str = "gaussian", seed: int = 0) -> MeasurementEnsemble:
    """Draw one m_i x N_i matrix per mode.

    Gaussian entries are i.i.d. N(0, 1/m_i); Bernoulli entries are
    +-1/sqrt(m_i) equiprobable. Deterministic per (seed, mode index).
    """
    dims = tuple(int(n) for n in dims)
    per_mode_m = tuple(int(m) for m in per_mode_m)
    if len(dims) != len(per_mode_m):
        raise ValueError("dims and per_mode_m must have equal length")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}")
    matrices = []
    for i, (m, n) in enumerate(zip(per_mode_m, dims)):
        if not 1 <= m <= n:
            raise ValueError(f"mode {i}: m={m} out of range [1, {n}]")
        gen = stream(seed, i)
        scale = 1.0 / math.sqrt(m)
        if distribution == "gaussian":
            u = box_muller(gen, (m, n)) * scale
        else:
            u = np.where(gen.random((m, n)) < 0.5, -scale, scale)
        u.setflags(write=False)
        matrices.append(u)
    return MeasurementEnsemble(tuple(matrices), distribution, int(seed))


def sample(x, ensemble: MeasurementEnsemble) -> np.ndarray:
    """Apply the mode-wise sampling operator: chain of mode products with
    every U_i."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != ensemble.signal_dims:
        raise ValueError(f"signal dims {x.shape} do not match ensemble {ensemble.signal_dims}")
    y = x
    for i, u in enumerate(ensemble.matrices):
        y = mode_product(y, u, i)
    return y


def add_noise(y, std: float, seed: int = 0):
    """Add i.i.d. zero-mean Gaussian noise of standard deviation `std`.

    Returns ``(noisy, epsilon)`` where epsilon is the Frobenius norm of
    the injected noise, the bound the noisy recovery stage receives.
    """
    y = np.asarray(y, dtype=np.float64)
    if std < 0:
        raise ValueError("std must be nonnegative")
    if std == 0:
        return y.copy(), 0.0
    noise = box_muller(stream(seed, NOISE_STREAM), y.shape) * std
    return y + noise, float(np.linalg.norm(noise.ravel()))


def plan_measurements(dims, k: int, c: float = 1.0) -> MeasurementPlan:
    """Per-mode and total measurement counts for the mode-wise scheme,
    with the vectorized Kronecker total for comparison."""
    dims = tuple(int(n) for n in dims)
    if k < 1:
        raise ValueError("k must be >= 1")
    if c <= 0:
        raise ValueError("c must be positive")
    per_mode = []
    clamped = []
    for n in dims:
        if n <= k:
            raise ValueError(f"planning undefined for mode of size {n} <= k={k}")
        m = math.ceil(2.0 * c * k * math.log(n / k))
        clamped.append(m > n)
        per_mode.append(min(max(m, 1), n))
    total_gtcs = math.prod(per_mode)
    total_kcs = math.ceil(2.0 * c * k * (-math.log(k) + sum(math.log(n) for n in dims)))
    return MeasurementPlan(
        k=int(k),
        c=float(c),
        dims=dims,
        per_mode_m=tuple(per_mode),
        clamped=tuple(clamped),
        total_m_gtcs=int(total_gtcs),
        total_m_kcs=int(total_kcs),
        gtcs_ratio_worse=total_gtcs > total_kcs,
    )


def check_nsp_exhaustive(a, k: int, max_cols: int = 14) -> bool:
    """Exhaustively decide the null space property of order k.

    Enumerates the extreme points of the unit l1 ball intersected with the
    null space of `a` -- the normalized minimal-support (elementary) null
    vectors, whose supports have at most rank(a)+1 entries -- and checks
    that the k largest magnitudes never reach half of the l1 mass. Desk
    scale only: refuses matrices with more than `max_cols` columns.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    m, n = a.shape
    if n > max_cols:
        raise ValueError(f"exhaustive NSP check limited to {max_cols} columns (got {n})")
    if not 1 <= k < n:
        raise ValueError("k must satisfy 1 <= k < column count")
    r = int(np.linalg.matrix_rank(a))
    if r == n:
        return True  # trivial null space
    for size in range(1, min(n, r + 1) + 1):
        for support in combinations(range(n), size):
            sub = a[:, support]
            _, s, vt = np.linalg.svd(sub)
            rank = int(np.count_nonzero(s > (s[0] if s.size else 0.0) * 1e-12))
            if size - rank != 1:
                continue
            w = vt[-1]
            if np.any(np.abs(w) <= 1e-12 * np.max(np.abs(w))):
                continue  # not minimal support; covered at a smaller size
            w = np.abs(w) / np.sum(np.abs(w))
            top = np.sort(w)[::-1][:k].sum()
            if top >= 0.5 - 1e-10:
                return False
    return True


def save_ensemble(directory, ensemble: MeasurementEnsemble) -> None:
    """Write each U_i as a DTF1 matrix plus a JSON metadata sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, u in enumerate(ensemble.matrices):
        tensorio.write_dtf1(directory / f"U{i + 1}.dtf1", u)
    meta = {
        "distribution": ensemble.distribution,
        "seed": ensemble.seed,
        "dims": list(ensemble.signal_dims),
        "m": list(ensemble.measurement_dims),
    }
    (directory / "ensemble.json").write_text(json.dumps(meta, indent=2) + "\n")


def load_ensemble(directory) -> MeasurementEnsemble:
    directory = Path(directory)
    meta = json.loads((directory / "ensemble.json").read_text())
    matrices = []
    for i in range(len(meta["dims"])):
        u = tensorio.read_dtf1(directory / f"U{i + 1}.dtf1")
        u.setflags(write=False)
        matrices.append(u)
    ens = MeasurementEnsemble(tuple(matrices), meta["distribution"], int(meta["seed"]))
    if list(ens.measurement_dims) != meta["m"] or list(ens.signal_dims) != meta["dims"]:
        raise ValueError(f"{directory}: metadata does not match stored matrices")
    return ens
