"""DCT sparsification, PSNR, and the sweep harness.

The sparsifying transform is the separable orthonormal DCT-II applied per
mode. Sparsity is imposed and recovery performed in the transform domain;
PSNR is measured in the signal domain after the inverse transform.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import recovery, sensing, tensorio
from .l1solver import SolverFailure
from .recovery import MemoryBudgetExceeded, RecoveryProblem
from .tensor_ops import mode_product

PSNR_CAP_DB = 300.0
SIGNAL_STREAM = (1 << 31) + 1

CSV_HEADER = "method,normalized_m,noise_std,trial,seed,psnr_db,rel_fro_error,recovery_seconds,status"


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (an isometry; inverse is the transpose)."""
    j = np.arange(n)
    c = np.cos(np.pi * np.outer(j, 2 * j + 1) / (2.0 * n))
    c[0] *= math.sqrt(1.0 / n)
    c[1:] *= math.sqrt(2.0 / n)
    return c


def dct_coefficients(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    for mode in range(x.ndim):
        x = mode_product(x, dct_matrix(x.shape[mode]), mode)
    return x


def inverse_dct(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    for mode in range(c.ndim):
        c = mode_product(c, dct_matrix(c.shape[mode]).T, mode)
    return c


def dct_sparsify(x, keep) -> np.ndarray:
    """Zero every transform coefficient outside the low-frequency box
    `keep` and return the inverse transform (the "target" signal)."""
    x = np.asarray(x, dtype=np.float64)
    keep = tuple(int(b) for b in keep)
    if len(keep) != x.ndim:
        raise ValueError("keep box must have one extent per mode")
    for b, n in zip(keep, x.shape):
        if not 1 <= b <= n:
            raise ValueError(f"keep extent {b} out of range [1, {n}]")
    coeffs = dct_coefficients(x)
    mask = np.zeros(x.shape, dtype=bool)
    mask[tuple(slice(0, b) for b in keep)] = True
    coeffs[~mask] = 0.0
    return inverse_dct(coeffs)


def sparse_coefficients(x, keep) -> np.ndarray:
    """The boxed transform coefficients themselves (the k-sparse signal
    the recovery stage sees)."""
    x = np.asarray(x, dtype=np.float64)
    coeffs = dct_coefficients(x)
    mask = np.zeros(x.shape, dtype=bool)
    mask[tuple(slice(0, int(b)) for b in keep)] = True
    coeffs[~mask] = 0.0
    return coeffs


def psnr(reference, candidate, peak: float | None = None) -> float:
    """10 log10(peak^2 / MSE), capped at 300 dB for exact agreement."""
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValueError("dimension mismatch")
    if peak is None:
        peak = float(np.max(np.abs(ref)))
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((ref - cand) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(peak * peak / mse), PSNR_CAP_DB)


@dataclass
class ExperimentConfig:
    dims: tuple
    dct_keep: tuple
    normalized_measurement_grid: tuple
    methods: tuple
    signal_source: str = "synthetic"   # synthetic | file
    signal_path: str | None = None
    noise_std_grid: tuple = (0.0,)
    trials: int = 1
    seed: int = 0
    c: float = 1.0
    delta_2k: float | None = None
    distribution: str = "gaussian"
    memory_budget_bytes: int = 1 << 29
    solver_tol: float = 1e-7
    solver_max_iter: int = 50_000

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.dct_keep = tuple(int(b) for b in self.dct_keep)
        self.normalized_measurement_grid = tuple(float(g) for g in self.normalized_measurement_grid)
        self.noise_std_grid = tuple(float(g) for g in self.noise_std_grid)
        self.methods = tuple(self.methods)
        if not self.normalized_measurement_grid or not self.noise_std_grid:
            raise ValueError("grids must be nonempty")
        if any(not 0.0 < g <= 1.0 for g in self.normalized_measurement_grid):
            raise ValueError("normalized measurements must lie in (0, 1]")
        if not self.methods:
            raise ValueError("method list must be nonempty")
        for m in self.methods:
            if m not in recovery.METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.signal_source not in ("synthetic", "file"):
            raise ValueError(f"unknown signal source {self.signal_source!r}")
        if self.signal_source == "file" and not self.signal_path:
            raise ValueError("signal_source 'file' requires signal_path")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        return cls(**raw)


@dataclass
class MetricRow:
    method: str
    normalized_m: float
    noise_std: float
    trial: int
    seed: int
    psnr_db: float
    rel_fro_error: float
    recovery_seconds: float
    status: str  # ok | failed | refused_memory

    def sort_key(self):
        return (self.method, self.normalized_m, self.noise_std, self.trial)


def per_mode_measurements(normalized_m: float, dims) -> tuple:
    """Equal per-mode measurement count from a normalized total:
    m = round((nm * prod(N))**(1/d)), clamped to [1, N_i]."""
    dims = tuple(int(n) for n in dims)
    d = len(dims)
    m = round((normalized_m * math.prod(dims)) ** (1.0 / d))
    return tuple(min(max(int(m), 1), n) for n in dims)


def load_signal(cfg: ExperimentConfig):
    """Returns (signal tensor, psnr peak)."""
    if cfg.signal_source == "file":
        path = Path(cfg.signal_path)
        if path.suffix.lower() == ".pgm":
            sig = tensorio.read_pgm(path)
            peak = 255.0
        else:
            sig = tensorio.read_dtf1(path)
            peak = None
        if sig.shape != cfg.dims:
            raise ValueError(f"signal dims {sig.shape} do not match config dims {cfg.dims}")
        return sig, peak
    gen = sensing.stream(cfg.seed, SIGNAL_STREAM)
    return sensing.box_muller(gen, cfg.dims), None


def _trial_seed(base_seed: int, trial: int) -> int:
    return (base_seed + 1_000_003 * (trial + 1)) & (2**63 - 1)


def _run_cell(cfg, coeffs, target, peak, nm, noise_std, trial):
    """One (grid point, noise level, trial): sense once, run every method."""
    dims = cfg.dims
    per_mode = per_mode_measurements(nm, dims)
    seed = _trial_seed(cfg.seed, trial)
    ens = sensing.generate_ensemble(dims, per_mode, cfg.distribution, seed)
    y = sensing.sample(coeffs, ens)
    eps = 0.0
    if noise_std > 0:
        y, eps = sensing.add_noise(y, noise_std, seed)
    rows = []
    for method in cfg.methods:
        problem = RecoveryProblem(
            observation=y,
            ensemble=ens,
            k=math.prod(cfg.dct_keep),
            epsilon=eps,
            delta_2k=cfg.delta_2k,
            tol_primal=cfg.solver_tol,
            tol_dual=cfg.solver_tol,
            max_iter=cfg.solver_max_iter,
            memory_budget_bytes=cfg.memory_budget_bytes,
        )
        t0 = time.perf_counter()
        status = "ok"
        psnr_db = math.nan
        rel = math.nan
        try:
            report = recovery.recover(problem, method)
            x_sig = inverse_dct(report.x_hat)
            psnr_db = psnr(target, x_sig, peak)
            scale = np.linalg.norm(target.ravel())
            rel = float(np.linalg.norm((x_sig - target).ravel()) / max(scale, 1e-300))
        except MemoryBudgetExceeded:
            status = "refused_memory"
        except SolverFailure:
            status = "failed"
        rows.append(
            MetricRow(
                method=method,
                normalized_m=nm,
                noise_std=noise_std,
                trial=trial,
                seed=seed,
                psnr_db=psnr_db,
                rel_fro_error=rel,
                recovery_seconds=time.perf_counter() - t0,
                status=status,
            )
        )
    return rows


def run_sweep(cfg: ExperimentConfig, signal=None):
    """Run the full (grid x noise x trial x method) sweep; rows come back
    in deterministic sorted order regardless of execution schedule."""
    if signal is None:
        signal, peak = load_signal(cfg)
    else:
        signal = np.asarray(signal, dtype=np.float64)
        peak = None
    target = dct_sparsify(signal, cfg.dct_keep)
    coeffs = sparse_coefficients(signal, cfg.dct_keep)
    if peak is None:
        peak = float(np.max(np.abs(target)))

    cells = [
        (nm, std, trial)
        for nm in cfg.normalized_measurement_grid
        for std in cfg.noise_std_grid
        for trial in range(cfg.trials)
    ]
    workers = max(1, int(os.environ.get("TENSORCS_THREADS", "1")))
    rows = []
    if workers == 1:
        for nm, std, trial in cells:
            rows.extend(_run_cell(cfg, coeffs, target, peak, nm, std, trial))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_cell, cfg, coeffs, target, peak, nm, std, trial)
                for nm, std, trial in cells
            ]
            for fut in futures:
                rows.extend(fut.result())
    rows.sort(key=MetricRow.sort_key)
    return rows


def rows_to_csv(rows, timing: bool = True) -> str:
    """Fixed-schema CSV. With timing=False the seconds column is written
    as 0, making the artifact byte-reproducible across reruns."""
    lines = [CSV_HEADER]
    for r in rows:
        secs = r.recovery_seconds if timing else 0.0
        lines.append(
            f"{r.method},{r.normalized_m:.6g},{r.noise_std:.6g},{r.trial},{r.seed},"
            f"{r.psnr_db:.6f},{r.rel_fro_error:.9e},{secs:.6f},{r.status}"
        )
    return "\n".join(lines) + "\n"


def write_csv(rows, path, timing: bool = True) -> None:
    Path(path).write_text(rows_to_csv(rows, timing=timing))


def summarize(rows):
    """Per (method, grid point, noise level): mean/min/max PSNR over rows
    with a finite PSNR, plus mean recovery time."""
    if not rows:
        raise ValueError("no rows to summarize")
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.normalized_m, r.noise_std), []).append(r)
    summary = []
    for key in sorted(groups):
        bucket = groups[key]
        psnrs = [r.psnr_db for r in bucket if math.isfinite(r.psnr_db)]
        summary.append(
            {
                "method": key[0],
                "normalized_m": key[1],
                "noise_std": key[2],
                "rows": len(bucket),
                "mean_psnr_db": sum(psnrs) / len(psnrs) if psnrs else math.nan,
                "min_psnr_db": min(psnrs) if psnrs else math.nan,
                "max_psnr_db": max(psnrs) if psnrs else math.nan,
                "mean_seconds": sum(r.recovery_seconds for r in bucket) / len(bucket),
            }
        )
    return summary


def summary_to_csv(summary) -> str:
    lines = ["method,normalized_m,noise_std,rows,mean_psnr_db,min_psnr_db,max_psnr_db,mean_seconds"]
    for s in summary:
        lines.append(
            f"{s['method']},{s['normalized_m']:.6g},{s['noise_std']:.6g},{s['rows']},"
            f"{s['mean_psnr_db']:.6f},{s['min_psnr_db']:.6f},{s['max_psnr_db']:.6f},"
            f"{s['mean_seconds']:.6f}"
        )
    return "\n".join(lines) + "\n"
