"""Command-line entry point.

Exit codes: 0 ok, 2 usage or IO error, 3 contract mismatch between inputs,
4 numerical failure. Every subcommand accepts --seed and prints the
resolved seed so runs can be reproduced exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import pipeline, recovery, sensing, tensorio
from .l1solver import InfeasibleProblem, SolverFailure
from .recovery import MemoryBudgetExceeded, RecoveryProblem

EXIT_OK = 0
EXIT_IO = 2
EXIT_CONTRACT = 3
EXIT_NUMERICAL = 4


def _ints(text: str):
    return tuple(int(tok) for tok in text.split(","))


def _load_signal_file(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return tensorio.read_pgm(path)
    return tensorio.read_dtf1(path)


def cmd_sparsify(args) -> int:
    signal = _load_signal_file(Path(args.infile))
    keep = _ints(args.keep)
    target = pipeline.dct_sparsify(signal, keep)
    tensorio.write_dtf1(args.out, target)
    print(f"k = {math.prod(keep)}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    plan = sensing.plan_measurements(_ints(args.dims), args.k, args.c)
    print(f"dims: {','.join(str(n) for n in plan.dims)}  k={plan.k}  c={plan.c:g}")
    for i, (m, clamped) in enumerate(zip(plan.per_mode_m, plan.clamped)):
        suffix = "  (clamped to N)" if clamped else ""
        print(f"  mode {i + 1}: m = {m}{suffix}")
    print(f"total mode-wise measurements: {plan.total_m_gtcs}")
    print(f"total kronecker measurements: {plan.total_m_kcs}")
    better = "kronecker" if plan.gtcs_ratio_worse else "mode-wise"
    print(f"better compression ratio: {better}")
    return EXIT_OK


def cmd_sense(args) -> int:
    signal = tensorio.read_dtf1(args.signal)
    dims = signal.shape
    if args.m:
        per_mode = _ints(args.m)
    elif args.normalized_m is not None:
        per_mode = pipeline.per_mode_measurements(args.normalized_m, dims)
    else:
        print("sense: one of --m / --normalized-m is required", file=sys.stderr)
        return EXIT_IO
    ens = sensing.generate_ensemble(dims, per_mode, args.distribution, args.seed)
    y = sensing.sample(signal, ens)
    eps = 0.0
    if args.noise_std > 0:
        y, eps = sensing.add_noise(y, args.noise_std, args.seed)
    sensing.save_ensemble(args.ensemble_out, ens)
    tensorio.write_dtf1(args.out, y)
    print(f"m = {','.join(str(m) for m in per_mode)}")
    print(f"epsilon = {eps:.9e}")
    print(f"wrote {args.out} and {args.ensemble_out}/")
    return EXIT_OK


def cmd_recover(args) -> int:
    y = tensorio.read_dtf1(args.obs)
    ens = sensing.load_ensemble(args.ensemble)
    try:
        problem = RecoveryProblem(
            observation=y,
            ensemble=ens,
            k=args.k,
            epsilon=args.epsilon,
            delta_2k=args.delta,
            relax_stages=args.relax,
            memory_budget_bytes=args.memory_budget,
        )
        report = recovery.recover(problem, args.method)
    except (ValueError, MemoryBudgetExceeded) as exc:
        print(f"recover: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (SolverFailure, InfeasibleProblem) as exc:
        print(f"recover: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    tensorio.write_dtf1(args.out, report.x_hat)
    if args.report:
        Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"method = {args.method}")
    if report.error_bound is not None:
        print(f"error bound = {report.error_bound:.9e}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = pipeline.ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    print(f"seed: {cfg.seed}")
    rows = pipeline.run_sweep(cfg)
    pipeline.write_csv(rows, args.out_csv, timing=not args.no_timing)
    if args.summary:
        Path(args.summary).write_text(pipeline.summary_to_csv(pipeline.summarize(rows)))
    print(f"rows = {len(rows)}")
    print(f"wrote {args.out_csv}")
    return EXIT_OK


def _verify_nsp(seed: int) -> list:
    failures = []
    for i in range(5):
        ens = sensing.generate_ensemble((8,), (6,), "gaussian", seed + i)
        a = ens.matrices[0]
        if not sensing.check_nsp_exhaustive(a, 1):
            failures.append(f"nsp: gaussian 6x8 fixture {i} unexpectedly fails order-1 check")
        bad = a.copy()
        bad[:, 0] = 0.0
        if sensing.check_nsp_exhaustive(bad, 1):
            failures.append(f"nsp: zero-column fixture {i} not rejected")
    return failures


def _verify_agreement(seed: int) -> list:
    from .sensing import generate_ensemble, sample, stream, box_muller

    failures = []
    gen = stream(seed, 99)
    for d, dims, m, k in ((2, (12, 12), 8, 3), (3, (8, 8, 8), 6, 2)):
        x = np.zeros(dims)
        flat = gen.choice(math.prod(dims), size=k, replace=False)
        x.ravel()[flat] = box_muller(gen, (k,)) + 3.0
        ens = generate_ensemble(dims, (m,) * d, "gaussian", seed + d)
        y = sample(x, ens)
        problem = RecoveryProblem(observation=y, ensemble=ens, k=k)
        serial = recovery.gtcs_s(problem).x_hat
        parallel = recovery.gtcs_p(problem).x_hat
        kron = recovery.kcs_recover(problem).x_hat
        scale = max(np.linalg.norm(x.ravel()), 1.0)
        for name, xh in (("gtcs_s", serial), ("gtcs_p", parallel), ("kcs", kron)):
            err = np.linalg.norm((xh - x).ravel()) / scale
            if err > 1e-5:
                failures.append(f"agreement: {name} d={d} error {err:.2e} > 1e-5")
    return failures


def _verify_rank(seed: int) -> list:
    from .sensing import generate_ensemble, stream, box_muller

    failures = []
    gen = stream(seed, 17)
    ens = generate_ensemble((12, 12), (8, 8), "gaussian", seed)
    for i in range(20):
        x = np.zeros((12, 12))
        flat = gen.choice(144, size=3, replace=False)
        x.ravel()[flat] = box_muller(gen, (3,)) + 2.0
        if not recovery.verify_rank_preservation(x, ens):
            failures.append(f"rank: instance {i} not preserved")
    return failures


def cmd_verify(args) -> int:
    suites = {
        "nsp": _verify_nsp,
        "agreement": _verify_agreement,
        "rank": _verify_rank,
    }
    names = list(suites) if args.suite == "all" else [args.suite]
    failures = []
    for name in names:
        failures.extend(suites[name](args.seed))
        print(f"suite {name}: {'ok' if not failures else 'failing'}")
    for msg in failures:
        print(msg, file=sys.stderr)
    return EXIT_OK if not failures else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorcs",
        description="Mode-wise compressed sensing of sparse matrices and tensors",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sparsify", help="DCT-sparsify a signal into a target tensor")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--keep", required=True, help="per-mode kept box, e.g. 16,16")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("plan", help="measurement-count planning")
    p.add_argument("--dims", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sense", help="generate an ensemble and sample a signal")
    p.add_argument("--signal", required=True)
    p.add_argument("--m", help="per-mode measurement counts, e.g. 8,8,8")
    p.add_argument("--normalized-m", type=float, dest="normalized_m")
    p.add_argument("--distribution", choices=sensing.DISTRIBUTIONS, default="gaussian")
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--ensemble-out", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sense)

    p = sub.add_parser("recover", help="recover a signal from an observation")
    p.add_argument("--obs", required=True)
    p.add_argument("--ensemble", required=True)
    p.add_argument("--method", choices=recovery.METHODS, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--relax", action="store_true")
    p.add_argument("--memory-budget", type=int, default=1 << 29)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("sweep", help="run a configured experiment sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--summary")
    p.add_argument("--no-timing", action="store_true",
                   help="write zero timings for byte-reproducible CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", choices=("nsp", "agreement", "rank", "all"), default="all")
    p.set_defaults(func=cmd_verify)

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None and args.command != "sweep":
        args.seed = 0
    if args.command != "sweep":
        print(f"seed: {args.seed}")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, json.JSONDecodeError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except MemoryBudgetExceeded as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except (SolverFailure, InfeasibleProblem) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
