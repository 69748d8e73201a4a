"""l1-minimization engines.

Both the equality-constrained problem (min ||z||_1 s.t. Az = y) and the
noise-constrained one (min ||z||_1 s.t. ||Az - y||_2 <= eps) are solved by
a primal-dual first-order scheme of Chambolle-Pock type with fixed step
sizes 0.95 / ||A||_2. Convergence is certified through the dual problem
(max -y'q - eps*||q||_2 over ||A'q||_inf <= 1): a candidate is accepted
only when it is feasible and its duality gap is below tolerance, so the
solver never silently returns a wrong answer. For the equality problem a
support-polishing step (least squares on the detected support, accepted
only when it passes the same certificate) accelerates exact recovery.

`solve_batch` runs many problems sharing the same matrix simultaneously;
column updates are independent, so this equals per-column solves and is
what the mode-wise recovery stages use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_ops import l1_norm

_CHECK_EVERY = 40


class SolverFailure(RuntimeError):
    """A solve terminated without a certified solution."""


class InfeasibleProblem(ValueError):
    """epsilon is smaller than the distance from y to the range of A."""


@dataclass
class L1Problem:
    a: np.ndarray
    y: np.ndarray
    epsilon: float = 0.0
    max_iter: int = 50_000
    tol_primal: float = 1e-7
    tol_dual: float = 1e-7

    def __post_init__(self):
        self.a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.a.shape[0] != self.y.size:
            raise ValueError("A row count must match len(y)")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass
class L1Solution:
    z_hat: np.ndarray
    objective: float
    residual: float
    iterations: int
    converged: bool
    message: str = ""


def operator_norm(a, iters: int = 200, tol: float = 1e-10) -> float:
    """Spectral norm by power iteration on A'A with a deterministic start."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    n = a.shape[1]
    v = np.ones(n) / math.sqrt(n)
    v += np.arange(n) * (1e-3 / max(n, 1))  # break symmetry deterministically
    v /= np.linalg.norm(v)
    prev = 0.0
    for _ in range(iters):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        est = math.sqrt(norm)
        if abs(est - prev) <= tol * max(est, 1.0):
            return est
        prev = est
    return prev


@dataclass
class BatchResult:
    z: np.ndarray            # N x B solutions
    residuals: np.ndarray    # per-column ||Az - y||_2
    iterations: np.ndarray   # per-column iteration of first certification
    converged: np.ndarray    # per-column bool


def solve_batch(
    a,
    ys,
    epsilon: float = 0.0,
    max_iter: int = 50_000,
    tol_primal: float = 1e-7,
    tol_dual: float = 1e-7,
    polish: bool = True,
    feas_floor: float = 0.0,
) -> BatchResult:
    """Solve one l1 problem per column of `ys` against a shared matrix.

    Columns are normalized to unit l2 length internally so that the
    primal/dual tolerances act relative to each column's scale; solutions
    and residuals are reported in the original scale. `feas_floor` adds an
    absolute allowance to the equality-feasibility test, for callers whose
    right-hand sides carry that much upstream error.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    ys = np.asarray(ys, dtype=np.float64)
    single = ys.ndim == 1
    y_raw = ys.reshape(-1, 1) if single else ys
    m, n = a.shape
    if y_raw.shape[0] != m:
        raise ValueError("ys row count must match A")
    cols = y_raw.shape[1]

    raw_norms = np.linalg.norm(y_raw, axis=0)
    opnorm = operator_norm(a)
    if opnorm == 0.0:
        # A == 0: only y == 0 is solvable (by z = 0).
        ok = raw_norms <= max(epsilon, tol_primal)
        return BatchResult(
            np.zeros((n, cols)), raw_norms.copy(), np.zeros(cols, dtype=int), ok
        )
    step = 0.95 / opnorm

    scales = np.where(raw_norms > 0.0, raw_norms, 1.0)
    y = y_raw / scales
    # Per-column noise tolerance in the normalized problem.
    eps_col = epsilon / scales if epsilon > 0 else np.zeros(cols)

    z = np.zeros((n, cols))
    zbar = np.zeros((n, cols))
    q = np.zeros((m, cols))
    best = np.zeros((n, cols))
    done = np.zeros(cols, dtype=bool)
    res_out = raw_norms.copy()
    iters_out = np.full(cols, max_iter, dtype=int)

    # Columns already optimal at z = 0: zero data, or noise budget at
    # least as large as the observation.
    if epsilon > 0:
        trivially_zero = raw_norms <= epsilon
    else:
        trivially_zero = raw_norms == 0.0
    done |= trivially_zero
    iters_out[trivially_zero] = 0

    it = 0
    while it < max_iter and not done.all():
        it += 1
        # dual ascent
        q += step * (a @ zbar - y)
        if epsilon > 0:
            qn = np.linalg.norm(q, axis=0)
            shrink = np.maximum(0.0, 1.0 - step * eps_col / np.maximum(qn, 1e-300))
            q *= shrink
        # primal descent with soft threshold
        znew = z - step * (a.T @ q)
        znew = np.sign(znew) * np.maximum(np.abs(znew) - step, 0.0)
        zbar = 2.0 * znew - z
        z = znew

        if it % _CHECK_EVERY == 0 or it == max_iter:
            active = ~done
            if not active.any():
                break
            _certify(
                a, y, z, q, eps_col, tol_primal, tol_dual, polish,
                active, done, best, res_out, iters_out, it, scales,
                feas_floor,
            )

    still = ~done
    if still.any():
        best[:, still] = z[:, still] * scales[still]
        res_out[still] = np.linalg.norm(
            a @ z[:, still] - y[:, still], axis=0
        ) * scales[still]

    result = BatchResult(best, res_out, iters_out, done.copy())
    return result


def _dual_certificate(a, y, support, cand_signs, obj, tol_dual):
    """Try to certify optimality of a candidate support directly.

    Optimality of a basis-pursuit candidate z requires a dual vector q
    with A^T q = -sign(z) on the support and |A^T q| <= 1 elsewhere; then
    the duality gap is ||z||_1 + y @ q. A least-squares solve for q gives
    instant certification once the iterate has found the right support,
    long before the first-order dual variable converges.
    """
    q, *_ = np.linalg.lstsq(a[:, support].T, -cand_signs, rcond=None)
    atq = a.T @ q
    if np.max(np.abs(atq)) > 1.0 + 1e-9:
        return False
    gap = obj + y @ q
    return gap <= tol_dual * max(1.0, obj)


def _bpdn_support_optimum(a, y, support, eps):
    """Construct and verify the exact noise-constrained optimum on a support.

    At an optimum with an active residual constraint, the normal equations
    on the support read A_S^T (y - A_S z_S) = mu * sign(z_S) for some
    mu >= 0.  Starting from the least-squares fit z_ls and the direction
    g = (A_S^T A_S)^{-1} s, the candidate z_S = z_ls - mu * g has residual
    sqrt(||r0||^2 + mu^2 ||A_S g||^2), so mu is fixed by the noise radius.
    The candidate is a global optimum when its signs match s and the dual
    vector (y - A z) / mu is feasible (|A^T r| <= mu everywhere).  Returns
    the full-length solution, or None when the certificate fails.
    """
    a_s = a[:, support]
    z_ls, *_ = np.linalg.lstsq(a_s, y, rcond=None)
    r0 = y - a_s @ z_ls
    slack = eps * eps - float(r0 @ r0)
    if slack <= 0.0:
        return None
    s = np.sign(z_ls)
    if np.any(s == 0.0):
        return None
    g, *_ = np.linalg.lstsq(a_s.T @ a_s, s, rcond=None)
    w = a_s @ g
    wn = float(np.linalg.norm(w))
    if wn == 0.0:
        return None
    mu = np.sqrt(slack) / wn
    z_sup = z_ls - mu * g
    if np.any(np.sign(z_sup) != s):
        return None
    r = r0 + mu * w
    if np.max(np.abs(a.T @ r)) > mu * (1.0 + 1e-9):
        return None
    cand = np.zeros(a.shape[1])
    cand[support] = z_sup
    return cand


def _certify(a, y, z, q, eps_col, tol_primal, tol_dual, polish,
             active, done, best, res_out, iters_out, it, scales,
             feas_floor=0.0):
    """Check feasibility + duality gap for active columns; try support
    polishing with a direct dual certificate on the equality problem."""
    idx = np.flatnonzero(active)
    feas_tol = tol_primal + feas_floor / scales[idx]
    za = z[:, idx]
    ya = y[:, idx]
    qa = q[:, idx]
    noisy = bool(np.any(eps_col > 0))

    atq = a.T @ qa
    scale = np.maximum(1.0, np.max(np.abs(atq), axis=0))
    dual = -(np.sum(ya * qa, axis=0)) / scale
    if noisy:
        dual -= eps_col[idx] * np.linalg.norm(qa, axis=0) / scale

    res = np.linalg.norm(a @ za - ya, axis=0)
    obj = np.sum(np.abs(za), axis=0)
    if noisy:
        feas = res <= eps_col[idx] * (1.0 + 1e-6)
    else:
        feas = res <= feas_tol
    gap_ok = (obj - dual) <= tol_dual * np.maximum(1.0, obj)
    ok = feas & gap_ok

    for j_local in np.flatnonzero(ok):
        j = idx[j_local]
        best[:, j] = za[:, j_local] * scales[j]
        res_out[j] = res[j_local] * scales[j]
        iters_out[j] = it
        done[j] = True

    if polish and noisy:
        for j_local in np.flatnonzero(~ok):
            j = idx[j_local]
            eps_j = eps_col[idx][j_local]
            if eps_j <= 0.0:
                continue
            col = za[:, j_local]
            peak = np.max(np.abs(col))
            if peak == 0.0:
                continue
            for rel_cut in (1e-2, 1e-6):
                support = np.flatnonzero(np.abs(col) > rel_cut * peak)
                if support.size == 0 or support.size > a.shape[0]:
                    continue
                cand = _bpdn_support_optimum(
                    a, ya[:, j_local], support, eps_j
                )
                if cand is None:
                    continue
                best[:, j] = cand * scales[j]
                res_out[j] = np.linalg.norm(
                    a @ cand - ya[:, j_local]
                ) * scales[j]
                iters_out[j] = it
                done[j] = True
                break

    if polish and not noisy:
        for j_local in np.flatnonzero(~ok):
            j = idx[j_local]
            col = za[:, j_local]
            peak = np.max(np.abs(col))
            if peak == 0.0:
                continue
            for rel_cut in (1e-2, 1e-6):
                support = np.flatnonzero(np.abs(col) > rel_cut * peak)
                if support.size == 0 or support.size > a.shape[0]:
                    continue
                coef, *_ = np.linalg.lstsq(
                    a[:, support], ya[:, j_local], rcond=None
                )
                cand = np.zeros(a.shape[1])
                cand[support] = coef
                cand_res = np.linalg.norm(a @ cand - ya[:, j_local])
                if cand_res > feas_tol[j_local]:
                    continue
                cand_obj = np.sum(np.abs(cand))
                direct = _dual_certificate(
                    a, ya[:, j_local], support, np.sign(coef), cand_obj, tol_dual
                )
                iterate = (
                    cand_obj - dual[j_local] <= tol_dual * max(1.0, cand_obj)
                )
                if direct or iterate:
                    best[:, j] = cand * scales[j]
                    res_out[j] = cand_res * scales[j]
                    iters_out[j] = it
                    done[j] = True
                    break


def solve_bp(problem: L1Problem) -> L1Solution:
    """Equality-constrained basis pursuit (epsilon must be 0)."""
    if problem.epsilon != 0.0:
        raise ValueError("solve_bp requires epsilon == 0")
    return _solve_single(problem)


def solve_bpdn(problem: L1Problem) -> L1Solution:
    """Noise-constrained recovery (epsilon must be positive).

    Raises InfeasibleProblem when epsilon is smaller than the distance
    from y to the range of A.
    """
    if problem.epsilon <= 0.0:
        raise ValueError("solve_bpdn requires epsilon > 0")
    dist = _range_distance(problem.a, problem.y)
    if dist > problem.epsilon * (1.0 + 1e-9) + 1e-12:
        raise InfeasibleProblem(
            f"epsilon={problem.epsilon:g} below distance {dist:g} from y to range(A)"
        )
    return _solve_single(problem)


def _range_distance(a: np.ndarray, y: np.ndarray) -> float:
    sol, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(np.linalg.norm(a @ sol - y))


def _solve_single(problem: L1Problem) -> L1Solution:
    res = solve_batch(
        problem.a,
        problem.y,
        epsilon=problem.epsilon,
        max_iter=problem.max_iter,
        tol_primal=problem.tol_primal,
        tol_dual=problem.tol_dual,
    )
    z = res.z[:, 0]
    converged = bool(res.converged[0])
    msg = "" if converged else (
        f"no certificate after {problem.max_iter} iterations "
        f"(residual {res.residuals[0]:.3e})"
    )
    return L1Solution(
        z_hat=z,
        objective=l1_norm(z),
        residual=float(res.residuals[0]),
        iterations=int(res.iterations[0]),
        converged=converged,
        message=msg,
    )


def oracle_solve(a, y, k: int, feas_tol: float = 1e-9, budget: int = 1_000_000) -> np.ndarray:
    """Brute-force reference: enumerate every support of size <= k, least
    squares on each, return the feasible candidate of minimum l1 norm.
    Ties broken by lexicographically smallest support."""
    from itertools import combinations

    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = a.shape[1]
    if k < 0:
        raise ValueError("k must be nonnegative")
    total = sum(math.comb(n, s) for s in range(0, k + 1))
    if total > budget:
        raise ValueError(f"combinatorial budget exceeded: {total} > {budget}")
    ynorm = np.linalg.norm(y)
    tol = feas_tol * max(1.0, ynorm)
    if ynorm <= tol:
        return np.zeros(n)
    if k == 0:
        raise ValueError("k=0 infeasible for nonzero y")

    best_z = None
    best_obj = math.inf
    best_support = None
    for size in range(1, k + 1):
        for support in combinations(range(n), size):
            sub = a[:, support]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) > tol:
                continue
            obj = float(np.sum(np.abs(coef)))
            if obj < best_obj - 1e-12 or (
                abs(obj - best_obj) <= 1e-12 and (best_support is None or support < best_support)
            ):
                best_obj = obj
                best_support = support
                best_z = np.zeros(n)
                best_z[list(support)] = coef
    if best_z is None:
        raise ValueError("no feasible support of size <= k")
    return best_z


def c2_constant(delta_2k: float) -> float:
    """Noisy-recovery error constant 4*sqrt(1+d) / (1 - (1+sqrt(2))*d)."""
    if not 0.0 <= delta_2k < math.sqrt(2.0) - 1.0:
        raise ValueError("delta_2k must lie in [0, sqrt(2)-1)")
    return 4.0 * math.sqrt(1.0 + delta_2k) / (1.0 - (1.0 + math.sqrt(2.0)) * delta_2k)
