"""SQP solver for sparse nonnegative solutions of A x^(m-1) = q.

The sparsest-solution problem is relaxed to

    min  e'x   s.t.  A x^(m-1) - q = 0,  x >= 0,

and solved by sequential quadratic programming: each iteration linearizes
the equality constraint, solves the quadratic subproblem with the smoothing
Newton method from `qp`, and globalizes with an l1 exact penalty line
search.  Lagrangian curvature is tracked by damped BFGS updates, so only
constraint values and Jacobians of the tensor map are ever needed.

`multistart_sparse` runs the solver from a batch of seeded random starts and
returns the sparsest verified solution, which is the intended entry point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import classify
from .qp import QP, SmoothingNewtonConfig, solve_qp

__all__ = ["SQPConfig", "SolveReport", "IterationRecord", "Verification",
           "MultistartResult", "sqp_solve", "multistart_sparse", "verify_solution",
           "SPARSITY_TOL"]

# components at or below this count as structural zeros in the l0 measure
SPARSITY_TOL = 1e-6

KKT = "kkt"
MAX_ITER = "max_iter"
QP_FAIL = "qp_fail"
LINESEARCH_FAIL = "linesearch_fail"


@dataclass(frozen=True)
class SQPConfig:
    """Tuning knobs for `sqp_solve` and `multistart_sparse`.

    eps1 bounds the QP step 1-norm and eps2 the primal infeasibility at
    termination; delta is the safety margin of the penalty update; sigma0
    the initial penalty weight (the merit function uses 1/sigma).  Steps are
    backtracked by rho until the Armijo condition with slope fraction eta
    holds.  snap_tol bounds the components the final cleanup may round to
    exact zero.
    """

    eta: float = 0.1
    rho: float = 0.5
    eps1: float = 1e-6
    eps2: float = 1e-5
    delta: float = 1.0
    sigma0: float = 0.8
    max_iter: int = 500
    max_backtracks: int = 50
    snap_tol: float = 1e-5
    reduce_support: bool = True
    qp: SmoothingNewtonConfig = field(default_factory=SmoothingNewtonConfig)
    debug_checks: bool = False
    keep_trace: bool = False


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    step_norm: float
    alpha: float
    sigma: float
    merit: float
    infeasibility: float
    qp_iterations: int


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one SQP run.

    `iterations` counts the outer steps of the trajectory that produced x;
    discarded recovery or support-reduction attempts are reported in `notes`
    but do not inflate the count.
    """

    x: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    status: str
    iterations: int
    step_norm: float
    feasibility: float
    equation_residual: float
    tcp_residual: float
    objective: float
    l0: int
    start_point: np.ndarray
    notes: tuple = ()
    trace: tuple = ()

    @property
    def converged(self):
        return self.status == KKT


@dataclass(frozen=True)
class Verification:
    """Pointwise feasibility check of a candidate complementarity solution."""

    min_x: float
    min_slack: float
    complementarity: float
    equation_residual: float
    max_violation: float

    def is_valid(self, tol=1e-6):
        return self.max_violation <= tol


@dataclass(frozen=True)
class MultistartResult:
    best: SolveReport
    reports: tuple
    success_rate: float
    notes: tuple = ()


def constraint_value(problem, x):
    return problem.tensor.contract(x) - problem.q


def constraint_jacobian(problem, x):
    return problem.tensor.jacobian(x)


def infeasibility(x, h):
    return float(np.sum(np.abs(h)) + np.sum(np.abs(np.minimum(x, 0.0))))


def merit(x, h, sigma):
    return float(np.sum(x)) + infeasibility(x, h) / sigma


def update_penalty(sigma, mu, lam, delta):
    """Keep sigma unless 1/sigma no longer dominates the multipliers."""
    tau = max(float(np.max(np.abs(mu), initial=0.0)),
              float(np.max(np.abs(lam), initial=0.0)))
    if 1.0 / sigma >= tau + delta:
        return sigma
    return 1.0 / (tau + 2.0 * delta)


def least_squares_multipliers(aeq):
    """Minimum-norm (mu, lam) with aeq' mu + lam = e.

    Stacking M = [aeq', I] makes M M' = aeq' aeq + I, which is always
    symmetric positive definite, so the normal equations need no rank
    checks.
    """
    n = aeq.shape[1]
    gram = aeq.T @ aeq + np.eye(n)
    t = np.linalg.solve(gram, np.ones(n))
    return aeq @ t, t


def damped_bfgs(b, s, y):
    """Powell-damped BFGS update of b; returns b unchanged on degenerate data."""
    if np.linalg.norm(s) <= 1e-14:
        return b
    bs = b @ s
    sbs = float(s @ bs)
    if sbs <= 0.0:
        return b
    sy = float(s @ y)
    if sy >= 0.2 * sbs:
        z = y
        sz = sy
    else:
        theta = 0.8 * sbs / (sbs - sy)
        z = theta * y + (1.0 - theta) * bs
        sz = float(s @ z)
    if sz <= 1e-16:
        return b
    b_new = b - np.outer(bs, bs) / sbs + np.outer(z, z) / sz
    return 0.5 * (b_new + b_new.T)


def _tcp_violation(x, w):
    return max(0.0,
               -float(np.min(x)),
               -float(np.min(w)),
               float(np.max(np.abs(x * w))))


def verify_solution(problem, x):
    """Measure how far x is from solving the complementarity problem."""
    x = np.asarray(x, dtype=float)
    w = constraint_value(problem, x)
    return Verification(
        min_x=float(np.min(x)),
        min_slack=float(np.min(w)),
        complementarity=float(np.max(np.abs(x * w))),
        equation_residual=float(np.max(np.abs(w))),
        max_violation=max(_tcp_violation(x, w), 0.0),
    )


def _cleanup_score(problem, x):
    h = constraint_value(problem, x)
    return max(float(np.max(np.abs(h))), -float(np.min(x)), 0.0)


def _snap_zeros(problem, x, snap_tol):
    """Round trailing near-zero components to exact zero when it does not hurt.

    Degenerate constraint rows shrink a vanishing coordinate geometrically,
    so runs stop with components around 1e-6 that are zeros of the exact
    solution.  Snapping is only accepted when the equation residual does not
    degrade (beyond roundoff), so it can never manufacture a solution.
    """
    candidates = [i for i in range(x.size) if x[i] != 0.0 and abs(x[i]) <= snap_tol]
    if not candidates:
        return x, 0
    base = _cleanup_score(problem, x)
    trial = x.copy()
    trial[candidates] = 0.0
    if _cleanup_score(problem, trial) <= base + 1e-12:
        return trial, len(candidates)
    current = x.copy()
    snapped = 0
    for i in sorted(candidates, key=lambda i: abs(x[i])):
        trial = current.copy()
        trial[i] = 0.0
        if _cleanup_score(problem, trial) <= _cleanup_score(problem, current) + 1e-12:
            current = trial
            snapped += 1
    return current, snapped


def _reduce_support(problem, report, cfg):
    """Try zeroing each support component and re-solving; keep strict wins.

    The SQP iteration stops at whichever KKT point its basin contains, and
    problems with several complementarity solutions have dense ones.  Since
    the objective is exactly the support mass, restarting from the converged
    point with one coordinate forced to zero either re-converges somewhere
    strictly sparser/cheaper (accepted) or fails (discarded), so the
    returned point is always a verified KKT point of the same problem.
    """
    sub_cfg = replace(cfg, reduce_support=False,
                      max_iter=min(cfg.max_iter, 120))
    best = report
    notes = list(report.notes)
    for _ in range(2 * problem.dim + 1):
        improved = False
        support = np.flatnonzero(best.x > SPARSITY_TOL)
        for i in sorted(support, key=lambda j: -best.x[j]):
            x0 = best.x.copy()
            x0[i] = 0.0
            trial = sqp_solve(problem, x0, best.mu, best.lam, sub_cfg)
            wins = trial.status == KKT and trial.tcp_residual <= cfg.eps2 and (
                trial.l0 < best.l0
                or (trial.l0 == best.l0
                    and trial.objective < best.objective - 1e-8))
            if wins:
                notes.append(
                    f"support reduction: zeroing x[{i}] reached a better KKT "
                    f"point (l0 {best.l0} -> {trial.l0}, objective "
                    f"{best.objective:.6g} -> {trial.objective:.6g})")
                best = trial
                improved = True
                break
        if not improved:
            break
    if best is report:
        return report
    return replace(best, start_point=report.start_point,
                   notes=tuple(notes) + best.notes)


def sqp_solve(problem, x0, mu0=None, lam0=None, config=None):
    """Run SQP from a single start point; returns a SolveReport."""
    cfg = config or SQPConfig()
    n = problem.dim
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x.shape}")
    mu = np.zeros(n) if mu0 is None else np.array(mu0, dtype=float)
    lam = np.ones(n) if lam0 is None else np.array(lam0, dtype=float)
    start_point = x.copy()
    b = np.eye(n)
    sigma = cfg.sigma0
    ones = np.ones(n)
    notes = []
    trace = []
    status = MAX_ITER
    iterations = 0
    step_norm = np.inf
    inexact_qps = 0
    restorations = 0

    for k in range(cfg.max_iter):
        h = constraint_value(problem, x)
        jac = constraint_jacobian(problem, x)
        sub = QP(B=b, c=ones, Aeq=jac, h=h, g=x)
        z0 = np.concatenate([[cfg.qp.eps0], np.zeros(n), mu, lam])
        qp_res = solve_qp(sub, start=z0, config=cfg.qp)
        iterations = k + 1
        d = qp_res.d
        if not qp_res.converged:
            # far from a solution the linearized subproblem can be infeasible
            # (square Aeq forces d, which may violate the bounds); the inexact
            # direction is still useful as long as the merit line search
            # accepts it, so only an unusable direction aborts the run
            if not np.all(np.isfinite(d)) or float(np.max(np.abs(d))) > 1e10:
                status = QP_FAIL
                notes.append(f"iteration {k}: QP subproblem unusable (status "
                             f"{qp_res.status}, residual {qp_res.residual:.3e})")
                break
            inexact_qps += 1
            if inexact_qps == 1:
                notes.append(f"iteration {k}: QP subproblem inexact (status "
                             f"{qp_res.status}, residual {qp_res.residual:.3e}); "
                             "continuing with returned step")
        step_norm = float(np.sum(np.abs(d)))
        infeas = infeasibility(x, h)
        if qp_res.converged and step_norm <= cfg.eps1 and infeas <= cfg.eps2:
            status = KKT
            break

        sigma = update_penalty(sigma, mu, lam, cfg.delta)
        slope = float(np.sum(d)) - infeas / sigma
        phi0 = merit(x, h, sigma)
        alpha = 1.0
        accepted = False
        if slope > -1e-14:
            # the slope estimate goes flat either at stationarity (roundoff)
            # or when degenerate rows blow up the subproblem multipliers; the
            # full step is taken and the event recorded, unless it would
            # destroy the merit outright (bounded growth keeps escape hops
            # recoverable, order-of-magnitude blowups are not)
            phi_full = merit(x + d, constraint_value(problem, x + d), sigma)
            if phi_full <= 10.0 * max(phi0, 1.0):
                accepted = True
                notes.append(f"iteration {k}: merit slope {slope:.3e} not "
                             "negative, unit step taken")
            else:
                slope = -1e-12  # destructive direction: demand plain decrease
        if not accepted:
            for _ in range(cfg.max_backtracks + 1):
                x_trial = x + alpha * d
                if merit(x_trial, constraint_value(problem, x_trial), sigma) \
                        <= phi0 + cfg.eta * alpha * slope:
                    accepted = True
                    break
                alpha *= cfg.rho
        if not accepted:
            # restoration fallback: the subproblem direction is uphill in the
            # merit (its linearization is not trusted this far out), so pull
            # the iterate toward feasibility along the residual gradient and
            # demand a plain strict decrease
            d_r = -jac.T @ h
            d_r /= max(1.0, float(np.max(np.abs(d_r))))
            alpha = 1.0
            for _ in range(cfg.max_backtracks + 1):
                x_trial = x + alpha * d_r
                if merit(x_trial, constraint_value(problem, x_trial), sigma) \
                        <= phi0 - 1e-12:
                    accepted = True
                    d = d_r
                    restorations += 1
                    if restorations == 1:
                        notes.append(f"iteration {k}: restoration step along "
                                     "the residual gradient")
                    break
                alpha *= cfg.rho
            if not accepted:
                status = LINESEARCH_FAIL
                notes.append(f"iteration {k}: no merit decrease within "
                             f"{cfg.max_backtracks} backtracks")
                break

        x_new = x + alpha * d
        jac_new = constraint_jacobian(problem, x_new)
        mu, lam = least_squares_multipliers(jac_new)
        y = -(jac_new - jac).T @ mu
        b = damped_bfgs(b, alpha * d, y)
        if cfg.debug_checks:
            eigs = np.linalg.eigvalsh(b)
            if eigs[0] <= 0.0 or eigs[-1] / max(eigs[0], 1e-300) > 1e12:
                notes.append(f"iteration {k}: curvature matrix ill conditioned "
                             f"(eig range [{eigs[0]:.3e}, {eigs[-1]:.3e}])")
        if cfg.keep_trace:
            trace.append(IterationRecord(
                iteration=k, step_norm=step_norm, alpha=alpha, sigma=sigma,
                merit=merit(x_new, constraint_value(problem, x_new), sigma),
                infeasibility=infeasibility(x_new, constraint_value(problem, x_new)),
                qp_iterations=qp_res.iterations))
        x = x_new

    if inexact_qps > 1:
        notes.append(f"{inexact_qps} of {iterations} QP subproblems solved "
                     "inexactly")
    if restorations > 1:
        notes.append(f"{restorations} restoration steps taken")

    if status in (LINESEARCH_FAIL, MAX_ITER):
        # runs often die within snapping distance of a solution because the
        # subproblem degenerates there; zero what the feasibility measure
        # cannot distinguish from zero and rerun the termination test from a
        # fresh subproblem, so the upgrade is earned, not assumed
        x_try, snapped = _snap_zeros(problem, x, 100.0 * cfg.snap_tol)
        h_try = constraint_value(problem, x_try)
        if infeasibility(x_try, h_try) <= cfg.eps2:
            sub = QP(B=b, c=ones, Aeq=constraint_jacobian(problem, x_try),
                     h=h_try, g=x_try)
            qp_try = solve_qp(sub, config=cfg.qp)
            d_norm = float(np.sum(np.abs(qp_try.d)))
            if qp_try.converged and d_norm <= cfg.eps1:
                x = x_try
                status = KKT
                step_norm = d_norm
                notes.append(f"terminal cleanup: snapped {snapped} "
                             "component(s) and re-verified the KKT test")

    if status in (LINESEARCH_FAIL, MAX_ITER) and cfg.reduce_support:
        # runs park on merit ridges where one coordinate must cross a region
        # the merit penalizes before the equations improve; committing a
        # coordinate to zero decouples the system, and the restart only
        # counts if it passes the full termination test on its own
        sub_cfg = replace(cfg, reduce_support=False,
                          max_iter=min(cfg.max_iter, 120))
        base = np.maximum(x, 0.0)
        order = np.argsort(np.abs(x))
        candidates = [(i, "kept") for i in order] + [(i, "neutral") for i in order]
        for i, kind in candidates:
            if kind == "kept":
                x0_retry = base.copy()
            else:
                # the final iterate itself may be degenerate (dead rows with
                # exactly zero gradients), so also try the midpoint of the
                # start distribution with the chosen coordinate committed
                x0_retry = np.full(n, 0.5)
            x0_retry[i] = 0.0
            trial = sqp_solve(problem, x0_retry, config=sub_cfg)
            if trial.status == KKT and trial.tcp_residual <= cfg.eps2:
                notes.append(f"recovered by restarting with x[{i}] fixed "
                             "to zero")
                x, mu, lam = trial.x, trial.mu, trial.lam
                status = KKT
                step_norm = trial.step_norm
                iterations = trial.iterations
                break

    if status == KKT:
        mu, lam = least_squares_multipliers(constraint_jacobian(problem, x))
        x, snapped = _snap_zeros(problem, x, cfg.snap_tol)
        if snapped:
            notes.append(f"snapped {snapped} near-zero component(s) to exact zero")
            mu, lam = least_squares_multipliers(constraint_jacobian(problem, x))

    h = constraint_value(problem, x)
    report = SolveReport(
        x=x,
        mu=mu,
        lam=lam,
        status=status,
        iterations=iterations,
        step_norm=step_norm,
        feasibility=infeasibility(x, h),
        equation_residual=float(np.max(np.abs(h))),
        tcp_residual=_tcp_violation(x, h),
        objective=float(np.sum(x)),
        l0=int(np.sum(x > SPARSITY_TOL)),
        start_point=start_point,
        notes=tuple(notes),
        trace=tuple(trace),
    )
    if cfg.reduce_support and report.converged and report.l0 > 0:
        report = _reduce_support(problem, report, cfg)
    return report


def _reformulation_notes(problem):
    """Certify (once) that equality reformulation and TCP agree for this tensor."""
    tags = problem.tags
    if "condition2" not in tags:
        tags["condition2"] = classify.satisfies_condition2(problem.tensor)
    if "ks" not in tags:
        tags["ks"] = classify.is_ks_tensor(problem.tensor)
    cond2 = tags["condition2"]
    ks = tags["ks"]
    notes = []
    if not (ks.positive and cond2.verdict is classify.Verdict.CERTIFIED_TRUE):
        notes.append(
            "equality reformulation not certified for this tensor "
            f"(ks={ks.verdict}, insertion sums={cond2.verdict}); converged "
            "points are stationary but may not be sparsest solutions")
    return notes


def multistart_sparse(problem, n_starts=20, seed=42, config=None):
    """Solve from n_starts seeded random points and keep the sparsest success.

    Starts are drawn from independent child streams of the seed, so reports
    are reproducible and independent of execution order.  A run counts as a
    success when it reaches the KKT test and its complementarity violation
    is within the infeasibility tolerance.
    """
    cfg = config or SQPConfig()
    n = problem.dim
    notes = _reformulation_notes(problem)

    if not np.any(problem.q):
        # A 0^(m-1) = 0 = q: the zero vector is the exact sparsest solution
        mu, lam = least_squares_multipliers(constraint_jacobian(problem, np.zeros(n)))
        report = SolveReport(
            x=np.zeros(n), mu=mu, lam=lam, status=KKT, iterations=0,
            step_norm=0.0, feasibility=0.0, equation_residual=0.0,
            tcp_residual=0.0, objective=0.0, l0=0, start_point=np.zeros(n),
            notes=("q = 0: zero vector solves the problem exactly",))
        return MultistartResult(best=report, reports=(report,),
                                success_rate=1.0, notes=tuple(notes))

    reports = []
    for k in range(n_starts):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))
        x0 = rng.uniform(0.0, 1.0, n)
        mu0 = rng.uniform(0.0, 1.0, n)
        lam0 = rng.uniform(0.0, 1.0, n)
        reports.append(sqp_solve(problem, x0, mu0, lam0, cfg))

    successes = [r for r in reports
                 if r.status == KKT and r.tcp_residual <= cfg.eps2]
    if successes:
        best = min(successes, key=lambda r: (r.l0, r.objective, r.iterations))
    else:
        best = min(reports, key=lambda r: r.tcp_residual)
        notes.append(f"no start converged within tolerance; best residual "
                     f"{best.tcp_residual:.3e}")
    return MultistartResult(
        best=best,
        reports=tuple(reports),
        success_rate=len(successes) / n_starts,
        notes=tuple(notes),
    )
