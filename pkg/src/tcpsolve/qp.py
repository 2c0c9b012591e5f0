"""Equality/bound constrained QP subproblems via a smoothing Newton method.

The subproblem solved at every outer SQP iterate is

    min_d  0.5 d'B d + c'd
    s.t.   h + Aeq d = 0,   g + d >= 0

whose KKT system (with equality multipliers mu and bound multipliers lam)

    B d - Aeq' mu - lam + c = 0
    h + Aeq d = 0
    lam >= 0,  g + d >= 0,  lam'(g + d) = 0

is reformulated with the CHKS smoothing function

    phi(eps, a, b) = a + b - sqrt(a^2 + b^2 + 2 eps^2)

which vanishes at eps = 0 exactly on the complementarity set.  Stacking
z = (eps, d, mu, lam) gives the square residual

    H(z) = (eps, B d - Aeq' mu - lam + c, h + Aeq d, phi(eps, g+d, lam))

driven to zero by a damped Newton iteration on H'(z) dz = beta(z) zbar - H(z)
with zbar = (eps0, 0, 0, 0) and beta(z) = gamma ||H(z)|| min(1, ||H(z)||).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QP", "QPResult", "SmoothingNewtonConfig", "chks",
           "kkt_residual", "kkt_jacobian", "perturbation", "solve_qp"]

CONVERGED = "converged"
MAX_ITER = "max_iter"
SINGULAR = "singular_jacobian"


@dataclass(frozen=True)
class QP:
    """Data of one subproblem; B must be symmetric positive definite."""
    B: np.ndarray
    c: np.ndarray
    Aeq: np.ndarray
    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        n = self.c.shape[0]
        for name, arr, shape in (("B", self.B, (n, n)), ("Aeq", self.Aeq, (n, n)),
                                 ("h", self.h, (n,)), ("g", self.g, (n,))):
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")

    @property
    def n(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class SmoothingNewtonConfig:
    """Line-search smoothing Newton parameters.

    sigma is the sufficient-decrease fraction of the norm reduction test;
    it must be small (classic choice 1e-4): the test demands the residual
    shrink by a factor (1 - sigma*(1 - gamma*eps0)*alpha) per step, and
    values near 1 reject steps that any damped Newton method must take on
    badly scaled subproblems.
    """

    rho: float = 0.5
    sigma: float = 1e-4
    gamma: float = 0.2
    eps0: float = 1.0
    tol: float = 1e-10
    max_iter: int = 200
    max_backtracks: int = 60
    drop_tol: float = 1e-8


@dataclass(frozen=True)
class QPResult:
    d: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    status: str
    iterations: int
    residual: float
    kinks: int = 0

    @property
    def converged(self):
        return self.status == CONVERGED


def chks(eps, a, b):
    """Smoothed complementarity: zero at eps=0 iff a,b >= 0 and a*b = 0."""
    return a + b - np.sqrt(a * a + b * b + 2.0 * eps * eps)


def _split(z, n):
    return z[0], z[1:n + 1], z[n + 1:2 * n + 1], z[2 * n + 1:]


def kkt_residual(qp, z):
    """H(z) stacked as (eps, stationarity, equality, complementarity).

    An all-zero row of Aeq denotes an absent equality constraint; its row of
    the equality block reads h_i + mu_i instead, which pins the dangling
    multiplier and keeps H' nonsingular without affecting d or lam.
    """
    n = qp.n
    eps, d, mu, lam = _split(z, n)
    t = qp.g + d
    absent = ~np.any(qp.Aeq, axis=1)
    eq = qp.h + qp.Aeq @ d
    if absent.any():
        eq = eq + np.where(absent, mu, 0.0)
    return np.concatenate([
        [eps],
        qp.B @ d - qp.Aeq.T @ mu - lam + qp.c,
        eq,
        chks(eps, t, lam),
    ])


def kkt_jacobian(qp, z):
    """H'(z) and the number of complementarity rows sitting on the kink.

    Row blocks: [1 0 0 0; 0 B -Aeq' -I; 0 Aeq 0 0; v D2 0 D1] with
    r_i = sqrt(lam_i^2 + t_i^2 + 2 eps^2), v_i = -2 eps / r_i,
    D2 = diag(1 - t_i/r_i), D1 = diag(1 - lam_i/r_i); at r_i = 0 (the kink
    eps = lam_i = t_i = 0) the convention D1 = D2 = I, v_i = 0 is used.
    """
    n = qp.n
    eps, d, mu, lam = _split(z, n)
    t = qp.g + d
    r = np.sqrt(lam * lam + t * t + 2.0 * eps * eps)
    kink = r == 0.0
    nkink = int(np.count_nonzero(kink))
    safe = np.where(kink, 1.0, r)
    v = np.where(kink, 0.0, -2.0 * eps / safe)
    b_coef = np.where(kink, 1.0, 1.0 - t / safe)
    a_coef = np.where(kink, 1.0, 1.0 - lam / safe)
    size = 1 + 3 * n
    jac = np.zeros((size, size))
    jac[0, 0] = 1.0
    rows = slice(1, n + 1)
    jac[rows, 1:n + 1] = qp.B
    jac[rows, n + 1:2 * n + 1] = -qp.Aeq.T
    jac[rows, 2 * n + 1:] = -np.eye(n)
    rows = slice(n + 1, 2 * n + 1)
    jac[rows, 1:n + 1] = qp.Aeq
    absent = ~np.any(qp.Aeq, axis=1)
    jac[rows, n + 1:2 * n + 1] = np.diag(absent.astype(float))
    rows = slice(2 * n + 1, size)
    jac[rows, 0] = v
    jac[rows, 1:n + 1] = np.diag(b_coef)
    jac[rows, 2 * n + 1:] = np.diag(a_coef)
    return jac, nkink


def _residual_norms(qp, trials):
    """||H(z)|| for a batch of iterates, one per row of trials."""
    n = qp.n
    eps = trials[:, :1]
    d = trials[:, 1:n + 1]
    mu = trials[:, n + 1:2 * n + 1]
    lam = trials[:, 2 * n + 1:]
    stat = d @ qp.B.T - mu @ qp.Aeq - lam + qp.c
    eq = qp.h + d @ qp.Aeq.T
    absent = ~np.any(qp.Aeq, axis=1)
    if absent.any():
        eq = eq + np.where(absent, mu, 0.0)
    comp = chks(eps, qp.g + d, lam)
    sq = eps[:, 0] ** 2 + np.sum(stat * stat, axis=1) \
        + np.sum(eq * eq, axis=1) + np.sum(comp * comp, axis=1)
    return np.sqrt(sq)


def perturbation(h_norm, gamma):
    """beta(z) = gamma ||H(z)|| min(1, ||H(z)||)."""
    return gamma * h_norm * min(1.0, h_norm)


def default_start(qp, eps0=1.0):
    """d = 0, mu = 0, lam = e: strictly positive lam keeps clear of kinks."""
    n = qp.n
    z = np.zeros(1 + 3 * n)
    z[0] = eps0
    z[2 * n + 1:] = 1.0
    return z


def solve_qp(qp, start=None, config=None):
    """Drive ||H(z)|| below tol * max(1, ||z||_inf) by damped Newton steps.

    Equality rows are equilibrated to unit max-norm before iterating: the
    SQP outer loop hands in constraint gradients that collapse like
    x^(m-2) near sparse solutions, which would otherwise force multipliers
    of size 1/||row|| and condition numbers beyond float64.  The scaling
    changes neither d nor lam, and mu is mapped back to the caller's
    geometry on exit.  The relative residual test keeps the remaining
    degenerate cases solvable; for well-scaled data it coincides with the
    absolute test.
    """
    cfg = config or SmoothingNewtonConfig()
    n = qp.n
    row_norm = np.max(np.abs(qp.Aeq), axis=1)
    # rows the linearization cannot see are dropped rather than equilibrated:
    # amplifying a ~0 row whose residual is also ~0 manufactures a hard
    # constraint out of nothing and blocks the bound multipliers from
    # closing out coordinates the objective wants at zero
    vacuous = (row_norm <= cfg.drop_tol) & (np.abs(qp.h) <= cfg.drop_tol)
    aeq = np.where(vacuous[:, None], 0.0, qp.Aeq)
    h = np.where(vacuous, 0.0, qp.h)
    scale = np.where(vacuous | (row_norm <= 1e-12), 1.0, row_norm)
    inner = QP(B=qp.B, c=qp.c, Aeq=aeq / scale[:, None], h=h / scale,
               g=qp.g)
    if start is None:
        z = default_start(inner, cfg.eps0)
    else:
        z = np.asarray(start, dtype=float).copy()
        z[n + 1:2 * n + 1] *= scale
    zbar = np.zeros(1 + 3 * n)
    zbar[0] = cfg.eps0
    h_val = kkt_residual(inner, z)
    h_norm = float(np.linalg.norm(h_val))
    # residual target relative to the starting residual, never to the iterate:
    # an infeasible subproblem drives multipliers to infinity while ||H||
    # plateaus, which an iterate-scaled test would misread as convergence
    stop = cfg.tol * max(1.0, h_norm)
    # enforce gamma*eps0 < 1 and gamma*||H(z0)|| < 1 by shrinking gamma
    gamma = min(cfg.gamma, 0.9 / max(cfg.eps0, h_norm, 1e-16))
    kinks = 0
    status = MAX_ITER
    iterations = 0
    decrease = cfg.sigma * (1.0 - gamma * cfg.eps0)
    alphas = cfg.rho ** np.arange(1, cfg.max_backtracks + 1)
    history = []
    for iterations in range(1, cfg.max_iter + 1):
        if h_norm <= stop:
            status = CONVERGED
            iterations -= 1
            break
        history.append(h_norm)
        if len(history) > 12 and h_norm > 0.9 * history[-13]:
            break  # crawling residual: an infeasible or degenerate subproblem
        jac, nkink = kkt_jacobian(inner, z)
        kinks += nkink
        rhs = perturbation(h_norm, gamma) * zbar - h_val
        try:
            dz = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            dz = None
        if dz is None or not np.all(np.isfinite(dz)):
            size = jac.shape[0]
            try:
                dz = np.linalg.solve(jac + 1e-10 * np.eye(size), rhs)
            except np.linalg.LinAlgError:
                dz = None
            if dz is None or not np.all(np.isfinite(dz)):
                status = SINGULAR
                break
        # full step first, then every backtracked candidate in one batch
        trial = z + dz
        trial_val = kkt_residual(inner, trial)
        trial_norm = float(np.linalg.norm(trial_val))
        if trial_norm <= (1.0 - decrease) * h_norm:
            z, h_val, h_norm = trial, trial_val, trial_norm
            continue
        trials = z + alphas[:, None] * dz
        norms = _residual_norms(inner, trials)
        passing = np.flatnonzero(norms <= (1.0 - decrease * alphas) * h_norm)
        if passing.size == 0:
            break  # stalled line search: report as max_iter with best iterate
        i = int(passing[0])
        z = trials[i]
        h_val = kkt_residual(inner, z)
        h_norm = float(np.linalg.norm(h_val))
    if status == MAX_ITER and h_norm <= stop:
        status = CONVERGED
    _eps, d, mu, lam = _split(z, n)
    return QPResult(d=d, mu=mu / scale, lam=lam, status=status,
                    iterations=iterations, residual=h_norm, kinks=kinks)
