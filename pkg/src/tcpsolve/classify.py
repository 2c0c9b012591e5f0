"""Structured-tensor classification with checkable certificates.

Every check returns a Certificate whose verdict separates proof from
evidence: certified_true / certified_false come with a witness or bracket
that re-validates against the defining inequality, supported / refuted come
from finite sampling, unknown means the check could not decide either way.

Classes checked, for a tensor A of order m and dimension n:

  nonnegative     every entry >= 0
  Z-tensor        every off-diagonal entry <= 0
  M-tensor        A = s*I - B with B nonnegative and s > rho(B) (nonsingular,
                  i.e. strict inequality); for Z-tensors equivalent to the
                  existence of x > 0 with A x^{m-1} > 0
  P-tensor        suitable nonzero x always admit an i with x_i != 0 and
                  x_i (A x^{m-1})_i > 0
  KS-tensor       P-tensor whose comparison part W (diagonal plus nonpositive
                  off-diagonal entries) is a nonsingular M-tensor
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .tensors import Tensor, SpectralBracket, identity, spectral_radius

__all__ = [
    "Verdict", "Certificate", "KSDecomposition",
    "is_nonnegative", "is_z_tensor", "ks_split", "satisfies_condition2",
    "is_nonsingular_m_tensor", "is_p_tensor", "is_ks_tensor",
    "z_function_check", "positive_witness_ok",
]

OFFDIAG_TOL = 1e-12


class Verdict(str, enum.Enum):
    CERTIFIED_TRUE = "certified_true"
    CERTIFIED_FALSE = "certified_false"
    SUPPORTED = "supported"
    REFUTED = "refuted"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Certificate:
    """Outcome of one classification check."""
    verdict: Verdict
    method: str
    witness: object = None
    detail: str = ""
    evidence: dict = field(default_factory=dict)

    @property
    def positive(self):
        return self.verdict in (Verdict.CERTIFIED_TRUE, Verdict.SUPPORTED)

    @property
    def negative(self):
        return self.verdict in (Verdict.CERTIFIED_FALSE, Verdict.REFUTED)


@dataclass(frozen=True)
class KSDecomposition:
    """Split A = W + N: W keeps the diagonal and the nonpositive off-diagonal
    entries, N the positive off-diagonal ones (so N >= 0 with zero diagonal)."""
    W: Tensor
    N: Tensor
    condition2: Certificate

    @property
    def condition2_holds(self):
        if self.condition2.verdict is Verdict.CERTIFIED_TRUE:
            return True
        if self.condition2.verdict is Verdict.CERTIFIED_FALSE:
            return False
        return None


# ---------------------------------------------------------------------------
# entry-level checks

def is_nonnegative(tensor):
    worst = None
    for idx, v in tensor.items():
        if v < 0 and (worst is None or v < worst[1]):
            worst = (idx, v)
    if worst is None:
        return Certificate(Verdict.CERTIFIED_TRUE, "entry_scan",
                           detail=f"all {tensor.nnz} stored entries >= 0")
    return Certificate(Verdict.CERTIFIED_FALSE, "entry_scan", witness=worst[0],
                       detail=f"entry {worst[0]} = {worst[1]}")


def is_z_tensor(tensor):
    """Z-tensor: off-diagonal entries all <= 0."""
    for idx, v in tensor.off_diagonal_items():
        if v > 0:
            return Certificate(Verdict.CERTIFIED_FALSE, "entry_scan", witness=idx,
                               detail=f"off-diagonal entry {idx} = {v} > 0")
    return Certificate(Verdict.CERTIFIED_TRUE, "entry_scan",
                       detail="no positive off-diagonal entry")


def ks_split(tensor):
    w, nn = {}, {}
    for idx, v in tensor.items():
        diag = all(i == idx[0] for i in idx[1:])
        if diag or v < 0:
            w[idx] = v
        else:
            nn[idx] = v
    return KSDecomposition(W=Tensor(tensor.order, tensor.dim, w),
                           N=Tensor(tensor.order, tensor.dim, nn),
                           condition2=satisfies_condition2(tensor))


def satisfies_condition2(tensor):
    """Check the off-diagonal insertion-sum condition.

    For every i and every tail (i2,..,im) with im != i, the sum of the
    entries of A over the m tuples obtained by inserting i at each position
    of the ordered tail must be <= 0.  Only (i, tail) pairs where some
    insertion hits a stored entry can have a nonzero sum, so candidates are
    enumerated from the nnz stored entries and everything else is vacuous.
    """
    m = tensor.order
    candidates = set()
    for idx, _v in tensor.items():
        for k in range(m):
            i = idx[k]
            tail = idx[:k] + idx[k + 1:]
            if tail[-1] != i:
                candidates.add((i, tail))
    for i, tail in sorted(candidates):
        total = sum(tensor.value(tail[:p] + (i,) + tail[p:]) for p in range(m))
        if total > OFFDIAG_TOL:
            return Certificate(
                Verdict.CERTIFIED_FALSE, "insertion_sums", witness=(i, tail),
                detail=f"insertion sum for i={i}, tail={tail} is {total} > 0")
    return Certificate(Verdict.CERTIFIED_TRUE, "insertion_sums",
                       detail=f"{len(candidates)} candidate (i, tail) pairs, all sums <= 0")


# ---------------------------------------------------------------------------
# M-tensor check: positive-vector search, spectral comparison as fallback

def positive_witness_ok(tensor, x):
    """True when x > 0 and A x^{m-1} > 0 (a nonsingular M-tensor witness)."""
    x = np.asarray(x, dtype=float)
    return bool(np.all(x > 0) and np.all(tensor.contract(x) > 0))


def _positive_vector_search(tensor, max_iter=60):
    """Damped Newton iteration on A x^{m-1} = e from x = e.

    Returns a strictly positive x with A x^{m-1} > 0 if one is found along
    the way, else None.  Divergence and singular Jacobians just end the
    search; the caller falls back to the spectral comparison.
    """
    n = tensor.dim
    ones = np.ones(n)
    x = ones.copy()
    for _ in range(max_iter):
        if positive_witness_ok(tensor, x):
            return x
        r = tensor.contract(x) - ones
        jac = tensor.jacobian(x)
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dx)):
            return None
        # keep the iterate well inside the positive orthant
        alpha = 1.0
        neg = dx < 0
        if np.any(neg):
            alpha = min(1.0, float(np.min(-0.95 * x[neg] / dx[neg])))
        x = x + alpha * dx
        if np.max(x) > 1e8:
            return None
    return x if positive_witness_ok(tensor, x) else None


def is_nonsingular_m_tensor(tensor):
    """Nonsingular M-tensor check (the tensor must be a Z-tensor).

    Decisive positive route: find x > 0 with A x^{m-1} > 0.  Fallback:
    compare s = max diagonal entry against the bracketed spectral radius of
    B = s*I - A, which is nonnegative for Z-tensors.
    """
    z = is_z_tensor(tensor)
    if z.negative:
        return Certificate(Verdict.CERTIFIED_FALSE, "entry_scan", witness=z.witness,
                           detail="not a Z-tensor: " + z.detail)
    diag = tensor.diagonal()
    if np.min(diag) <= 0:
        i = int(np.argmin(diag))
        e_i = np.zeros(tensor.dim)
        e_i[i] = 1.0
        return Certificate(
            Verdict.CERTIFIED_FALSE, "entry_scan", witness=e_i,
            detail=f"diagonal entry {(i,) * tensor.order} = {diag[i]} <= 0; "
                   f"at x = e_{i + 1} no index has x_i (A x^(m-1))_i > 0")
    x = _positive_vector_search(tensor)
    if x is not None:
        return Certificate(Verdict.CERTIFIED_TRUE, "positive_vector", witness=x,
                           detail="x > 0 with A x^(m-1) > 0 found")
    s = float(np.max(diag))
    bump = identity(tensor.order, tensor.dim).scaled(s)
    b = bump + tensor.scaled(-1.0)
    bracket = spectral_radius(b)
    ev = {"s": s, "bracket": bracket}
    if s > bracket.hi:
        return Certificate(Verdict.CERTIFIED_TRUE, "spectral_bracket", evidence=ev,
                           detail=f"s = {s} > rho(s*I - A) <= {bracket.hi}")
    if s <= bracket.lo:
        return Certificate(Verdict.CERTIFIED_FALSE, "spectral_bracket", evidence=ev,
                           detail=f"s = {s} <= rho(s*I - A) >= {bracket.lo}")
    return Certificate(Verdict.UNKNOWN, "spectral_bracket", evidence=ev,
                       detail=f"spectral bracket [{bracket.lo}, {bracket.hi}] straddles s = {s}")


# ---------------------------------------------------------------------------
# sampled checks

def _p_probes(tensor, num_samples, seed):
    """Deterministic probes, then num_samples unit-sphere draws.

    For odd order the strict P-condition over all of R^n is void (x -> -x
    negates every product), so probes stay in the nonnegative orthant where
    the property is meaningful (and, for Z-tensors, equivalent to being a
    nonsingular M-tensor).  Even order probes both orthant signs.
    """
    n, m = tensor.dim, tensor.order
    eye = np.eye(n)
    for i in range(n):
        yield eye[i]
    if m % 2 == 0:
        for i in range(n):
            yield -eye[i]
        if n <= 14:
            for bits in range(2 ** n):
                yield np.array([1.0 if bits >> i & 1 else -1.0 for i in range(n)])
        else:
            yield np.ones(n)
    else:
        yield np.ones(n)
    rng = np.random.default_rng(seed)
    for _ in range(num_samples):
        x = rng.standard_normal(n)
        norm = np.linalg.norm(x)
        if norm == 0.0:
            continue
        x /= norm
        yield np.abs(x) if m % 2 else x


def _p_sample(tensor, num_samples, seed):
    """Search the probe set for an x refuting the strict P-condition."""
    for x in _p_probes(tensor, num_samples, seed):
        products = x * tensor.contract(x)
        active = x != 0.0
        if np.any(active) and np.max(products[active]) <= 0.0:
            return x
    return None


def is_p_tensor(tensor, num_samples=1000, seed=42):
    """P-tensor check: certified via the M-equivalence for Z-tensors,
    sampled (supported/refuted) otherwise."""
    z = is_z_tensor(tensor)
    if z.positive:
        m_cert = is_nonsingular_m_tensor(tensor)
        if m_cert.verdict is Verdict.CERTIFIED_TRUE:
            return Certificate(Verdict.CERTIFIED_TRUE, "z_m_equivalence",
                               witness=m_cert.witness, evidence=m_cert.evidence,
                               detail="Z-tensor and nonsingular M-tensor")
        if m_cert.verdict is Verdict.CERTIFIED_FALSE:
            x = _p_sample(tensor, num_samples, seed)
            if x is not None:
                return Certificate(
                    Verdict.REFUTED, "sampled", witness=x,
                    detail="no index with x_i != 0 has x_i (A x^(m-1))_i > 0")
            return Certificate(Verdict.CERTIFIED_FALSE, "z_m_equivalence",
                               witness=m_cert.witness, evidence=m_cert.evidence,
                               detail="Z-tensor that is not a nonsingular M-tensor")
        # M-check inconclusive: fall through to plain sampling
    x = _p_sample(tensor, num_samples, seed)
    if x is not None:
        return Certificate(Verdict.REFUTED, "sampled", witness=x,
                           detail="no index with x_i != 0 has x_i (A x^(m-1))_i > 0")
    return Certificate(Verdict.SUPPORTED, "sampled",
                       detail=f"no counterexample among deterministic probes + {num_samples} samples")


_RANK = {Verdict.CERTIFIED_TRUE: 3, Verdict.SUPPORTED: 2, Verdict.UNKNOWN: 1}


def is_ks_tensor(tensor, num_samples=1000, seed=42):
    """KS-tensor check: P-check on A, M-check on the comparison part W.

    The verdict is the weaker of the two; any negative branch refutes.
    """
    p_cert = is_p_tensor(tensor, num_samples=num_samples, seed=seed)
    split = ks_split(tensor)
    w_cert = is_nonsingular_m_tensor(split.W)
    if p_cert.negative:
        return Certificate(Verdict.REFUTED, "p_check", witness=p_cert.witness,
                           evidence=p_cert.evidence,
                           detail="not a P-tensor: " + p_cert.detail)
    if w_cert.negative:
        return Certificate(Verdict.REFUTED, "w_m_check", witness=w_cert.witness,
                           evidence=w_cert.evidence,
                           detail="comparison part W is not a nonsingular M-tensor: " + w_cert.detail)
    verdict = min((p_cert.verdict, w_cert.verdict), key=_RANK.__getitem__)
    if verdict is Verdict.UNKNOWN:
        weak = p_cert if _RANK[p_cert.verdict] <= _RANK[w_cert.verdict] else w_cert
        return Certificate(Verdict.UNKNOWN, "conjunction", detail=weak.detail)
    return Certificate(verdict, "conjunction", witness=w_cert.witness,
                       detail=f"P-check {p_cert.verdict}, W M-check {w_cert.verdict}")


def z_function_check(tensor, num_samples=1000, seed=42):
    """Sample x >= 0 and look for a positive off-diagonal Jacobian entry.

    The complementarity map x -> A x^{m-1} - q is a Z-function exactly when
    its Jacobian is a Z-matrix on the nonnegative orthant; a single positive
    off-diagonal entry at a sampled point refutes that.
    """
    n = tensor.dim
    rng = np.random.default_rng(seed)
    mask = ~np.eye(n, dtype=bool)
    for _ in range(num_samples):
        x = rng.uniform(0.0, 10.0, n)
        jac = tensor.jacobian(x)
        off = jac[mask]
        if off.size and np.max(off) > OFFDIAG_TOL:
            flat = np.where(mask, jac, -np.inf)
            i, j = np.unravel_index(int(np.argmax(flat)), jac.shape)
            return Certificate(
                Verdict.REFUTED, "jacobian_sampling", witness=x,
                evidence={"entry": (int(i), int(j)), "value": float(jac[i, j])},
                detail=f"jacobian({np.round(x, 4)})[{i},{j}] = {jac[i, j]} > 0")
    return Certificate(Verdict.SUPPORTED, "jacobian_sampling",
                       detail=f"off-diagonal jacobian entries <= {OFFDIAG_TOL} at {num_samples} samples")
