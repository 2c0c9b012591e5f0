"""Sparse coordinate tensors and the polynomial maps they induce.

An order-m dimension-n tensor A acts on a vector x through the degree-(m-1)
polynomial map

    F(x)_i = (A x^{m-1})_i = sum_{i2..im} a[i, i2, .., im] * x_{i2} * .. * x_{im}

which is the object every other module here is built on: the complementarity
problem asks for x >= 0 with F(x) - q >= 0 and x'(F(x) - q) = 0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Tensor", "SpectralBracket", "identity", "spectral_radius"]


def _distinct_permutations(seq):
    """Yield the distinct orderings of seq (a tuple possibly with repeats)."""
    pool = sorted(seq)
    n = len(pool)
    while True:
        yield tuple(pool)
        # next lexicographic permutation, skipping duplicates by construction
        i = n - 2
        while i >= 0 and pool[i] >= pool[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while pool[j] <= pool[i]:
            j -= 1
        pool[i], pool[j] = pool[j], pool[i]
        pool[i + 1:] = reversed(pool[i + 1:])


class Tensor:
    """Order-m, dimension-n real tensor stored as sparse coordinates.

    Entries map 0-based index tuples of length m to finite nonzero floats.
    Zero values are dropped, duplicate tuples rejected, indices range-checked.
    """

    def __init__(self, order, dim, entries):
        if order < 2:
            raise ValueError(f"tensor order must be >= 2, got {order}")
        if dim < 1:
            raise ValueError(f"tensor dimension must be >= 1, got {dim}")
        self.order = int(order)
        self.dim = int(dim)
        data = {}
        items = entries.items() if hasattr(entries, "items") else entries
        for idx, value in items:
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.order:
                raise ValueError(f"index {idx} has length {len(idx)}, expected {self.order}")
            if any(i < 0 or i >= self.dim for i in idx):
                raise ValueError(f"index {idx} out of range for dimension {self.dim}")
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"entry {idx} has non-finite value {value}")
            if idx in data:
                raise ValueError(f"duplicate index tuple {idx}")
            if value != 0.0:
                data[idx] = value
        self._entries = data
        # column-wise index arrays for vectorized contraction
        if data:
            keys = np.array(sorted(data), dtype=np.intp)
            self._idx = keys
            self._val = np.array([data[tuple(k)] for k in keys], dtype=float)
        else:
            self._idx = np.zeros((0, self.order), dtype=np.intp)
            self._val = np.zeros(0)
        self._sym = None

    # -- basic protocol ----------------------------------------------------

    @property
    def nnz(self):
        return len(self._entries)

    def value(self, idx):
        """Entry at 0-based tuple idx (0.0 when absent)."""
        return self._entries.get(tuple(idx), 0.0)

    def items(self):
        return self._entries.items()

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.order == other.order and self.dim == other.dim
                and self._entries == other._entries)

    def __hash__(self):
        return hash((self.order, self.dim, frozenset(self._entries.items())))

    def __repr__(self):
        return f"Tensor(order={self.order}, dim={self.dim}, nnz={self.nnz})"

    # -- construction helpers ----------------------------------------------

    @classmethod
    def from_dense(cls, array):
        array = np.asarray(array, dtype=float)
        order = array.ndim
        dim = array.shape[0]
        if array.shape != (dim,) * order:
            raise ValueError(f"dense tensor must be hypercubic, got shape {array.shape}")
        entries = {idx: array[idx] for idx in zip(*np.nonzero(array))}
        return cls(order, dim, entries)

    def to_dense(self):
        out = np.zeros((self.dim,) * self.order)
        for idx, v in self._entries.items():
            out[idx] = v
        return out

    # -- contractions --------------------------------------------------------

    def contract(self, x):
        """A x^{m-1}: contract x into every index slot but the first."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got shape {x.shape}")
        if self.nnz == 0:
            return np.zeros(self.dim)
        w = self._val.copy()
        for c in range(1, self.order):
            w *= x[self._idx[:, c]]
        return np.bincount(self._idx[:, 0], weights=w, minlength=self.dim)

    def contract_matrix(self, x):
        """A x^{m-2} as an n x n matrix; for order 2 this is A itself.

        M[i, j] = sum_{i3..im} a[i, j, i3, .., im] * x_{i3} * .. * x_{im}
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"vector of length {self.dim} expected, got shape {x.shape}")
        out = np.zeros((self.dim, self.dim))
        if self.nnz == 0:
            return out
        w = self._val.copy()
        for c in range(2, self.order):
            w *= x[self._idx[:, c]]
        np.add.at(out, (self._idx[:, 0], self._idx[:, 1]), w)
        return out

    def symmetrized(self):
        """Partial symmetrization over the last m-1 index slots (cached).

        bar_a[i, J] = (1/(m-1)!) sum over permutations pi of J of a[i, pi(J)];
        contracting with any x is unchanged: bar_A x^{m-1} = A x^{m-1}.
        """
        if self._sym is None:
            m = self.order
            fact = math.factorial(m - 1)
            acc = {}
            for idx, v in self._entries.items():
                tail = idx[1:]
                counts = {}
                for i in tail:
                    counts[i] = counts.get(i, 0) + 1
                stab = 1
                for c in counts.values():
                    stab *= math.factorial(c)
                w = v * stab / fact
                for perm in _distinct_permutations(tail):
                    key = (idx[0],) + perm
                    acc[key] = acc.get(key, 0.0) + w
            self._sym = Tensor(self.order, self.dim, acc)
            self._sym._sym = self._sym
        return self._sym

    def jacobian(self, x):
        """Derivative of x -> A x^{m-1}: the matrix (m-1) * bar_A x^{m-2}."""
        return (self.order - 1) * self.symmetrized().contract_matrix(x)

    # -- structure queries used by the classifier ---------------------------

    def diagonal(self):
        """Vector of the n diagonal entries a[i, i, .., i]."""
        return np.array([self._entries.get((i,) * self.order, 0.0) for i in range(self.dim)])

    def off_diagonal_items(self):
        for idx, v in self._entries.items():
            if any(i != idx[0] for i in idx[1:]):
                yield idx, v

    def min_value(self):
        return float(self._val.min()) if self.nnz else 0.0

    def max_abs(self):
        return float(np.abs(self._val).max()) if self.nnz else 0.0

    def scaled(self, factor):
        return Tensor(self.order, self.dim, {k: factor * v for k, v in self._entries.items()})

    def __add__(self, other):
        if not isinstance(other, Tensor) or other.order != self.order or other.dim != self.dim:
            return NotImplemented
        acc = dict(self._entries)
        for k, v in other._entries.items():
            acc[k] = acc.get(k, 0.0) + v
        return Tensor(self.order, self.dim, acc)


def identity(order, dim):
    """Identity tensor: ones on the diagonal, zero elsewhere."""
    return Tensor(order, dim, {(i,) * order: 1.0 for i in range(dim)})


@dataclass(frozen=True)
class SpectralBracket:
    """Spectral radius estimate with a certified enclosing interval."""
    value: float
    lo: float
    hi: float
    iterations: int
    converged: bool
    shifted: bool = False

    @property
    def gap(self):
        return self.hi - self.lo


def _power_iteration(tensor, tol, max_iter):
    """Collatz-bracketed power iteration for a nonnegative tensor.

    For every positive x, min_i (Bx^{m-1})_i / x_i^{m-1} <= rho(B) <= max_i of
    the same ratios, so the running intersection of the per-iterate brackets
    stays valid. Returns (value, lo, hi, iterations, converged, hit_zero).
    """
    n, m = tensor.dim, tensor.order
    x = np.ones(n)
    lo, hi = 0.0, math.inf
    for k in range(1, max_iter + 1):
        y = tensor.contract(x)
        denom = x ** (m - 1)
        if np.any(denom <= 0.0):
            # a coordinate underflowed: same exit as leaving the orthant,
            # the bracket collected so far stays valid
            return 0.5 * (lo + hi), lo, hi, k, False, True
        ratios = y / denom
        lo = max(lo, float(ratios.min()))
        hi = min(hi, float(ratios.max()))
        if hi < lo:  # brackets valid up to roundoff; collapse
            lo = hi = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return 0.5 * (lo + hi), lo, hi, k, True, False
        if np.any(y <= 0.0):
            # reducible tensor: the iterate would leave the positive orthant
            return 0.5 * (lo + hi), lo, hi, k, False, True
        x = y ** (1.0 / (m - 1))
        x /= x.max()
    return 0.5 * (lo + hi), lo, hi, max_iter, False, False


def spectral_radius(tensor, tol=1e-10, max_iter=10000):
    """Spectral radius of a nonnegative tensor, with certified bounds.

    When the plain iteration stalls on a reducible tensor, it is rerun on the
    diagonally shifted tensor B + s0*I (s0 = 1e-8 * max|b|); the shift moves
    every H-eigenvalue by exactly s0, and the returned bracket is widened by
    s0 on each side to stay safe.
    """
    if tensor.nnz and tensor.min_value() < 0.0:
        raise ValueError("spectral_radius requires a nonnegative tensor")
    value, lo, hi, iters, converged, hit_zero = _power_iteration(tensor, tol, max_iter)
    shifted = False
    if not converged:
        s0 = 1e-8 * tensor.max_abs()
        if s0 > 0.0:
            shifted = True
            bumped = tensor + identity(tensor.order, tensor.dim).scaled(s0)
            v2, lo2, hi2, it2, conv2, _ = _power_iteration(bumped, tol, max_iter)
            lo = max(lo, max(lo2 - 2.0 * s0, 0.0))
            hi = min(hi, hi2)
            value, iters, converged = v2 - s0, iters + it2, conv2
            if hi < lo:
                lo = hi = value
    return SpectralBracket(value=value, lo=lo, hi=hi, iterations=iters,
                           converged=converged, shifted=shifted)
