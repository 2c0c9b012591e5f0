"""Tensor contractions, symmetrization, Jacobians, and the spectral radius.

Oracles are deliberately naive: dense nested-loop summation for the
polynomial map, itertools.permutations for symmetrization, and central
finite differences for derivatives.
"""

import itertools
import math

import numpy as np
import pytest

from tcpsolve import Tensor, spectral_radius
from tcpsolve.tensors import identity


def dense_contract(array, x):
    """(A x^{m-1})_i by full nested-loop summation over all m-tuples."""
    m = array.ndim
    n = array.shape[0]
    out = np.zeros(n)
    for idx in itertools.product(range(n), repeat=m):
        term = array[idx]
        for j in idx[1:]:
            term *= x[j]
        out[idx[0]] += term
    return out


def dense_contract_matrix(array, x):
    """M_{ij} = sum over tails of a[i, j, tail] * prod x[tail]."""
    m = array.ndim
    n = array.shape[0]
    out = np.zeros((n, n))
    for idx in itertools.product(range(n), repeat=m):
        term = array[idx]
        for j in idx[2:]:
            term *= x[j]
        out[idx[0], idx[1]] += term
    return out


def dense_symmetrize(array):
    """Average over all permutations of the last m-1 axes."""
    m = array.ndim
    n = array.shape[0]
    out = np.zeros_like(array)
    perms = list(itertools.permutations(range(1, m)))
    for idx in itertools.product(range(n), repeat=m):
        total = 0.0
        for perm in perms:
            permuted = (idx[0],) + tuple(idx[p] for p in perm)
            total += array[permuted]
        out[idx] = total / len(perms)
    return out


def fd_jacobian(tensor, x, step=1e-5):
    n = tensor.dim
    out = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        out[:, j] = (tensor.contract(x + e) - tensor.contract(x - e)) / (2.0 * step)
    return out


def random_tensor(rng, order, dim, density=0.5):
    dense = rng.standard_normal((dim,) * order)
    dense *= rng.random((dim,) * order) < density
    return Tensor.from_dense(dense), dense


class TestConstruction:

    def test_rejects_bad_order_and_dim(self):
        with pytest.raises(ValueError):
            Tensor(1, 2, {})
        with pytest.raises(ValueError):
            Tensor(3, 0, {})

    def test_rejects_wrong_index_length(self):
        with pytest.raises(ValueError):
            Tensor(3, 2, {(0, 1): 1.0})

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ValueError):
            Tensor(3, 2, {(0, 1, 2): 1.0})
        with pytest.raises(ValueError):
            Tensor(3, 2, {(-1, 0, 0): 1.0})

    def test_rejects_non_finite_value(self):
        with pytest.raises(ValueError):
            Tensor(2, 2, {(0, 0): math.inf})

    def test_rejects_duplicate_tuple(self):
        with pytest.raises(ValueError):
            Tensor(2, 2, [((0, 0), 1.0), ((0, 0), 2.0)])

    def test_zero_values_dropped(self):
        t = Tensor(3, 2, {(0, 0, 0): 0.0, (1, 1, 1): 2.0})
        assert t.nnz == 1
        assert t.value((0, 0, 0)) == 0.0
        assert t.value((1, 1, 1)) == 2.0

    def test_dense_round_trip(self):
        rng = np.random.default_rng(0)
        dense = rng.standard_normal((3, 3, 3))
        t = Tensor.from_dense(dense)
        np.testing.assert_array_equal(t.to_dense(), dense)

    def test_equality_and_hash(self):
        a = Tensor(3, 2, {(0, 0, 0): 1.0})
        b = Tensor(3, 2, {(0, 0, 0): 1.0})
        c = Tensor(3, 2, {(0, 0, 0): 2.0})
        assert a == b and hash(a) == hash(b)
        assert a != c


class TestContract:

    def test_identity_tensor(self):
        # I x^{m-1} = (x_i^{m-1})
        t = identity(3, 2)
        np.testing.assert_allclose(t.contract(np.array([2.0, 3.0])), [4.0, 9.0])

    def test_quadratic_fixture(self):
        # map (x1^2 - x2^2, x1^2 + x2^2) at x = (1, 1)
        t = Tensor(3, 2, {(0, 0, 0): 1.0, (1, 0, 0): 1.0,
                          (0, 1, 1): -1.0, (1, 1, 1): 1.0})
        np.testing.assert_allclose(t.contract(np.array([1.0, 1.0])), [0.0, 2.0])

    def test_matches_dense_loop_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            order = int(rng.integers(2, 5))
            dim = int(rng.integers(1, 5))
            t, dense = random_tensor(rng, order, dim)
            x = rng.standard_normal(dim)
            np.testing.assert_allclose(t.contract(x), dense_contract(dense, x),
                                       rtol=1e-12, atol=1e-12)

    def test_homogeneity(self):
        # contract(t*x) = t^(m-1) contract(x)
        rng = np.random.default_rng(8)
        for _ in range(25):
            order = int(rng.integers(2, 6))
            dim = int(rng.integers(1, 5))
            t, _ = random_tensor(rng, order, dim)
            x = rng.standard_normal(dim)
            scale = float(rng.uniform(0.5, 2.0))
            left = t.contract(scale * x)
            right = scale ** (order - 1) * t.contract(x)
            np.testing.assert_allclose(left, right, rtol=1e-10, atol=1e-12)

    def test_dimension_mismatch(self):
        t = identity(3, 2)
        with pytest.raises(ValueError):
            t.contract(np.zeros(3))

    def test_empty_tensor(self):
        t = Tensor(4, 3, {})
        np.testing.assert_array_equal(t.contract(np.ones(3)), np.zeros(3))


class TestContractMatrix:

    def test_identity_tensor(self):
        t = identity(3, 2)
        np.testing.assert_allclose(t.contract_matrix(np.array([2.0, 3.0])),
                                   np.diag([2.0, 3.0]))

    def test_matches_dense_loop_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            order = int(rng.integers(2, 5))
            dim = int(rng.integers(1, 5))
            t, dense = random_tensor(rng, order, dim)
            x = rng.standard_normal(dim)
            np.testing.assert_allclose(t.contract_matrix(x),
                                       dense_contract_matrix(dense, x),
                                       rtol=1e-12, atol=1e-12)

    def test_order_two_returns_matrix_itself(self):
        rng = np.random.default_rng(10)
        dense = rng.standard_normal((3, 3))
        t = Tensor.from_dense(dense)
        np.testing.assert_array_equal(t.contract_matrix(rng.standard_normal(3)), dense)

    def test_zero_x_gives_zero_matrix(self):
        rng = np.random.default_rng(11)
        for order in (3, 4, 5):
            t, _ = random_tensor(rng, order, 3)
            np.testing.assert_array_equal(t.contract_matrix(np.zeros(3)),
                                          np.zeros((3, 3)))


class TestSymmetrized:

    def test_already_symmetric_unchanged(self):
        t = identity(4, 3)
        assert t.symmetrized() == t

    def test_two_entry_average(self):
        # a_{112} = 2 spreads to bar-a_{112} = bar-a_{121} = 1
        t = Tensor(3, 2, {(0, 0, 1): 2.0})
        bar = t.symmetrized()
        assert bar.value((0, 0, 1)) == 1.0
        assert bar.value((0, 1, 0)) == 1.0
        assert bar.nnz == 2

    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            order = int(rng.integers(2, 5))
            dim = int(rng.integers(1, 4))
            t, dense = random_tensor(rng, order, dim)
            np.testing.assert_allclose(t.symmetrized().to_dense(),
                                       dense_symmetrize(dense),
                                       rtol=1e-12, atol=1e-12)

    def test_preserves_polynomial_map(self):
        rng = np.random.default_rng(13)
        t, _ = random_tensor(rng, 4, 2)
        bar = t.symmetrized()
        for _ in range(100):
            x = rng.standard_normal(2)
            np.testing.assert_allclose(bar.contract(x), t.contract(x),
                                       rtol=1e-12, atol=1e-12)

    def test_invariant_under_tail_permutation(self):
        rng = np.random.default_rng(14)
        t, _ = random_tensor(rng, 4, 3)
        bar = t.symmetrized()
        for idx, v in bar.items():
            for perm in itertools.permutations(idx[1:]):
                assert math.isclose(bar.value((idx[0],) + perm), v,
                                    rel_tol=1e-12, abs_tol=1e-15)

    def test_cached(self):
        t = identity(3, 2)
        assert t.symmetrized() is t.symmetrized()


class TestJacobian:

    def test_identity_tensor(self):
        # d(x_i^2)/dx_i = 2 x_i
        t = identity(3, 2)
        np.testing.assert_allclose(t.jacobian(np.array([2.0, 3.0])),
                                   np.diag([4.0, 6.0]))

    def test_cubic_fixture(self):
        # map (x1^3, x2^3 - 0.5 x1^2 x2), Jacobian at (1,1) = [[3,0],[-1,2.5]]
        t = Tensor(4, 2, {(0, 0, 0, 0): 1.0, (1, 1, 1, 1): 1.0,
                          (0, 1, 0, 1): 1.0, (0, 1, 1, 0): -1.0,
                          (1, 0, 0, 1): -0.5})
        np.testing.assert_allclose(t.jacobian(np.array([1.0, 1.0])),
                                   [[3.0, 0.0], [-1.0, 2.5]], atol=1e-12)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(15)
        for _ in range(40):
            order = int(rng.integers(3, 5))
            dim = int(rng.integers(2, 6))
            t, _ = random_tensor(rng, order, dim)
            x = rng.standard_normal(dim)
            jac = t.jacobian(x)
            fd = fd_jacobian(t, x)
            scale = np.maximum(np.abs(jac), 1e-8)
            assert float(np.max(np.abs(fd - jac) / scale)) <= 1e-6


class TestSpectralRadius:

    def test_all_ones_order3(self):
        # (Bx^2)_i = (sum x)^2, so x = e is an eigenvector with value n^2
        for n in (2, 3, 4):
            dense = np.ones((n, n, n))
            est = spectral_radius(Tensor.from_dense(dense))
            assert est.converged
            assert abs(est.value - n * n) <= 1e-8
            assert est.lo - 1e-12 <= n * n <= est.hi + 1e-12

    def test_zero_tensor(self):
        est = spectral_radius(Tensor(3, 3, {}))
        assert est.converged
        assert est.value == 0.0

    def test_identity_tensor(self):
        est = spectral_radius(identity(3, 3))
        assert est.converged
        assert abs(est.value - 1.0) <= 1e-8

    def test_rejects_negative_entries(self):
        with pytest.raises(ValueError):
            spectral_radius(Tensor(3, 2, {(0, 0, 0): -1.0}))

    def test_bracket_consistency(self):
        # refining the tolerance must land inside the coarse bracket
        rng = np.random.default_rng(16)
        for _ in range(20):
            dense = rng.random((3, 3, 3))
            t = Tensor.from_dense(dense)
            coarse = spectral_radius(t, tol=1e-6)
            fine = spectral_radius(t, tol=1e-12)
            assert coarse.lo <= coarse.hi
            assert coarse.lo - 1e-9 <= fine.value <= coarse.hi + 1e-9

    def test_reducible_tensor_shift(self):
        # one-directional coupling stalls the plain iteration
        t = Tensor(3, 2, {(0, 0, 0): 2.0, (0, 1, 1): 1.0})
        est = spectral_radius(t)
        assert est.lo - 1e-6 <= 2.0 <= est.hi + 1e-6

    def test_diagonal_tensor_bracket(self):
        # reducible: the per-iterate ratios are pinned at the diagonal values,
        # so the bracket cannot close, but it must still contain rho = 5
        t = Tensor(3, 2, {(0, 0, 0): 3.0, (1, 1, 1): 5.0})
        est = spectral_radius(t)
        assert not est.converged
        assert est.lo - 1e-6 <= 5.0 <= est.hi + 1e-6
