"""Multilinear algebra primitives: mode products, unfolding, Kronecker."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorcs import tensor_ops as to


def small_tensors(max_order=3, max_dim=4):
    dims = st.lists(st.integers(1, max_dim), min_size=1, max_size=max_order)
    return dims.flatmap(
        lambda d: st.builds(
            lambda seed: np.random.default_rng(seed).standard_normal(d),
            st.integers(0, 2**31),
        )
    )


class TestModeProduct:
    def test_identity_leaves_tensor_unchanged(self, rng):
        x = rng.standard_normal((2, 2))
        assert np.array_equal(to.mode_product(x, np.eye(2), 0), x)

    def test_row_of_ones_gives_column_sums(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = to.mode_product(x, np.array([[1.0, 1.0]]), 0)
        assert np.allclose(out, [[4.0, 6.0]])

    def test_two_mode_products_match_matrix_sandwich(self, rng):
        x = rng.standard_normal((3, 4))
        u1 = rng.standard_normal((2, 3))
        u2 = rng.standard_normal((5, 4))
        out = to.mode_product(to.mode_product(x, u1, 0), u2, 1)
        assert np.allclose(out, u1 @ x @ u2.T, atol=1e-12)

    def test_dimension_mismatch_rejected(self, rng):
        x = rng.standard_normal((3, 4))
        with pytest.raises(ValueError):
            to.mode_product(x, rng.standard_normal((2, 5)), 0)

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_linearity_in_tensor_argument(self, seed):
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((3, 4, 2))
        y = gen.standard_normal((3, 4, 2))
        u = gen.standard_normal((5, 4))
        a, b = gen.standard_normal(2)
        lhs = to.mode_product(a * x + b * y, u, 1)
        rhs = a * to.mode_product(x, u, 1) + b * to.mode_product(y, u, 1)
        scale = max(1.0, np.abs(lhs).max())
        assert np.allclose(lhs, rhs, atol=1e-12 * scale)

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_products_on_distinct_modes_commute(self, seed):
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((3, 4, 2))
        u = gen.standard_normal((5, 3))
        v = gen.standard_normal((6, 2))
        lhs = to.mode_product(to.mode_product(x, u, 0), v, 2)
        rhs = to.mode_product(to.mode_product(x, v, 2), u, 0)
        scale = max(1.0, np.abs(lhs).max())
        assert np.allclose(lhs, rhs, atol=1e-12 * scale)


class TestUnfoldFold:
    def test_mode1_unfolding_of_counting_tensor(self):
        # x[i1, i2, i3] = i1 + 2*i2 + 4*i3 + 1 with zero-based indices:
        # the first index varies fastest in the flat layout, so the mode-0
        # unfolding lists fibers in increasing linear order.
        x = np.arange(1, 9).reshape((2, 2, 2), order="F").astype(float)
        expected = np.array([[1.0, 3.0, 5.0, 7.0], [2.0, 4.0, 6.0, 8.0]])
        assert np.array_equal(to.unfold(x, 0), expected)

    def test_fold_inverts_the_counting_example(self):
        x = np.arange(1, 9).reshape((2, 2, 2), order="F").astype(float)
        m = np.array([[1.0, 3.0, 5.0, 7.0], [2.0, 4.0, 6.0, 8.0]])
        assert np.array_equal(to.fold(m, 0, (2, 2, 2)), x)

    def test_one_mode_tensor_unfolds_to_column(self):
        v = np.array([1.0, 2.0, 3.0])
        assert to.unfold(v, 0).shape == (3, 1)

    def test_fold_rejects_wrong_column_count(self, rng):
        m = rng.standard_normal((3, 5))
        with pytest.raises(ValueError):
            to.fold(m, 0, (3, 4, 2))

    def test_invalid_mode_rejected(self, rng):
        with pytest.raises(ValueError):
            to.unfold(rng.standard_normal((3, 4)), 2)

    @given(x=small_tensors())
    @settings(max_examples=40, deadline=None)
    def test_round_trip_all_modes(self, x):
        for i in range(x.ndim):
            assert np.array_equal(to.fold(to.unfold(x, i), i, x.shape), x)


class TestKronecker:
    def test_identity_kron_gives_block_diagonal(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = to.kronecker(np.eye(2), b)
        expected = np.block([[b, np.zeros((2, 2))], [np.zeros((2, 2)), b]])
        assert np.array_equal(out, expected)

    def test_scalar_kron_scales(self):
        b = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(to.kronecker(np.array([[2.0]]), b), 2 * b)

    def test_unfolding_identity_three_modes(self, rng):
        """unfold(X x1 U1 x2 U2 x3 U3, i) == U_i unfold(X, i) K^T where K
        chains the remaining factor matrices in decreasing mode order."""
        x = rng.standard_normal((3, 3, 3))
        us = [rng.standard_normal((4, 3)) for _ in range(3)]
        y = x
        for i, u in enumerate(us):
            y = to.mode_product(y, u, i)
        for i in range(3):
            rest = [us[j] for j in reversed(range(3)) if j != i]
            rhs = us[i] @ to.unfold(x, i) @ to.kron_chain(rest).T
            lhs = to.unfold(y, i)
            assert np.allclose(lhs, rhs, atol=1e-10 * max(1.0, np.abs(rhs).max()))

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_unfolding_identity_random_shapes(self, seed):
        gen = np.random.default_rng(seed)
        dims = tuple(gen.integers(2, 5, size=3))
        ms = tuple(gen.integers(1, 4, size=3))
        x = gen.standard_normal(dims)
        us = [gen.standard_normal((m, n)) for m, n in zip(ms, dims)]
        y = x
        for i, u in enumerate(us):
            y = to.mode_product(y, u, i)
        for i in range(3):
            rest = [us[j] for j in reversed(range(3)) if j != i]
            rhs = us[i] @ to.unfold(x, i) @ to.kron_chain(rest).T
            assert np.allclose(to.unfold(y, i), rhs,
                               atol=1e-10 * max(1.0, np.abs(rhs).max()))


class TestOuter:
    def test_two_vector_outer_is_rank_one_matrix(self, rng):
        u = rng.standard_normal(3)
        v = rng.standard_normal(4)
        assert np.allclose(to.outer([u, v]), np.outer(u, v))

    def test_basis_vectors_give_single_one(self):
        e = np.eye(3)
        out = to.outer([e[0], e[1], e[2]])
        assert out[0, 1, 2] == 1.0
        assert np.count_nonzero(out) == 1

    def test_norm_factors_through_outer_product(self, rng):
        u, v, w = (rng.standard_normal(n) for n in (3, 4, 5))
        lhs = to.frobenius_norm(to.outer([u, v, w]))
        rhs = np.linalg.norm(u) * np.linalg.norm(v) * np.linalg.norm(w)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            to.outer([])


class TestNorms:
    def test_l2_of_three_four(self):
        assert to.l2_norm([3.0, 4.0]) == pytest.approx(5.0)

    def test_l1_with_signs(self):
        assert to.l1_norm([1.0, -2.0, 3.0]) == pytest.approx(6.0)

    def test_frobenius_equals_root_sum_of_squared_singular_values(self, rng):
        from tensorcs.decomp import svd

        a = rng.standard_normal((4, 3))
        s = svd(a).singular_values
        assert to.frobenius_norm(a) == pytest.approx(
            np.sqrt(np.sum(s**2)), rel=1e-10
        )

    def test_count_nonzeros_uses_tolerance(self):
        x = np.array([0.0, 1e-12, 0.5, -2.0])
        assert to.count_nonzeros(x) == 2
        assert to.count_nonzeros(x, tol=1e-13) == 3
