"""SVD, low-rank approximation, and the weak tensor decomposition."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorcs import decomp
from tensorcs import tensor_ops as to
from conftest import plant_sparse


def power_iteration_norm(a, iters=500, seed=0):
    """Independent spectral-norm estimate used as an oracle for sigma_1."""
    gen = np.random.default_rng(seed)
    v = gen.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = a.T @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(a @ v))


class TestSvd:
    def test_diagonal_matrix(self):
        res = decomp.svd(np.diag([3.0, 0.0]))
        assert np.allclose(res.singular_values, [3.0])
        assert abs(res.left_vectors[0, 0]) == pytest.approx(1.0)
        assert abs(res.right_vectors[0, 0]) == pytest.approx(1.0)

    def test_defining_identities_random(self, rng):
        a = rng.standard_normal((5, 7))
        res = decomp.svd(a)
        u, s, v = res.left_vectors, res.singular_values, res.right_vectors
        assert np.all(np.diff(s) <= 1e-12)
        assert np.allclose(a @ v, u * s, atol=1e-10)
        assert np.allclose(a.T @ u, v * s, atol=1e-10)
        assert np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-10)
        assert np.allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-10)

    def test_reconstruction(self, rng):
        a = rng.standard_normal((5, 7))
        res = decomp.svd(a)
        assert np.linalg.norm(res.reconstruct() - a) <= 1e-10 * np.linalg.norm(a)

    def test_sigma1_matches_power_iteration(self, rng):
        a = rng.standard_normal((6, 6))
        res = decomp.svd(a)
        assert res.singular_values[0] == pytest.approx(
            power_iteration_norm(a), rel=1e-8
        )

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            decomp.svd(np.array([[1.0, np.nan]]))

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_agrees_with_reference_spectrum(self, seed):
        gen = np.random.default_rng(seed)
        a = gen.standard_normal((gen.integers(2, 7), gen.integers(2, 7)))
        mine = decomp.svd(a).singular_values
        ref = np.linalg.svd(a, compute_uv=False)
        ref = ref[ref > ref[0] * 1e-12]
        assert np.allclose(mine, ref, atol=1e-10 * max(1.0, ref[0]))


class TestBestRankK:
    def test_keeps_dominant_direction(self):
        out = decomp.best_rank_k(np.diag([3.0, 1.0]), 1)
        assert np.allclose(out, np.diag([3.0, 0.0]), atol=1e-12)

    def test_spectral_error_is_next_singular_value(self, rng):
        a = rng.standard_normal((6, 6))
        s = decomp.svd(a).singular_values
        for k in (1, 3):
            err = np.linalg.norm(a - decomp.best_rank_k(a, k), ord=2)
            assert err == pytest.approx(s[k], rel=1e-8)

    def test_k_at_least_rank_returns_input(self, rng):
        a = rng.standard_normal((4, 3))
        assert np.array_equal(decomp.best_rank_k(a, 3), a)

    def test_k_below_one_rejected(self, rng):
        with pytest.raises(ValueError):
            decomp.best_rank_k(rng.standard_normal((3, 3)), 0)

    def test_eckart_young_lower_bound(self, rng):
        a = rng.standard_normal((6, 6))
        ak = decomp.best_rank_k(a, 2)
        best = np.linalg.norm(a - ak)
        for _ in range(20):
            b = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 6))
            assert np.linalg.norm(a - b) >= best - 1e-9


class TestNumericalRank:
    def test_counts_above_threshold(self):
        a = np.diag([3.0, 1.0, 0.01])
        assert decomp.numerical_rank(a, 0.5) == 2

    def test_zero_threshold_full_rank(self, rng):
        a = rng.standard_normal((4, 6))
        assert decomp.numerical_rank(a, 0.0) == 4

    def test_zero_matrix(self):
        assert decomp.numerical_rank(np.zeros((3, 3)), 0.1) == 0


class TestRankDecomposeMatrix:
    def test_rank_one(self, rng):
        u, v = rng.standard_normal(4), rng.standard_normal(5)
        dec = decomp.rank_decompose_matrix(np.outer(u, v))
        assert dec.term_count == 1

    def test_zero_matrix(self):
        assert decomp.rank_decompose_matrix(np.zeros((3, 4))).term_count == 0

    def test_rank_two_reconstruction(self, rng):
        y = (np.outer(rng.standard_normal(5), rng.standard_normal(5))
             + np.outer(rng.standard_normal(5), rng.standard_normal(5)))
        dec = decomp.rank_decompose_matrix(y)
        assert dec.term_count == 2
        assert np.allclose(dec.reconstruct(y.shape), y, atol=1e-10)

    def test_balanced_factor_scaling(self, rng):
        # Left and right factors carry sqrt(sigma) each.
        u, v = rng.standard_normal(4), rng.standard_normal(4)
        dec = decomp.rank_decompose_matrix(np.outer(u, v))
        left, right = dec.factors[0]
        assert np.linalg.norm(left) == pytest.approx(np.linalg.norm(right), rel=1e-10)


class TestWeakTucker:
    def test_rank_one_tensor(self, rng):
        u, v, w = (rng.standard_normal(n) for n in (3, 4, 5))
        y = to.outer([u, v, w])
        dec = decomp.weak_tucker_decompose(y)
        assert dec.term_count == 1
        assert np.allclose(dec.reconstruct(y.shape), y, atol=1e-10)

    def test_zero_tensor(self):
        assert decomp.weak_tucker_decompose(np.zeros((2, 3, 4))).term_count == 0

    def test_sum_of_two_rank_one_terms(self, rng):
        y = sum(
            to.outer([rng.standard_normal(4) for _ in range(3)]) for _ in range(2)
        )
        dec = decomp.weak_tucker_decompose(y)
        assert dec.term_count <= 4
        err = np.linalg.norm(dec.reconstruct(y.shape) - y)
        assert err <= 1e-8 * np.linalg.norm(y)

    def test_one_mode_rejected(self):
        with pytest.raises(ValueError):
            decomp.weak_tucker_decompose(np.ones(4))

    def test_sparse_tensor_has_sparse_factors_and_bounded_terms(self, rng):
        k = 3
        x = plant_sparse((5, 5, 5), k, rng)
        dec = decomp.weak_tucker_decompose(x)
        assert dec.term_count <= k ** 2
        scale = max(np.linalg.norm(np.concatenate(t)) for t in dec.factors)
        for term in dec.factors:
            for vec in term:
                assert np.sum(np.abs(vec) > 1e-8 * scale) <= k

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=15, deadline=None)
    def test_reconstruction_property(self, seed):
        gen = np.random.default_rng(seed)
        y = gen.standard_normal((3, 4, 3))
        dec = decomp.weak_tucker_decompose(y)
        err = np.linalg.norm(dec.reconstruct(y.shape) - y)
        assert err <= 1e-8 * max(1.0, np.linalg.norm(y))


class TestCoreTucker:
    def test_identity_bases_give_back_tensor(self, rng):
        x = rng.standard_normal((3, 4, 2))
        xi = decomp.core_tucker_coefficients(x, [np.eye(3), np.eye(4), np.eye(2)])
        assert np.allclose(xi, x, atol=1e-10)

    def test_rank_one_with_own_factors(self, rng):
        u, v = rng.standard_normal(4), rng.standard_normal(5)
        x = np.outer(u, v)
        xi = decomp.core_tucker_coefficients(
            x, [u.reshape(-1, 1), v.reshape(-1, 1)]
        )
        assert xi.shape == (1, 1)
        assert xi[0, 0] == pytest.approx(1.0, rel=1e-10)

    def test_svd_bases_round_trip(self, rng):
        x = rng.standard_normal((3, 3, 3))
        bases = [decomp.svd(to.unfold(x, i)).left_vectors for i in range(3)]
        xi = decomp.core_tucker_coefficients(x, bases)
        back = xi
        for i, b in enumerate(bases):
            back = to.mode_product(back, b, i)
        assert np.linalg.norm(back - x) <= 1e-8 * np.linalg.norm(x)

    def test_non_spanning_basis_rejected(self, rng):
        x = rng.standard_normal((4, 4))
        bad = rng.standard_normal((4, 1))
        with pytest.raises(ValueError):
            decomp.core_tucker_coefficients(x, [bad, np.eye(4)])
