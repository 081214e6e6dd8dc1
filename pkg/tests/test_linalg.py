import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lace.errors import RangeError, ValidationError
from lace.linalg import (
    OrthonormalBasis,
    pca,
    pseudo_inverse,
    remove_projection,
    topk_svd,
)
from oracles import covariance_eigen_pca, gram_singular_values, normal_equations_pinv


def random_matrix(seed, m, n, scale=1.0):
    return scale * np.random.default_rng(seed).standard_normal((m, n))


class TestTopkSvd:
    def test_diagonal_matrix(self):
        res = topk_svd(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(res.sigma, [3.0, 2.0])
        np.testing.assert_allclose(np.abs(res.u), np.eye(3)[:, :2], atol=1e-12)

    def test_rank_one(self):
        res = topk_svd([[1.0, 0.0], [0.0, 0.0]], 1)
        np.testing.assert_allclose(res.sigma, [1.0])

    def test_eckart_young_against_gram_oracle(self):
        a = random_matrix(42, 6, 4)
        res = topk_svd(a, 2)
        residual = np.sum((a - res.reconstruct()) ** 2)
        sigma = gram_singular_values(a)
        expected = sigma[2] ** 2 + sigma[3] ** 2
        assert abs(residual - expected) <= 1e-9 * max(1.0, expected)

    def test_sign_convention(self):
        a = random_matrix(5, 8, 5)
        res = topk_svd(a, 3)
        for j in range(3):
            col = res.u[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_orthonormal_factors(self):
        a = random_matrix(1, 7, 5)
        res = topk_svd(a, 4)
        np.testing.assert_allclose(res.u.T @ res.u, np.eye(4), atol=1e-8)
        np.testing.assert_allclose(res.vt @ res.vt.T, np.eye(4), atol=1e-8)
        assert np.all(np.diff(res.sigma) <= 1e-12)
        assert np.all(res.sigma >= 0)

    def test_zero_matrix_pinned_basis(self):
        res = topk_svd(np.zeros((4, 3)), 2)
        np.testing.assert_array_equal(res.sigma, [0.0, 0.0])
        np.testing.assert_array_equal(res.u, np.eye(4)[:, :2])
        np.testing.assert_array_equal(res.vt, np.eye(3)[:2])

    def test_k_out_of_range(self):
        with pytest.raises(RangeError):
            topk_svd(np.eye(3), 4)
        with pytest.raises(RangeError):
            topk_svd(np.eye(3), 0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            topk_svd([[np.nan, 0.0], [0.0, 1.0]], 1)

    def test_deterministic_bitwise(self):
        a = random_matrix(9, 10, 6)
        r1, r2 = topk_svd(a, 3), topk_svd(a.copy(), 3)
        assert r1.u.tobytes() == r2.u.tobytes()
        assert r1.sigma.tobytes() == r2.sigma.tobytes()
        assert r1.vt.tobytes() == r2.vt.tobytes()

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 9), st.integers(2, 7), st.integers(0, 2**31))
    def test_eckart_young_property(self, m, n, seed):
        a = random_matrix(seed, m, n)
        k = min(m, n) // 2 + 1
        res = topk_svd(a, k)
        residual = np.sum((a - res.reconstruct()) ** 2)
        expected = np.sum(gram_singular_values(a)[k:] ** 2)
        assert abs(residual - expected) <= 1e-8 * max(1.0, np.sum(a**2))


class TestPseudoInverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-12)

    def test_zero_singular_value_zeroed(self):
        np.testing.assert_allclose(
            pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-12
        )

    def test_against_normal_equations_oracle(self):
        a = random_matrix(7, 4, 3)
        expected = normal_equations_pinv(a)
        np.testing.assert_allclose(pseudo_inverse(a), expected, atol=1e-7)

    def test_tol_must_be_positive(self):
        with pytest.raises(RangeError):
            pseudo_inverse(np.eye(2), tol=0.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValidationError):
            pseudo_inverse([[np.inf, 0.0]])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
    def test_moore_penrose_identities(self, m, n, seed):
        a = random_matrix(seed, m, n)
        plus = pseudo_inverse(a)
        scale = max(1.0, np.abs(a).max())
        assert np.abs(a @ plus @ a - a).max() <= 1e-8 * scale
        assert np.abs(plus @ a @ plus - plus).max() <= 1e-8 * scale
        assert np.abs((a @ plus).T - a @ plus).max() <= 1e-8 * scale
        assert np.abs((plus @ a).T - plus @ a).max() <= 1e-8 * scale


class TestRemoveProjection:
    def test_axis_projection(self):
        basis = OrthonormalBasis(np.array([[1.0], [0.0]]))
        np.testing.assert_allclose(remove_projection(basis, [3.0, 4.0]), [0.0, 4.0])

    def test_rank_zero_is_identity(self):
        basis = OrthonormalBasis.empty(3)
        e = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(remove_projection(basis, e), e)

    def test_orthogonality_of_residual(self, rng):
        basis = OrthonormalBasis(np.linalg.qr(rng.standard_normal((8, 3)))[0])
        e = rng.standard_normal(8)
        residual = remove_projection(basis, e)
        for j in range(3):
            assert abs(residual @ basis.columns[:, j]) <= 1e-10

    def test_dimension_mismatch(self):
        basis = OrthonormalBasis(np.eye(3)[:, :1])
        with pytest.raises(ValidationError):
            remove_projection(basis, [1.0, 2.0])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 10), st.integers(0, 2**31))
    def test_idempotent_linear_pythagoras(self, d, seed):
        rng = np.random.default_rng(seed)
        r = rng.integers(1, d)
        basis = OrthonormalBasis(np.linalg.qr(rng.standard_normal((d, int(r))))[0])
        e = rng.standard_normal(d)
        once = remove_projection(basis, e)
        twice = remove_projection(basis, once)
        np.testing.assert_allclose(twice, once, atol=1e-8)
        projection = e - once
        assert abs(e @ e - (projection @ projection + once @ once)) <= 1e-8 * max(1.0, e @ e)
        # linearity
        f = rng.standard_normal(d)
        lhs = remove_projection(basis, 2.0 * e + f)
        rhs = 2.0 * once + remove_projection(basis, f)
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)


class TestOrthonormalBasis:
    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValidationError):
            OrthonormalBasis(np.array([[1.0, 1.0], [0.0, 0.0]]))

    def test_rejects_rank_above_dim(self):
        with pytest.raises(RangeError):
            OrthonormalBasis(np.eye(2, 3))


class TestPca:
    def test_collinear_data(self):
        t = np.linspace(-2, 2, 30)
        x = np.column_stack([t, 2 * t])
        res = pca(x, 1)
        direction = res.components.columns[:, 0]
        expected = np.array([1.0, 2.0]) / np.sqrt(5.0)
        assert min(np.linalg.norm(direction - expected),
                   np.linalg.norm(direction + expected)) <= 1e-8
        assert res.explained_variance[0] >= 0.999 * res.explained_variance.sum()

    def test_axis_aligned_variances(self, rng):
        x = np.column_stack([2.0 * rng.standard_normal(400), rng.standard_normal(400)])
        x -= x.mean(axis=0)
        res = pca(x, 2)
        sample_cov = x.T @ x / (x.shape[0] - 1)
        expected = np.sort(np.linalg.eigvalsh(sample_cov))[::-1]
        np.testing.assert_allclose(res.explained_variance, expected, rtol=1e-8)

    def test_against_covariance_eigen_oracle(self):
        x = random_matrix(3, 50, 5)
        res = pca(x, 2)
        components, coords, variances = covariance_eigen_pca(x, 2)
        np.testing.assert_allclose(res.explained_variance, variances, rtol=1e-8)
        for j in range(2):
            sign = np.sign(components[:, j] @ res.components.columns[:, j])
            np.testing.assert_allclose(
                res.components.columns[:, j], sign * components[:, j], atol=1e-8
            )
            np.testing.assert_allclose(res.coords[:, j], sign * coords[:, j], atol=1e-8)

    def test_k_out_of_range(self):
        with pytest.raises(RangeError):
            pca(np.eye(3), 3)  # limit is rows - 1 = 2
        with pytest.raises(RangeError):
            pca(np.eye(3)[:1], 1)
