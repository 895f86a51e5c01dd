import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoselect.kernel import (
    GramMatrix,
    KernelError,
    KernelSpec,
    SingularMatrixError,
    gram,
    inverse_diagonal,
    rescale,
    rounding_floor,
    spanning_factor,
    spectral_model,
    stable_inverse_apply,
    write_gram_csv,
)


class TestGramValues:
    def test_rbf_unit_distance(self):
        k = gram(KernelSpec("rbf", gamma=1.0), [[0.0, 0.0], [1.0, 0.0]])
        assert k.values[0, 1] == pytest.approx(0.36787944117144233, abs=1e-15)
        np.testing.assert_array_equal(np.diag(k.values), [1.0, 1.0])

    def test_cosine_orthogonal(self):
        k = gram(KernelSpec("cosine"), [[1.0, 0.0], [0.0, 2.0]])
        assert k.values[0, 1] == 0.0

    def test_cosine_zero_vector(self):
        with pytest.raises(KernelError, match="zero"):
            gram(KernelSpec("cosine"), [[0.0, 0.0], [1.0, 1.0]])

    def test_polynomial_closed_form(self):
        a, b = np.array([1.0, 2.0]), np.array([-1.0, 0.5])
        k = gram(KernelSpec("poly", degree=3, coef0=2.0), [a], [b])
        assert k.values[0, 0] == pytest.approx((a @ b + 2.0) ** 3, rel=1e-15)

    def test_linear(self, rng):
        x = rng.standard_normal((7, 3))
        np.testing.assert_allclose(gram(KernelSpec("linear"), x).values, x @ x.T, atol=1e-14)

    def test_scale(self, rng):
        x = rng.standard_normal((5, 2))
        spec = KernelSpec("rbf", gamma=0.3)
        np.testing.assert_allclose(
            gram(rescale(spec, 4.0), x).values, 4.0 * gram(spec, x).values, rtol=1e-15
        )

    def test_rectangular(self, rng):
        a, b = rng.standard_normal((4, 2)), rng.standard_normal((6, 2))
        assert gram(KernelSpec("rbf", gamma=1.0), a, b).shape == (4, 6)

    def test_dimension_mismatch(self):
        with pytest.raises(KernelError):
            gram(KernelSpec("linear"), np.ones((2, 2)), np.ones((2, 3)))

    def test_gamma_resolution(self):
        x = np.array([[0.0, 0.0], [2.0, 2.0]])
        spec = KernelSpec("rbf").resolve(x)
        # var over all entries is 1, d = 2
        assert spec.gamma == pytest.approx(0.5)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(family="laplace"), dict(gamma=-1.0), dict(scale=0.0), dict(family="poly", degree=0)],
    )
    def test_invalid_spec(self, kwargs):
        with pytest.raises(KernelError):
            KernelSpec(**kwargs)


@settings(max_examples=40, deadline=None)
@given(
    family=st.sampled_from(["linear", "rbf", "cosine", "polynomial"]),
    seed=st.integers(0, 2**31 - 1),
    n=st.integers(2, 25),
)
def test_gram_symmetric_psd(family, seed, n):
    x = np.random.default_rng(seed).standard_normal((n, 3))
    k = gram(KernelSpec(family, gamma=0.7), x).values
    assert np.array_equal(k, k.T)
    w = np.linalg.eigvalsh(k)
    assert w.min() >= -1e-9 * max(1.0, abs(w).max())


class TestSolve:
    def test_two_by_two_inverse(self):
        sol = stable_inverse_apply([[2.0, 1.0], [1.0, 2.0]], np.eye(2))
        np.testing.assert_allclose(sol.solution, [[2 / 3, -1 / 3], [-1 / 3, 2 / 3]], atol=1e-15)
        assert sol.jitter == 0.0

    def test_inverse_diagonal_closed_form(self):
        k = np.array([[1.0, 0.5], [0.5, 1.0]])
        np.testing.assert_allclose(inverse_diagonal(k), [4 / 3, 4 / 3], atol=1e-14)
        k3 = np.array([[2.0, 1.0], [1.0, 1.0]])
        # inverse [[1, -1], [-1, 2]]
        np.testing.assert_allclose(inverse_diagonal(k3), [1.0, 2.0], atol=1e-14)

    def test_duplicate_rows_need_jitter(self):
        x = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        k = gram(KernelSpec("rbf", gamma=1.0), x)
        assert k.jitter > 0
        sol = stable_inverse_apply(k, np.ones(3))
        assert np.all(np.isfinite(sol.solution)) and sol.jitter > 0

    def test_indefinite_fails_every_rung(self):
        with pytest.raises(SingularMatrixError, match="numerically singular K_SS"):
            stable_inverse_apply([[1.0, 2.0], [2.0, 1.0]], np.ones(2))

    def test_ill_conditioned_residual(self):
        # rank-deficient linear Gram: the ladder supplies a jitter
        x = np.random.default_rng(5).standard_normal((6, 2))
        k = gram(KernelSpec("linear"), x)
        sol = stable_inverse_apply(k, k.values[:, 0])
        assert sol.jitter > 0 and sol.residual < 1e-4


class TestSpanningFactor:
    def test_full_rank(self):
        keep, low = spanning_factor([[4.0, 2.0], [2.0, 3.0]])
        assert sorted(keep) == [0, 1]
        a = np.array([[4.0, 2.0], [2.0, 3.0]])[np.ix_(keep, keep)]
        np.testing.assert_allclose(low @ low.T, a, atol=1e-14)

    def test_duplicates_dropped(self):
        k = gram(KernelSpec("rbf", gamma=1.0), [[0.0], [0.0], [2.0]]).values
        keep, _ = spanning_factor(k)
        assert keep.size == 2 and 2 in keep

    def test_zero_block(self):
        keep, low = spanning_factor(np.zeros((3, 3)))
        assert keep.size == 0 and low.shape == (0, 0)

    def test_floor(self):
        assert rounding_floor([1.0, -4.0]) == 2 * np.finfo(float).eps * 4.0


class TestSpectral:
    def test_reconstructs_gram(self, rng):
        x = rng.standard_normal((30, 3))
        k = gram(KernelSpec("rbf", gamma=0.5), x)
        sp = spectral_model(k)
        n = k.n
        rebuilt = sp.eigenfunctions @ np.diag(sp.eigenvalues) @ sp.eigenfunctions.T
        np.testing.assert_allclose(rebuilt, k.values, atol=1e-9)
        # orthonormal under the empirical measure
        np.testing.assert_allclose(sp.eigenfunctions.T @ sp.eigenfunctions / n, np.eye(sp.rank), atol=1e-9)
        assert sp.trace == pytest.approx(1.0)
        assert sp.eigenvalues.sum() == pytest.approx(sp.trace, rel=1e-9)

    def test_truncation_keeps_trace(self, rng):
        x = rng.standard_normal((20, 2))
        k = gram(KernelSpec("linear"), x)
        sp = spectral_model(k, tol=1e-12)
        assert sp.rank == 2
        assert sp.trace == pytest.approx(np.trace(k.values) / 20)

    def test_diagonal_example(self):
        sp = spectral_model(GramMatrix(np.diag([4.0, 2.0])))
        np.testing.assert_allclose(sp.eigenvalues, [2.0, 1.0])
        np.testing.assert_allclose(np.abs(sp.eigenfunctions), math.sqrt(2) * np.eye(2))


def test_write_gram_csv(tmp_path):
    k = gram(KernelSpec("rbf", gamma=1.0), [[0.0], [1.0]])
    p = tmp_path / "g.csv"
    write_gram_csv(k, p)
    back = np.loadtxt(p, delimiter=",")
    np.testing.assert_array_equal(back, k.values)
