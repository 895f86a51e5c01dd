import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoselect.data import DataError, Dataset, LogisticProblem, SelectionMask, make_gaussian_mixture
from infoselect.evaluate import (
    SWEEP_COLUMNS,
    knn_classify,
    neighbors_estimate,
    parse_strategy,
    records_to_csv,
    run_sweep,
    spearman,
    theorem1_ratio_check,
)
from infoselect.kernel import KernelSpec

LINE3 = np.array([[0.0], [1.0], [2.0]])


class TestNeighbors:
    def test_equidistant_goes_to_lower_index(self):
        est = neighbors_estimate(LINE3, SelectionMask([0, 2], 3), [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(est.probs, [[1, 0], [1, 0], [0, 1]])

    def test_selected_keep_their_row(self, rng):
        x = rng.standard_normal((10, 2))
        rows = rng.dirichlet([1, 1], 3)
        est = neighbors_estimate(x, SelectionMask([2, 5, 9], 10), rows)
        np.testing.assert_array_equal(est.probs[[2, 5, 9]], rows)

    def test_row_count_checked(self):
        with pytest.raises(DataError):
            neighbors_estimate(LINE3, SelectionMask([0], 3), [[0.5, 0.5], [0.5, 0.5]])


class TestKnn:
    def test_tie_by_lower_index(self):
        pred, post = knn_classify(LINE3, SelectionMask([0, 2], 3), [0, 9, 1], k=1)
        assert list(pred) == [0, 0, 1]

    def test_vote_tie_to_lower_class(self):
        x = np.array([[0.0], [1.0], [-1.0]])
        pred, post = knn_classify(x, SelectionMask([1, 2], 3), [0, 1, 0], k=2, class_count=2)
        assert pred[0] == 0
        np.testing.assert_array_equal(post.probs[0], [0.5, 0.5])

    def test_labels_for_selected_only(self, rng):
        x = rng.standard_normal((20, 2))
        y = rng.integers(0, 3, 20)
        mask = SelectionMask([1, 3, 8, 11, 15], 20)
        a, _ = knn_classify(x, mask, y, k=3, class_count=3)
        b, _ = knn_classify(x, mask, y[mask.indices()], k=3, class_count=3)
        np.testing.assert_array_equal(a, b)

    def test_k_range(self):
        with pytest.raises(DataError):
            knn_classify(LINE3, SelectionMask([0], 3), [0, 1, 0], k=2)


class TestSpearman:
    def test_worked_example(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
        assert spearman([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)

    def test_against_closed_form(self, rng):
        a, b = rng.standard_normal(30), rng.standard_normal(30)
        ra, rb = np.argsort(np.argsort(a)), np.argsort(np.argsort(b))
        n = 30
        want = 1 - 6 * np.sum((ra - rb) ** 2) / (n * (n * n - 1))
        assert spearman(a, b) == pytest.approx(want, abs=1e-12)

    def test_constant_rejected(self):
        with pytest.raises(DataError):
            spearman([1, 1, 1], [1, 2, 3])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3, allow_subnormal=False), min_size=3, max_size=30, unique=True))
    def test_monotone_transform(self, xs):
        a = np.array(xs)
        assert spearman(a, a**3 + 2 * a) == pytest.approx(1.0)
        assert spearman(a, -a) == pytest.approx(-1.0)


def test_ratio_check_shapes():
    out = theorem1_ratio_check(LogisticProblem(2.0, 300), [4, 8, 16])
    zs = [z for z, _ in out]
    assert all(b < a for a, b in zip(zs, zs[1:]))
    assert all(r >= 0 for _, r in out)


def test_ratio_check_constant_posterior():
    out = theorem1_ratio_check(LogisticProblem(0.0, 200), [2, 8, 32])
    assert [r for _, r in out] == [0.0, 0.0, 0.0]


def test_parse_strategy():
    assert parse_strategy("mixed:0.25") == ("mixed", 0.25)
    assert parse_strategy("facility") == ("facility", None)


@pytest.fixture(scope="module")
def mixture():
    return make_gaussian_mixture(1, 40, [[0, 0], [2.5, 0]], 0.8)


class TestSweep:
    def test_layout(self, mixture):
        ds, truth = mixture
        recs = run_sweep(ds, KernelSpec("rbf", gamma=0.5), ["random", "ted-greedy", "mixed:0.5"],
                         [0.2, 0.1], seed=3, truth=truth)
        assert [(r.strategy_id, r.fraction) for r in recs] == [
            (s, f) for s in ("random", "ted-greedy", "mixed:0.5") for f in (0.1, 0.2)
        ]
        assert all(r.m == round(r.fraction * ds.n) for r in recs)
        for r in recs:
            assert 0 <= r.error_rate <= 1
            assert r.delta_tv <= r.bound_total + 1e-6
        rows = list(csv.reader(io.StringIO(records_to_csv(recs))))
        assert tuple(rows[0]) == SWEEP_COLUMNS and len(rows) == 7

    def test_full_fraction(self, mixture):
        ds, _ = mixture
        recs = run_sweep(ds, KernelSpec("rbf", gamma=0.5), ["facility"], [1.0])
        assert recs[0].empty_unlabelled and recs[0].error_rate == 0.0
        assert recs[0].ted_half_trace == 0.0

    def test_uncertainty_strategy(self, mixture):
        ds, _ = mixture
        recs = run_sweep(ds, KernelSpec("rbf", gamma=0.5), ["uncertainty"], [0.25])
        assert recs[0].m == 20

    def test_errors(self, mixture):
        ds, _ = mixture
        with pytest.raises(DataError):
            run_sweep(ds, KernelSpec("rbf"), ["bogus"], [0.1])
        with pytest.raises(DataError):
            run_sweep(ds, KernelSpec("rbf"), ["random"], [0.0])
        with pytest.raises(DataError):
            run_sweep(Dataset(ds.features), KernelSpec("rbf"), ["random"], [0.1])

    def test_deterministic(self, mixture):
        ds, truth = mixture
        args = (ds, KernelSpec("rbf", gamma=0.5), ["random", "mixed:0.25", "uncertainty"], [0.1, 0.3], 7, truth)
        assert records_to_csv(run_sweep(*args)) == records_to_csv(run_sweep(*args))
