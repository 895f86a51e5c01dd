"""Estimators and the sweep harness that relates selection quality to error."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from . import _backend
from .approx import bound_report, power_profile, projection_estimate
from .data import ConditionalDistribution, DataError, Dataset, LogisticProblem, SelectionMask, conditional_total_variation
from .kernel import KernelSpec, gram, spectral_model
from .select import (
    SelectionResult,
    facility_location_value,
    mix_with_random,
    select_facility_location,
    select_inverse_diagonal,
    select_random,
    select_ted_greedy,
    select_ted_sequential,
    select_uncertainty,
)

SWEEP_COLUMNS = (
    "strategy",
    "fraction",
    "m",
    "ted_half_trace",
    "facility_value",
    "error_rate",
    "delta_tv",
    "bound_total",
)
DEFAULT_FRACTIONS = tuple(round(0.05 * i, 2) for i in range(1, 19))


def neighbors_estimate(features, mask: SelectionMask, p_at_s) -> ConditionalDistribution:
    """Copy each point's conditional row from its nearest selected point."""
    if mask.m == 0:
        raise DataError("selection must be nonempty")
    x = np.atleast_2d(np.asarray(features, dtype=float))
    rows = p_at_s.probs if isinstance(p_at_s, ConditionalDistribution) else np.asarray(p_at_s, dtype=float)
    if rows.shape[0] != mask.m:
        raise DataError("need one conditional row per selected point")
    sel = mask.indices()
    assign, _ = _backend.nearest_selected(x, sel)
    pos = np.searchsorted(sel, assign)
    return ConditionalDistribution(rows[pos])


def knn_classify(features, mask: SelectionMask, labels, k: int = 5, class_count: int | None = None):
    """k-nearest-selected-neighbor vote.

    ``labels`` holds labels for every point (only the selected ones are
    read) or for the selected points only. Returns (predictions,
    posterior) where the posterior holds vote fractions.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    sel = mask.indices()
    if not 1 <= k <= sel.size:
        raise DataError("k must lie between 1 and the number of selected points")
    labels = np.asarray(labels, dtype=np.int64)
    y_sel = labels if labels.size == sel.size and labels.size != x.shape[0] else labels[sel]
    if class_count is None:
        class_count = max(2, int(y_sel.max()) + 1)
    votes = np.zeros((x.shape[0], class_count))
    step = max(1, (1 << 22) // sel.size)
    for start in range(0, x.shape[0], step):
        d = cdist(x[start:start + step], x[sel])
        # stable sort: equal distances resolve to the lower selected index
        nn = np.argsort(d, axis=1, kind="stable")[:, :k]
        rows = np.arange(d.shape[0])[:, None]
        np.add.at(votes[start:start + step], (np.broadcast_to(rows, nn.shape), y_sel[nn]), 1.0)
    post = votes / k
    # argmax takes the first maximum, i.e. the lower class id on vote ties
    return np.argmax(votes, axis=1), ConditionalDistribution(post)


def spearman(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties."""
    a = np.asarray(xs, dtype=float)
    b = np.asarray(ys, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("inputs must be 1-D and equally long")
    if a.size < 3:
        raise DataError("need at least 3 points")
    ra, rb = rankdata(a), rankdata(b)
    if np.ptp(ra) == 0 or np.ptp(rb) == 0:
        raise DataError("spearman undefined for a constant vector")
    return float(np.clip(np.corrcoef(ra, rb)[0, 1], -1.0, 1.0))


def theorem1_ratio_check(problem: LogisticProblem, sizes) -> list[tuple[float, float]]:
    """Conditional TV of the neighbors estimator relative to Z(S).

    For each size m, selects greedily by facility location, copies the
    exact posterior from the nearest selected point, and returns
    (Z(S), delta_tv / Z(S)). A zero Z(S) yields ratio 0.
    """
    ds, p = problem.sample()
    sizes = [int(m) for m in sizes]
    res = select_facility_location(ds.features, max(sizes))
    out = []
    for m in sizes:
        mask = res.mask(ds.n, m)
        z = facility_location_value(ds.features, mask)
        est = neighbors_estimate(ds.features, mask, p.probs[mask.indices()])
        tv = conditional_total_variation(p, est)
        out.append((z, tv / z if z > 0 else 0.0))
    return out


@dataclass
class SweepRecord:
    fraction: float
    m: int
    strategy_id: str
    ted_half_trace: float
    facility_value: float
    error_rate: float
    delta_tv: float | None = None
    bound_total: float | None = None
    empty_unlabelled: bool = False

    def row(self) -> list[str]:
        def fmt(v):
            return "" if v is None else format(float(v), ".17g")

        return [
            self.strategy_id,
            fmt(self.fraction),
            str(self.m),
            fmt(self.ted_half_trace),
            fmt(self.facility_value),
            fmt(self.error_rate),
            fmt(self.delta_tv),
            fmt(self.bound_total),
        ]


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def _ranking(strategy: str, ds: Dataset, k, m_max: int, seed: int, params: dict) -> SelectionResult | None:
    """Nested strategies: one run at the largest size, prefixes give the rest."""
    n = ds.n
    if strategy == "random":
        return select_random(n, n, seed)
    if strategy == "facility":
        return select_facility_location(ds.features, m_max)
    if strategy == "ted-greedy":
        return select_ted_greedy(k, m_max, params.get("ridge", 0.0))
    if strategy == "ted-sequential":
        return select_ted_sequential(
            k, n, params.get("ted_gamma", 1.0), params.get("c", 1.0),
            params.get("max_iter", 100), params.get("tol", 1e-6),
        )
    if strategy in ("inverse-diagonal", "inverse") or strategy.startswith("mixed"):
        return select_inverse_diagonal(k, n)
    return None


def _uncertainty_order(ds: Dataset, m: int, seed: int, knn_k: int) -> list[int]:
    """Random seed half, then the most uncertain points under k-NN trained on it."""
    m0 = max(1, math.ceil(m / 2))
    seed_part = select_random(ds.n, m0, seed).order
    if m0 == m:
        return seed_part
    mask = SelectionMask(seed_part, ds.n)
    _, post = knn_classify(ds.features, mask, ds.labels, min(knn_k, m0), ds.class_count)
    rest = np.setdiff1d(np.arange(ds.n), seed_part)
    picks = select_uncertainty(ConditionalDistribution(post.probs[rest]), m - m0).order
    return seed_part + [int(rest[i]) for i in picks]


def parse_strategy(name: str):
    """Split ``mixed:0.25`` into ("mixed", 0.25)."""
    if ":" in name:
        base, ratio = name.split(":", 1)
        return base, float(ratio)
    return name, None


def run_sweep(
    dataset: Dataset,
    kernel_spec: KernelSpec,
    strategies,
    fractions=DEFAULT_FRACTIONS,
    seed: int = 0,
    truth: ConditionalDistribution | None = None,
    knn_k: int = 5,
    params: dict | None = None,
) -> list[SweepRecord]:
    """Evaluate each (strategy, fraction) cell.

    Strategy names: random, facility, ted-greedy, ted-sequential,
    inverse-diagonal, uncertainty, and ``mixed:<ratio>`` (that share of
    the budget from the inverse-diagonal ranking, the rest random).
    Records come out ordered by strategy (as given) then fraction
    (ascending). With ``truth`` given, each record also carries the
    conditional TV of the clamped projection estimator and the bound.
    """
    if dataset.labels is None:
        raise DataError("sweep requires labels")
    params = dict(params or {})
    params.setdefault("c", kernel_spec.scale)
    n = dataset.n
    spec = kernel_spec.resolve(dataset.features)
    k = gram(spec, dataset.features)
    fractions = sorted(float(f) for f in fractions)
    for f in fractions:
        if not 0 < f <= 1:
            raise DataError("fractions must lie in (0, 1]")
    sizes = [max(1, min(n, int(round(f * n)))) for f in fractions]
    spectrum = spectral_model(k) if truth is not None else None

    records = []
    for name in strategies:
        base, ratio = parse_strategy(name)
        ranked = _ranking(base, dataset, k, max(sizes), seed, params)
        if ranked is None and base != "uncertainty":
            raise DataError(f"unknown strategy {name!r}")
        for f, m in zip(fractions, sizes):
            if base == "uncertainty":
                order = _uncertainty_order(dataset, m, seed, knn_k)
            elif base == "mixed":
                order = mix_with_random(ranked, n, m, ratio if ratio is not None else 1.0, seed).order
            else:
                order = ranked.order[:m]
            records.append(_evaluate_cell(dataset, k, SelectionMask(order, n), name, f, spectrum, truth, knn_k))
    return records


def _evaluate_cell(ds, k, mask, name, fraction, spectrum, truth, knn_k) -> SweepRecord:
    th = float(np.sum(power_profile(k, mask).values))
    fv = facility_location_value(ds.features, mask)
    unl = mask.complement()
    empty = unl.size == 0
    if empty:
        err = 0.0
    else:
        pred, _ = knn_classify(ds.features, mask, ds.labels, min(knn_k, mask.m), ds.class_count)
        err = float(np.mean(pred[unl] != ds.labels[unl]))
    tv = bound = None
    if truth is not None:
        est = projection_estimate(k, mask, ds.labels[mask.indices()], ds.class_count)
        tv = conditional_total_variation(truth, np.clip(est, 0.0, 1.0))
        bound = bound_report(k, mask, spectrum, truth).total
    return SweepRecord(fraction, mask.m, name, th, fv, err, tv, bound, empty)
