"""Training-data selection strategies.

Every strategy is deterministic given its inputs (and seed), and every
argmin/argmax breaks ties toward the lowest index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import _backend
from .data import ConditionalDistribution, DataError, SelectionMask
from .kernel import GramMatrix, _cholesky

BETA_FLOOR = 1e-12
# Candidates within this relative distance of the best score count as tied.
TIE_RTOL = 1e-9


@dataclass
class SelectionResult:
    """Ordered picks of one strategy run."""

    order: list[int]
    objective_trajectory: list[float]
    strategy_id: str
    seed: int = 0
    scores: list[float] | None = None
    info: dict = field(default_factory=dict)

    def mask(self, n: int, m: int | None = None) -> SelectionMask:
        return SelectionMask(self.order[:m] if m is not None else self.order, n)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy_id,
            "seed": self.seed,
            "order": [int(i) for i in self.order],
            "trajectory": [float(v) for v in self.objective_trajectory],
            "scores": None if self.scores is None else [float(v) for v in self.scores],
            "info": {k: v for k, v in sorted(self.info.items()) if isinstance(v, (bool, int, float, str))},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionResult":
        return cls(
            order=[int(i) for i in d["order"]],
            objective_trajectory=[float(v) for v in d.get("trajectory", [])],
            strategy_id=d.get("strategy", "unknown"),
            seed=int(d.get("seed", 0)),
            scores=d.get("scores"),
            info=dict(d.get("info", {})),
        )

    def indices_text(self) -> str:
        return "".join(f"{i}\n" for i in self.order)


def _check_m(n: int, m: int):
    if m > n:
        raise DataError("m exceeds dataset size")
    if m < 1:
        raise DataError("m must be positive")


def _argmin(values: np.ndarray, scale: float) -> int:
    """Lowest index whose value is within tolerance of the minimum."""
    best = np.min(values)
    tol = TIE_RTOL * max(abs(scale), abs(best))
    return int(np.flatnonzero(values <= best + tol)[0])


def _rank_desc(scores: np.ndarray) -> np.ndarray:
    # stable sort on the negated scores keeps equal scores in index order
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def select_random(n: int, m: int, seed: int = 0) -> SelectionResult:
    _check_m(n, m)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)[:m]
    return SelectionResult([int(i) for i in order], [0.0] * m, "random", seed)


def facility_location_value(features, mask: SelectionMask) -> float:
    """Mean distance from every point to its nearest selected point."""
    if mask.m == 0:
        raise DataError("selection must be nonempty")
    x = np.atleast_2d(np.asarray(features, dtype=float))
    _, dist = _backend.nearest_selected(x, mask.indices())
    return float(np.mean(dist))


def weighted_facility_value(features, mask: SelectionMask, weights) -> float:
    """(1/N) sum over points of w(nearest selected) * distance to it."""
    if mask.m == 0:
        raise DataError("selection must be nonempty")
    x = np.atleast_2d(np.asarray(features, dtype=float))
    assign, dist = _backend.nearest_selected(x, mask.indices())
    return float(np.mean(np.asarray(weights, dtype=float)[assign] * dist))


def _greedy_facility(x: np.ndarray, m: int, weights: np.ndarray, strategy_id: str) -> SelectionResult:
    n = x.shape[0]
    cur = np.full(n, np.inf)
    assign = np.full(n, -1, dtype=np.intp)
    selected = np.zeros(n, dtype=bool)
    order, traj = [], []
    for _ in range(m):
        totals = _backend.facility_scores(x, cur, assign, weights, selected)
        finite = totals[np.isfinite(totals)]
        j = _argmin(totals, float(np.max(finite)) if finite.size else 0.0)
        d = np.sqrt(((x - x[j]) ** 2).sum(axis=1))
        take = (d < cur) | ((d == cur) & (j < assign))
        cur = np.where(take, d, cur)
        assign = np.where(take, j, assign)
        selected[j] = True
        order.append(j)
        traj.append(float(totals[j]) / n)
    return SelectionResult(order, traj, strategy_id, 0, info={"backend": _backend.BACKEND})


def select_facility_location(features, m: int) -> SelectionResult:
    """Greedy minimization of the mean nearest-selected distance."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    _check_m(x.shape[0], m)
    return _greedy_facility(x, m, np.ones(x.shape[0]), "facility")


def select_facility_location_weighted(features, m: int, weights) -> SelectionResult:
    """Greedy facility location where each cell is weighted by its center's weight.

    ``weights[j]`` stands for the summed gradient norm of the class
    posterior at point j.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    n = x.shape[0]
    _check_m(n, m)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DataError("weights must have one entry per point")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DataError("weights must be finite and nonnegative")
    return _greedy_facility(x, m, w, "facility-weighted")


def _kmatrix(k) -> np.ndarray:
    return k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)


def select_ted_greedy(k_full, m: int, ridge: float = 0.0) -> SelectionResult:
    """Greedy TED: each step adds the point giving the smallest objective.

    Keeps the conditional covariance R = K - K_.S (K_SS + ridge I)^{-1} K_S.
    and applies a rank-one downdate per pick, so a step costs O(N^2).
    Adding candidate j changes the objective over unlabelled points U to

        T - R_jj - sum_{u in U, u != j} R_uj^2 / (R_jj + ridge).
    """
    k = _kmatrix(k_full)
    n = k.shape[0]
    _check_m(n, m)
    if ridge < 0:
        raise DataError("ridge must be nonnegative")
    r = k.copy()
    unl = np.ones(n, dtype=bool)
    scale = float(np.trace(k))
    tiny = n * np.finfo(float).eps * max(float(np.max(np.abs(np.diag(k)))), 1e-300)
    order, traj = [], []
    for _ in range(m):
        diag = np.diag(r).copy()
        total = float(np.sum(diag[unl]))
        cross = np.einsum("uj,uj,u->j", r, r, unl.astype(float)) - diag**2
        denom = diag + ridge
        ok = denom > tiny
        gain = diag.copy()
        gain[ok] += cross[ok] / denom[ok]
        cand = np.where(unl, total - gain, np.inf)
        j = _argmin(cand, scale)
        if ok[j]:
            col = r[:, j].copy()
            r -= np.outer(col, col) / denom[j]
        unl[j] = False
        order.append(j)
        traj.append(float(cand[j]))
    return SelectionResult(order, traj, "ted-greedy", 0, info={"ridge": float(ridge)})


@dataclass
class SequentialTedState:
    """One iterate of the scale-aware A / beta updates."""

    A: np.ndarray
    beta: np.ndarray
    gamma: float
    c: float
    iteration: int
    floored: bool = False


def sequential_ted_iterations(k_full, gamma: float, c: float = 1.0, max_iter: int = 100):
    """Yield states of A <- K (c beta^{-1} + K)^{-1}, beta_j <- ||A_:j|| / sqrt(gamma).

    ``K`` stands in for V V^T and ``c`` is the kernel scale, so that
    (cK, c) and (K, 1) produce the same iterates. beta starts at all ones.
    """
    if not gamma > 0 or not c > 0:
        raise DataError("gamma and c must be positive")
    k = _kmatrix(k_full)
    n = k.shape[0]
    beta = np.ones(n)
    for it in range(1, max_iter + 1):
        floored = bool(np.any(beta < BETA_FLOOR))
        b = np.maximum(beta, BETA_FLOOR)
        mat = k + np.diag(c / b)
        low, _ = _cholesky(mat)
        # A = K M^{-1} = (M^{-1} K)^T since M and K are symmetric
        a = sla.cho_solve((low, True), k, check_finite=False).T
        beta = np.sqrt(np.einsum("ij,ij->j", a, a) / gamma)
        yield SequentialTedState(a, beta, gamma, c, it, floored)


def select_ted_sequential(
    k_full, m: int, gamma: float = 1.0, c: float = 1.0, max_iter: int = 100, tol: float = 1e-6
) -> SelectionResult:
    """Rank points by the converged beta of the A / beta iteration.

    Non-convergence within ``max_iter`` is reported in ``info`` rather than
    raised.
    """
    k = _kmatrix(k_full)
    n = k.shape[0]
    _check_m(n, m)
    if not tol > 0:
        raise DataError("tol must be positive")
    prev = np.ones(n)
    converged, floored, it = False, False, 0
    beta = prev
    for state in sequential_ted_iterations(k, gamma, c, max_iter):
        beta, it = state.beta, state.iteration
        floored |= state.floored
        change = np.max(np.abs(beta - prev) / np.maximum(prev, BETA_FLOOR))
        prev = beta
        if change < tol:
            converged = True
            break
    floored |= bool(np.any(beta < BETA_FLOOR))
    ranking = _rank_desc(beta)
    order = [int(i) for i in ranking[:m]]
    return SelectionResult(
        order,
        [float(beta[i]) for i in order],
        "ted-sequential",
        0,
        scores=[float(v) for v in beta],
        info={"converged": converged, "iterations": it, "beta_floor_engaged": floored},
    )


def select_inverse_diagonal(k_full, m: int) -> SelectionResult:
    """Pick the points with the smallest diagonal entries of K^{-1}."""
    from .kernel import inverse_diagonal

    k = _kmatrix(k_full)
    n = k.shape[0]
    _check_m(n, m)
    d = inverse_diagonal(k)
    order = [int(i) for i in np.argsort(d, kind="stable")[:m]]
    return SelectionResult(order, [float(d[i]) for i in order], "inverse-diagonal", 0, scores=[float(v) for v in d])


def uncertainty_scores(posterior) -> np.ndarray:
    probs = posterior.probs if isinstance(posterior, ConditionalDistribution) else None
    if probs is None:
        probs = ConditionalDistribution(posterior).probs
    return 1.0 - probs.max(axis=1)


def select_uncertainty(posterior, m: int) -> SelectionResult:
    """Pick the m points whose top class probability is lowest."""
    score = uncertainty_scores(posterior)
    _check_m(score.size, m)
    order = [int(i) for i in _rank_desc(score)[:m]]
    return SelectionResult(order, [float(score[i]) for i in order], "uncertainty", 0, scores=[float(v) for v in score])


def mix_with_random(ranked: SelectionResult, n: int, m: int, ratio: float, seed: int = 0) -> SelectionResult:
    """Take round(ratio * m) top-ranked points, fill the rest at random."""
    if not 0.0 <= ratio <= 1.0:
        raise DataError("ratio must lie in [0, 1]")
    _check_m(n, m)
    n_sel = int(round(ratio * m))
    head = list(ranked.order[:n_sel])
    if len(head) < n_sel:
        raise DataError("ranking is shorter than the requested selected share")
    rest = np.setdiff1d(np.arange(n), head)
    rng = np.random.default_rng(seed)
    tail = rng.permutation(rest)[: m - n_sel]
    order = head + [int(i) for i in tail]
    return SelectionResult(order, [0.0] * m, f"{ranked.strategy_id}-mix", seed, info={"ratio": float(ratio)})
