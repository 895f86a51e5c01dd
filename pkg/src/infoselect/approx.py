"""Power function, Schur-complement traces and the TED-based bound.

Everything here works on a full-data Gram matrix ``K`` (N x N) and a
selection ``S``. The power function of the span of {k(., x_s) : s in S}
is

    P(x) = sqrt(k(x, x) - K_xS K_SS^{-1} K_Sx),

so its squared values over the unlabelled points are the diagonal of the
Schur complement K / K_SS. That diagonal is formed from a pivoted
Cholesky factor of K_SS truncated at its numerical rank: selected points
already in the span of the others add nothing to the span, and dropping
them avoids the error a diagonal shift would leave behind.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .data import ConditionalDistribution, DataError, SelectionMask
from .kernel import GramMatrix, SpectralModel, rounding_floor, spanning_factor, stable_inverse_apply

IDENTITY_TOL = 1e-8
NULL_MASS_TOL = 1e-6


@dataclass(frozen=True)
class PowerProfile:
    """|P(x)| at every dataset point for one selection.

    ``rank`` is the size of the numerically independent part of S.
    """

    values: np.ndarray
    clamped_count: int = 0
    rank: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("index,value\n")
            for i, v in enumerate(self.values):
                fh.write(f"{i},{format(float(v), '.17g')}\n")


@dataclass(frozen=True)
class BoundReport:
    """Components of the projection-estimator bound on conditional TV."""

    ted_half: float
    trace_k: float
    eps_h_per_class: tuple[float, ...]
    first_term: float
    total: float
    rkhs_variant: float | None = None
    clamped_count: int = 0
    n: int = 0
    m: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eps_h_per_class"] = list(self.eps_h_per_class)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _values(k) -> np.ndarray:
    return k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)


def _require_nonempty(mask: SelectionMask, k: np.ndarray):
    if mask.n != k.shape[0]:
        raise DataError("mask size does not match Gram matrix")
    if mask.m == 0:
        raise DataError("selection must be nonempty")


def power_radicands(k_full, mask: SelectionMask):
    """Return (k(x,x) - K_xS K_SS^+ K_Sx for all x, numerical rank of K_SS)."""
    k = _values(k_full)
    _require_nonempty(mask, k)
    s = mask.indices()
    keep, low = spanning_factor(k[np.ix_(s, s)])
    w = sla.solve_triangular(low, k[s[keep], :], lower=True, check_finite=False)
    return np.diag(k) - np.einsum("lx,lx->x", w, w), int(keep.size)


def power_profile(k_full, mask: SelectionMask) -> PowerProfile:
    """Power-function values; selected points are exactly 0.

    Negative radicands are clamped and counted. Radicands at rounding level
    are set to 0 without being counted: their square root would otherwise
    turn pure noise into values near 1e-8.
    """
    rad, rank = power_radicands(k_full, mask)
    rad[mask.indices()] = 0.0
    neg = rad < 0
    rad[rad <= rounding_floor(np.diag(_values(k_full)))] = 0.0
    return PowerProfile(np.sqrt(rad), int(neg.sum()), rank)


def ted_objective(k_full, mask: SelectionMask, ridge: float = 0.0) -> float:
    """Trace(K_VV - K_VX (K_XX + ridge I)^{-1} K_XV) over unlabelled V."""
    if ridge < 0:
        raise DataError("ridge must be nonnegative")
    k = _values(k_full)
    _require_nonempty(mask, k)
    s = mask.indices()
    u = mask.complement()
    if u.size == 0:
        return 0.0
    if ridge == 0.0:
        return float(np.sum(power_radicands(k, mask)[0][u]))
    k_xx = k[np.ix_(s, s)] + ridge * np.eye(s.size)
    k_xv = k[np.ix_(s, u)]
    sol = stable_inverse_apply(k_xx, k_xv).solution
    return float(np.sum(np.diag(k)[u] - np.einsum("lv,lv->v", k_xv, sol)))


def ted_half(k_full, mask: SelectionMask) -> float:
    """Trace of the element-wise square root of K / K_SS."""
    return float(np.sum(power_profile(k_full, mask).values))


def projection_estimate(k_full, mask: SelectionMask, labels_at_s, class_count=None) -> np.ndarray:
    """Project class indicators onto span{k(., x_s)}.

    ``labels_at_s`` is either an (M, C) one-hot matrix or an (M,) vector of
    class ids, aligned with ``mask.selected``. The returned (N, C) matrix
    is not renormalized.
    """
    k = _values(k_full)
    _require_nonempty(mask, k)
    y = np.asarray(labels_at_s)
    if y.ndim == 1:
        if class_count is None:
            class_count = max(2, int(y.max()) + 1)
        y = np.eye(class_count)[y.astype(np.int64)]
    y = y.astype(float)
    if y.shape[0] != mask.m:
        raise DataError("labels must be given for exactly the selected points")
    s = mask.indices()
    coef = stable_inverse_apply(k[np.ix_(s, s)], y).solution
    est = k[:, s] @ coef
    est[s] = y
    return est


def eps_h(spectrum: SpectralModel, p, class_index: int) -> float:
    """Spectral residual of one class conditional outside the kernel's reach.

    sqrt(sum_i a_i^2 (1 - lambda_i)^2 + null mass), where a_i are the
    empirical L2 coefficients on the eigenfunctions and the null mass is
    the energy of p_c not captured by them.
    """
    coeffs, null = _class_coefficients(spectrum, p, class_index)
    return float(np.sqrt(np.sum(coeffs**2 * (1.0 - spectrum.eigenvalues) ** 2) + null))


def _class_coefficients(spectrum: SpectralModel, p, class_index: int):
    probs = p.probs if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)
    if probs.ndim != 2 or probs.shape[0] != spectrum.n:
        raise DataError("conditional distribution does not match spectrum size")
    if not 0 <= class_index < probs.shape[1]:
        raise DataError("class index out of range")
    pc = probs[:, class_index]
    a = spectrum.eigenfunctions.T @ pc / spectrum.n
    null = max(float(np.mean(pc**2) - np.sum(a**2)), 0.0)
    return a, null


def bound_report(k_full, mask: SelectionMask, spectrum: SpectralModel, p) -> BoundReport:
    """Assemble the projection-estimator bound.

    The rkhs variant is filled in only when every class conditional has
    null mass <= 1e-6, i.e. it lies (numerically) in the span of the
    retained eigenfunctions.
    """
    k = _values(k_full)
    n = k.shape[0]
    prof = power_profile(k, mask)
    th = float(np.sum(prof.values))
    trace_k = max(spectrum.trace, 0.0)
    first = th / (2.0 * n) * np.sqrt(trace_k)
    probs = p.probs if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)
    eps = []
    norms = []
    in_span = True
    for c in range(probs.shape[1]):
        a, null = _class_coefficients(spectrum, probs, c)
        eps.append(float(np.sqrt(np.sum(a**2 * (1.0 - spectrum.eigenvalues) ** 2) + null)))
        norms.append(float(np.sqrt(np.sum(a**2 / spectrum.eigenvalues**2))))
        in_span &= null <= NULL_MASS_TOL
    total = first + 0.5 * float(np.sum(eps))
    rkhs = first * float(np.sum(norms)) if in_span else None
    return BoundReport(
        ted_half=th,
        trace_k=float(trace_k),
        eps_h_per_class=tuple(eps),
        first_term=float(first),
        total=float(total),
        rkhs_variant=rkhs,
        clamped_count=prof.clamped_count,
        n=n,
        m=mask.m,
    )


def pointwise_projection_bound_check(
    k_full, mask: SelectionMask, spectrum: SpectralModel, p, class_index: int
) -> float:
    """Max over x of |Tp(x) - proj Tp(x)| - P(x) sqrt(Tr k) p(y=c).

    Tp is the empirical integral operator applied to p_c, (1/N) K p_c.
    A nonpositive return value means the pointwise bound holds everywhere.
    """
    k = _values(k_full)
    n = k.shape[0]
    probs = p.probs if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)
    pc = probs[:, class_index]
    tp = k @ pc / n
    s = mask.indices()
    proj = k[:, s] @ stable_inverse_apply(k[np.ix_(s, s)], tp[s]).solution
    lhs = np.abs(tp - proj)
    lhs[s] = 0.0
    rhs = power_profile(k, mask).values * np.sqrt(max(spectrum.trace, 0.0)) * float(np.mean(pc))
    return float(np.max(lhs - rhs))
