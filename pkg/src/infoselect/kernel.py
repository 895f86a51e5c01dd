"""Kernel functions, Gram matrices and the empirical Mercer spectrum."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import dpstrf
from scipy.spatial.distance import cdist

FAMILIES = ("linear", "rbf", "cosine", "polynomial")

# Jitter rungs, as multiples of mean(diag K).
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class KernelError(ValueError):
    """Invalid kernel specification or kernel input."""


class SingularMatrixError(ArithmeticError):
    """Cholesky factorization failed at every jitter rung."""


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family with its parameters and an overall scale.

    ``gamma=None`` for the rbf family means "resolve from the data" as
    1 / (d * var(features)).
    """

    family: str = "rbf"
    gamma: float | None = None
    degree: int = 2
    coef0: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.family == "poly":
            object.__setattr__(self, "family", "polynomial")
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise KernelError("gamma must be positive")
        if not self.scale > 0:
            raise KernelError("scale must be positive")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise KernelError("degree must be an integer >= 1")
            if self.coef0 < 0:
                raise KernelError("coef0 must be nonnegative")

    def resolve(self, features) -> "KernelSpec":
        """Fix a data-dependent rbf gamma."""
        if self.family != "rbf" or self.gamma is not None:
            return self
        x = np.atleast_2d(np.asarray(features, dtype=float))
        var = float(x.var())
        gamma = 1.0 / (x.shape[1] * var) if var > 0 else 1.0
        return replace(self, gamma=gamma)


@dataclass(frozen=True)
class GramMatrix:
    """Kernel matrix between two point sets.

    For a square Gram over one point set, ``values`` is the symmetrized
    matrix and ``jitter`` is the smallest ladder shift for which
    ``values + jitter * I`` has a Cholesky factor. ``values`` itself is
    never modified.
    """

    values: np.ndarray
    jitter: float = 0.0

    @property
    def shape(self):
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def sub(self, rows, cols=None) -> np.ndarray:
        cols = rows if cols is None else cols
        return self.values[np.ix_(rows, cols)]


def _base_kernel(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.family == "linear":
        return a @ b.T
    if spec.family == "rbf":
        gamma = spec.gamma if spec.gamma is not None else spec.resolve(a).gamma
        return np.exp(-gamma * cdist(a, b, "sqeuclidean"))
    if spec.family == "cosine":
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        if np.any(na == 0) or np.any(nb == 0):
            raise KernelError("cosine kernel undefined for zero vectors")
        return (a / na[:, None]) @ (b / nb[:, None]).T
    return (a @ b.T + spec.coef0) ** int(spec.degree)


def gram(spec: KernelSpec, a, b=None) -> GramMatrix:
    """Evaluate ``scale * k(a_i, b_j)``.

    With ``b`` omitted (or the same object as ``a``) the result is square,
    symmetrized and carries the jitter needed to factor it.
    """
    square = b is None or b is a
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if square else np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise KernelError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    k = spec.scale * _base_kernel(spec, a, b)
    if not np.all(np.isfinite(k)):
        raise KernelError("non-finite kernel entry")
    if not square:
        return GramMatrix(k)
    k = 0.5 * (k + k.T)
    _, jitter = _cholesky(k)
    return GramMatrix(k, jitter)


def rescale(spec: KernelSpec, c: float) -> KernelSpec:
    """Return ``spec`` with its scale multiplied by ``c``."""
    if not c > 0:
        raise KernelError("scale factor must be positive")
    return replace(spec, scale=spec.scale * c)


def _cholesky(a: np.ndarray):
    """Lower Cholesky factor of ``a + jitter * I`` on the jitter ladder.

    A rung is rejected when the factorization fails or a pivot is at the
    level of rounding noise.
    """
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    diag = np.diag(a)
    mean_diag = float(np.mean(diag))
    base = mean_diag if mean_diag > 0 else 1.0
    noise = n * np.finfo(float).eps * max(float(np.max(np.abs(diag))), base)
    for rung in JITTER_LADDER:
        jitter = rung * base
        try:
            low = sla.cholesky(a + jitter * np.eye(n), lower=True, check_finite=False)
        except sla.LinAlgError:
            continue
        piv = np.diag(low)
        if np.all(np.isfinite(low)) and np.min(piv) ** 2 > noise:
            return low, jitter
    raise SingularMatrixError("numerically singular K_SS")


def rounding_floor(diag, n: int | None = None) -> float:
    """Level below which a conditional variance is indistinguishable from 0."""
    diag = np.asarray(diag, dtype=float)
    n = diag.size if n is None else n
    return n * np.finfo(float).eps * float(np.max(np.abs(diag))) if diag.size else 0.0


def spanning_factor(k_ss):
    """Pivoted Cholesky of a PSD block, truncated at its numerical rank.

    Returns (keep, low): positions of a numerically independent subset and
    the lower Cholesky factor of the block restricted to it. A point left
    out has conditional variance at or below :func:`rounding_floor`, i.e.
    it already lies in the span of the kept points.
    """
    a = np.asarray(k_ss, dtype=float)
    n = a.shape[0]
    tol = rounding_floor(np.diag(a))
    if n == 0 or tol == 0.0:
        return np.zeros(0, dtype=np.intp), np.zeros((0, 0))
    c, piv, rank, info = dpstrf(a, tol=tol, lower=1)
    if info < 0:
        raise KernelError("invalid input to pivoted Cholesky")
    return (piv[:rank] - 1).astype(np.intp), np.tril(c[:rank, :rank])


class Solve(NamedTuple):
    solution: np.ndarray
    jitter: float
    residual: float


def stable_inverse_apply(k_ss, rhs) -> Solve:
    """Solve ``K_SS x = rhs`` by Cholesky, escalating jitter as needed.

    ``residual`` is the max-abs residual against the un-jittered matrix.
    """
    k = k_ss.values if isinstance(k_ss, GramMatrix) else np.asarray(k_ss, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise KernelError("K_SS must be square")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != k.shape[0]:
        raise KernelError("rhs row count does not match K_SS")
    low, jitter = _cholesky(k)
    x = sla.cho_solve((low, True), rhs, check_finite=False)
    residual = float(np.max(np.abs(k @ x - rhs))) if x.size else 0.0
    return Solve(x, jitter, residual)


def inverse_diagonal(k) -> np.ndarray:
    """Diagonal of ``K^{-1}`` (with ladder jitter when needed)."""
    vals = k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)
    low, _ = _cholesky(vals)
    # diag(K^{-1}) = squared column norms of L^{-1}
    linv = sla.solve_triangular(low, np.eye(low.shape[0]), lower=True, check_finite=False)
    return np.einsum("ij,ij->j", linv, linv)


@dataclass(frozen=True)
class SpectralModel:
    """Empirical Mercer eigensystem of K / N.

    ``eigenfunctions[:, i]`` holds phi_i at the data points, normalized so
    that mean(phi_i * phi_j) = delta_ij. ``trace`` is mean(diag K), the
    sum of all empirical eigenvalues before truncation.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    trace: float

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    @property
    def n(self) -> int:
        return self.eigenfunctions.shape[0]


def spectral_model(k: GramMatrix, tol: float = 0.0) -> SpectralModel:
    """Eigendecompose the full-data Gram matrix.

    Components with lambda_i <= tol * lambda_1 (or lambda_i <= 0) are
    dropped.
    """
    vals = k.values if isinstance(k, GramMatrix) else np.asarray(k, dtype=float)
    n = vals.shape[0]
    if vals.shape != (n, n):
        raise KernelError("spectral_model needs a square Gram matrix")
    try:
        w, u = sla.eigh(vals, check_finite=False)
    except sla.LinAlgError as exc:
        raise ArithmeticError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(w)[::-1]
    lam = w[order] / n
    u = u[:, order]
    top = lam[0] if lam.size else 0.0
    keep = (lam > 0) & (lam > tol * top)
    return SpectralModel(lam[keep], np.sqrt(n) * u[:, keep], float(np.trace(vals)) / n)


def write_gram_csv(k: GramMatrix, path) -> None:
    """Row-major CSV of the matrix entries, 17 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in k.values:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")
