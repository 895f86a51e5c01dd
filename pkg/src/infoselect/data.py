"""Datasets, selection masks and conditional class distributions.

All quantities are taken under the empirical measure: every row of a
dataset carries weight 1/N.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, softmax


class DataError(ValueError):
    """Raised for malformed input data."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with optional integer class labels.

    Attributes:
      features: real array of shape (N, d).
      labels: optional int array of shape (N,) with values in [0, class_count).
      class_count: number of classes C (>= 2).
      label_names: original label strings, indexed by class id, when the
        labels were read from a file.
      feature_names: column names, when read from a file.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    class_count: int = 2
    label_names: tuple[str, ...] | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataError("features must be a non-empty N x d matrix")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite feature")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        if self.class_count < 2:
            raise DataError("class_count must be at least 2")
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (x.shape[0],):
                raise DataError("labels must have one entry per row")
            if not np.issubdtype(y.dtype, np.integer):
                if not np.all(np.equal(np.mod(y, 1), 0)):
                    raise DataError("labels must be integer coded")
            y = y.astype(np.int64)
            if y.min() < 0 or y.max() >= self.class_count:
                raise DataError("label out of range for class_count")
            y.setflags(write=False)
            object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SelectionMask:
    """A set of selected row indices into a dataset of size ``n``."""

    selected: tuple[int, ...]
    n: int

    def __init__(self, selected, n: int):
        idx = sorted(int(i) for i in selected)
        if n < 1:
            raise DataError("n must be positive")
        if len(set(idx)) != len(idx):
            raise DataError("selected indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= n):
            raise DataError("selected index out of range")
        object.__setattr__(self, "selected", tuple(idx))
        object.__setattr__(self, "n", int(n))

    @property
    def m(self) -> int:
        return len(self.selected)

    def indices(self) -> np.ndarray:
        return np.asarray(self.selected, dtype=np.intp)

    def complement(self) -> np.ndarray:
        keep = np.ones(self.n, dtype=bool)
        keep[list(self.selected)] = False
        return np.flatnonzero(keep)

    def as_bool(self) -> np.ndarray:
        out = np.zeros(self.n, dtype=bool)
        out[list(self.selected)] = True
        return out


@dataclass(frozen=True)
class ConditionalDistribution:
    """Values of p(y | x) at every row of a dataset, shape (N, C)."""

    probs: np.ndarray
    atol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 2 or p.shape[1] < 2:
            raise DataError("probs must be an N x C matrix with C >= 2")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise DataError("probabilities must be finite and nonnegative")
        if np.any(np.abs(p.sum(axis=1) - 1.0) > self.atol):
            raise DataError("each row must sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def class_count(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_labels(cls, labels, class_count: int) -> "ConditionalDistribution":
        """One-hot distribution of observed labels."""
        labels = np.asarray(labels, dtype=np.int64)
        return cls(np.eye(class_count)[labels])


def load_csv(path, label_column: str | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Every column except ``label_column`` must be numeric. Labels that all
    parse as nonnegative integers are used as class ids directly; otherwise
    strings are coded in order of first appearance and the mapping is kept
    in ``label_names``.
    """
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataError("empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise DataError("no data rows")
    if label_column is not None and label_column not in header:
        raise DataError(f"label column {label_column!r} not in header")
    label_pos = header.index(label_column) if label_column is not None else None
    feat_pos = [i for i in range(len(header)) if i != label_pos]
    if not feat_pos:
        raise DataError("no feature columns")

    feats = np.empty((len(body), len(feat_pos)))
    raw_labels = []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"ragged row at line {r}")
        for j, c in enumerate(feat_pos):
            try:
                v = float(row[c])
            except ValueError:
                raise DataError(f"non-numeric feature at line {r}, column {header[c]!r}") from None
            if not math.isfinite(v):
                raise DataError(f"non-finite feature at line {r}, column {header[c]!r}")
            feats[r - 2, j] = v
        if label_pos is not None:
            raw_labels.append(row[label_pos].strip())

    names = tuple(header[c] for c in feat_pos)
    if label_pos is None:
        return Dataset(feats, feature_names=names)

    labels, label_names = _code_labels(raw_labels)
    return Dataset(
        feats,
        labels=labels,
        class_count=max(2, len(label_names) if label_names else int(labels.max()) + 1),
        label_names=label_names,
        feature_names=names,
    )


def _code_labels(raw):
    if all(s.isdigit() for s in raw):
        return np.array([int(s) for s in raw], dtype=np.int64), None
    codes: dict[str, int] = {}
    out = [codes.setdefault(s, len(codes)) for s in raw]
    return np.array(out, dtype=np.int64), tuple(codes)


def write_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write ``dataset`` so that :func:`load_csv` reproduces it exactly."""
    names = dataset.feature_names or tuple(f"x{j}" for j in range(dataset.dim))
    header = list(names)
    if dataset.labels is not None:
        header.append(label_column)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(dataset.n):
            row = [format(v, ".17g") for v in dataset.features[i]]
            if dataset.labels is not None:
                lab = int(dataset.labels[i])
                row.append(dataset.label_names[lab] if dataset.label_names else str(lab))
            w.writerow(row)


def gaussian_mixture_posterior(x, centers, sigma: float, center_classes=None) -> np.ndarray:
    """Exact class posterior for equal-weight isotropic Gaussian components.

    Component k belongs to class ``center_classes[k]`` (default: class k).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    owner = np.arange(len(centers)) if center_classes is None else np.asarray(center_classes, dtype=np.int64)
    sq = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    comp = softmax(-sq / (2.0 * sigma**2), axis=1)
    out = np.zeros((x.shape[0], int(owner.max()) + 1))
    np.add.at(out.T, owner, comp.T)
    return out


def make_gaussian_mixture(seed: int, n_per_class: int, centers, sigma: float, center_classes=None):
    """Sample ``n_per_class`` points around each center.

    By default center k generates class k. ``center_classes`` maps several
    components onto one class (each component then gets ``n_per_class``
    points). Rows are shuffled with the same generator. Returns the dataset
    and the exact posterior p(y | x) at every sample, with class priors
    proportional to component counts.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    n_comp, dim = centers.shape
    owner = np.arange(n_comp) if center_classes is None else np.asarray(center_classes, dtype=np.int64)
    if owner.shape != (n_comp,) or owner.min() < 0:
        raise DataError("center_classes must give one class id per center")
    n_classes = int(owner.max()) + 1
    if n_classes < 2 or np.unique(owner).size != n_classes:
        raise DataError("need at least two classes, each with a center")
    if not sigma > 0:
        raise DataError("sigma must be positive")
    if n_per_class < 1:
        raise DataError("n_per_class must be positive")
    rng = np.random.default_rng(seed)
    comp = np.repeat(np.arange(n_comp), n_per_class)
    x = centers[comp] + sigma * rng.standard_normal((comp.size, dim))
    perm = rng.permutation(comp.size)
    x, comp = x[perm], comp[perm]
    post = gaussian_mixture_posterior(x, centers, sigma, owner)
    return Dataset(x, labels=owner[comp], class_count=n_classes), ConditionalDistribution(post)


def checkerboard_centers(rows: int, cols: int | None = None, spacing: float = 1.0):
    """Centers on a rows x cols grid with alternating class ids 0/1."""
    cols = rows if cols is None else cols
    ij = np.array([(i, j) for i in range(rows) for j in range(cols)])
    return spacing * ij.astype(float), (ij.sum(axis=1) % 2).astype(np.int64)


@dataclass(frozen=True)
class LogisticProblem:
    """1-D two-class problem with p(y=1 | x) = sigmoid(slope * x).

    Features are uniform on [low, high]; labels are sampled from the
    posterior. Each class posterior is Lipschitz with constant |slope| / 4.
    """

    slope: float
    n: int
    low: float = -1.0
    high: float = 1.0
    seed: int = 0

    @property
    def lipschitz(self) -> float:
        return abs(self.slope) / 4.0

    def posterior(self, x) -> np.ndarray:
        p1 = expit(self.slope * np.ravel(np.asarray(x, dtype=float)))
        return np.column_stack([1.0 - p1, p1])

    def sample(self):
        rng = np.random.default_rng(self.seed)
        x = rng.uniform(self.low, self.high, size=self.n)
        p = self.posterior(x)
        labels = (rng.uniform(size=self.n) < p[:, 1]).astype(np.int64)
        return Dataset(x[:, None], labels=labels, class_count=2), ConditionalDistribution(p)


def _probs(p) -> np.ndarray:
    return p.probs if isinstance(p, ConditionalDistribution) else np.asarray(p, dtype=float)


def conditional_total_variation(p, q) -> float:
    """Mean over rows of half the L1 distance between p(.|x) and q(.|x).

    Accepts :class:`ConditionalDistribution` or raw (N, C) arrays; raw
    arrays are not required to lie on the simplex.
    """
    a, b = _probs(p), _probs(q)
    if a.shape != b.shape or a.ndim != 2:
        raise DataError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(0.5 * np.abs(a - b).sum(axis=1)))


def split_indices(mask: SelectionMask, n: int):
    """Return (train, unlabelled) index lists, both ascending."""
    if mask.selected and mask.selected[-1] >= n:
        raise DataError("selected index out of range")
    chosen = set(mask.selected)
    train = list(mask.selected)
    unlabelled = [i for i in range(n) if i not in chosen]
    return train, unlabelled
