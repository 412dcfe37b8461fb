"""Loading, encoding, standardizing and splitting tabular classification data.

Only headed CSV files are supported. Labels are one-hot encoded against the
lexicographically sorted set of distinct label strings.
"""

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix plus 1-of-J target matrix.

    Attributes
    ----------
    features : ndarray, shape (N, K)
    targets : ndarray, shape (N, J)
        Exactly one 1.0 per row, zeros elsewhere.
    class_labels : tuple of str
        Label of each target column, in column order.
    name : str
    """

    features: np.ndarray
    targets: np.ndarray
    class_labels: tuple
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        Y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or Y.ndim != 2:
            raise DataError("features and targets must be 2-D")
        N, K = X.shape
        if N < 1 or K < 1:
            raise DataError(f"dataset needs N >= 1 and K >= 1, got {X.shape}")
        if Y.shape[0] != N:
            raise DataError(f"{N} feature rows but {Y.shape[0]} target rows")
        labels = tuple(self.class_labels)
        if len(labels) != Y.shape[1]:
            raise DataError(
                f"{len(labels)} class labels for {Y.shape[1]} target columns")
        if len(labels) < 2:
            raise DataError("need at least 2 classes")
        if len(set(labels)) != len(labels):
            raise DataError("duplicate class labels")
        ones = Y == 1.0
        if not (np.all(ones | (Y == 0.0)) and np.all(ones.sum(axis=1) == 1)):
            raise DataError("targets must be 1-of-J encoded")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", Y)
        object.__setattr__(self, "class_labels", labels)

    @property
    def n_patterns(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return self.targets.shape[1]

    @property
    def label_indices(self):
        """Class index of every pattern."""
        return np.argmax(self.targets, axis=1)

    @property
    def labels(self):
        return [self.class_labels[i] for i in self.label_indices]

    def class_counts(self):
        return np.bincount(self.label_indices, minlength=self.n_classes)

    def subset(self, rows, name=None):
        rows = np.asarray(rows, dtype=int)
        return Dataset(self.features[rows], self.targets[rows],
                       self.class_labels, self.name if name is None else name)


@dataclass(frozen=True, eq=False)
class StandardizationParams:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        scale = np.asarray(self.scale, dtype=float)
        if mean.ndim != 1 or mean.shape != scale.shape:
            raise DataError("mean and scale must be vectors of equal length")
        if not np.all(scale > 0):
            raise DataError("scale entries must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)

    @classmethod
    def identity(cls, K):
        return cls(np.zeros(K), np.ones(K))

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))


def one_hot(label_strings, class_labels=None):
    """Encode label strings 1-of-J; returns ``(targets, class_labels)``."""
    if class_labels is None:
        class_labels = tuple(sorted(set(label_strings)))
    index = {c: j for j, c in enumerate(class_labels)}
    Y = np.zeros((len(label_strings), len(class_labels)))
    for n, lab in enumerate(label_strings):
        try:
            Y[n, index[lab]] = 1.0
        except KeyError:
            raise DataError(f"unknown class label {lab!r}") from None
    return Y, tuple(class_labels)


def _resolve_column(header, label_column):
    if isinstance(label_column, int):
        idx = label_column
    elif label_column in header:
        idx = header.index(label_column)
    elif isinstance(label_column, str) and label_column.lstrip("-").isdigit():
        idx = int(label_column)
    else:
        raise DataError(f"label column {label_column!r} not in header {header}")
    if idx < 0:
        idx += len(header)
    if not 0 <= idx < len(header):
        raise DataError(
            f"label column index {label_column} out of range for {len(header)} columns")
    return idx


def read_table(path, label_column=None):
    """Read a headed CSV into ``(header, feature_rows, labels)``.

    With ``label_column=None`` every column is a feature and ``labels`` is
    None. Row numbers in errors are 1-based file lines (header is line 1).
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        label_idx = None if label_column is None else _resolve_column(header, label_column)
        feature_cols = [k for k in range(len(header)) if k != label_idx]
        if not feature_cols:
            raise DataError(f"{path}: no feature columns")
        rows, labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {line_no} has {len(record)} fields, "
                    f"header has {len(header)}")
            values = []
            for k in feature_cols:
                cell = record[k].strip()
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: row {line_no}, column {header[k]!r}: "
                        f"non-numeric value {record[k]!r}")
                values.append(v)
            if label_idx is not None:
                lab = record[label_idx].strip()
                if not lab:
                    raise DataError(f"{path}: row {line_no}: empty label")
                labels.append(lab)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    feature_header = [header[k] for k in feature_cols]
    return feature_header, np.array(rows, dtype=float), (labels if label_idx is not None else None)


def load_csv(path, label_column=-1, name=None):
    """Load a labelled CSV as a :class:`Dataset`.

    ``label_column`` is a header name or a zero-based index (negative
    indices count from the end; the default is the last column).
    """
    _, X, labels = read_table(path, label_column)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise DataError(f"{path}: only one class ({classes[0]!r}) present, need J >= 2")
    Y, classes = one_hot(labels, tuple(classes))
    return Dataset(X, Y, classes, name or Path(path).stem)


def save_csv(dataset, path, label_name="class"):
    """Write ``dataset`` with features ``x0..x{K-1}`` and the label last."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(dataset.n_features)] + [label_name])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [lab])


def apply_standardization(features, params):
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.mean.shape[0]:
        raise DataError(
            f"expected {params.mean.shape[0]} feature columns, got shape {X.shape}")
    return (X - params.mean) / params.scale


def fit_standardization(features):
    """Column means and population standard deviations (constant -> 1)."""
    X = np.asarray(features, dtype=float)
    if X.shape[0] < 2:
        raise DataError("standardization needs at least 2 patterns")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return StandardizationParams(mean, scale)


def standardize(dataset):
    """Standardize features to zero mean and unit population variance.

    Returns the transformed dataset and the parameters so the same map can
    be applied to held-out data.
    """
    params = fit_standardization(dataset.features)
    X = apply_standardization(dataset.features, params)
    return replace(dataset, features=X), params


def _stratum_sizes(counts, test_fraction):
    raw = test_fraction * counts
    sizes = np.floor(raw + 0.5).astype(int)
    target = int(math.floor(test_fraction * counts.sum() + 0.5))
    resid = raw - sizes
    # move at most one pattern per class, largest rounding residual first
    order = np.argsort(-resid, kind="stable")
    for j in order:
        if sizes.sum() >= target:
            break
        if sizes[j] < counts[j]:
            sizes[j] += 1
    for j in order[::-1]:
        if sizes.sum() <= target:
            break
        if sizes[j] > 0:
            sizes[j] -= 1
    return sizes


def split(dataset, test_fraction, seed):
    """Stratified, seeded train/test split.

    Each class contributes ``round(test_fraction * count)`` test patterns,
    with single-pattern adjustments so the total matches
    ``round(test_fraction * N)``. Both parts keep the original row order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    labels = dataset.label_indices
    counts = np.bincount(labels, minlength=dataset.n_classes)
    sizes = _stratum_sizes(counts, test_fraction)
    rng = np.random.Generator(np.random.PCG64(seed))
    test_rows = []
    for j in range(dataset.n_classes):
        members = np.flatnonzero(labels == j)
        test_rows.extend(rng.permutation(members)[: sizes[j]].tolist())
    test_mask = np.zeros(dataset.n_patterns, dtype=bool)
    test_mask[test_rows] = True
    if test_mask.all() or not test_mask.any():
        raise DataError(
            f"test_fraction={test_fraction} leaves an empty part for N={dataset.n_patterns}")
    train = dataset.subset(np.flatnonzero(~test_mask), f"{dataset.name}-train")
    test = dataset.subset(np.flatnonzero(test_mask), f"{dataset.name}-test")
    return train, test


def synthetic_dataset(n_patterns=1055, n_features=41, class_counts=(699, 356),
                      seed=0, name="synthetic"):
    """Two-or-more-class Gaussian data with a nonlinear class boundary.

    Defaults give the shape of the qsar-biodegradation benchmark (1055
    patterns, 41 attributes, classes of 699 and 356). Features mix class
    mean shifts on a few informative columns, squared terms and correlated
    nuisance columns so the problem is not linearly trivial.
    """
    counts = np.asarray(class_counts, dtype=int)
    if counts.sum() != n_patterns:
        raise DataError("class_counts must sum to n_patterns")
    rng = np.random.Generator(np.random.PCG64(seed))
    J = len(counts)
    labels = np.repeat(np.arange(J), counts)
    rng.shuffle(labels)
    n_inf = min(8, n_features)
    centers = rng.normal(scale=1.2, size=(J, n_inf))
    X = rng.normal(size=(n_patterns, n_features))
    X[:, :n_inf] += centers[labels]
    if n_features > n_inf:
        mix = rng.normal(scale=0.5, size=(n_inf, n_features - n_inf))
        X[:, n_inf:] += X[:, :n_inf] @ mix
    X[:, 0] += 0.6 * X[:, 1] ** 2 * (labels == 0)
    X = 3.0 * X + rng.uniform(-5, 5, size=n_features)
    class_labels = tuple(str(j) for j in range(J))
    Y = np.zeros((n_patterns, J))
    Y[np.arange(n_patterns), labels] = 1.0
    return Dataset(X, Y, class_labels, name)
