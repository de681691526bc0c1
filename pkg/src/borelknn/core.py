"""Shared primitives: datasets, metrics, deterministic randomness, fold splits.

Every stochastic operation in the toolkit takes an explicit integer seed and
derives its streams from ``numpy.random.SeedSequence`` feeding a Philox
counter-based generator, so identical seeds give bit-identical results
regardless of call order or thread count.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

MAX_SEED = 2**64


def check_seed(seed):
    """Validate a master seed (unsigned 64-bit integer)."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= seed < MAX_SEED:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return int(seed)


def streamed_rng(seed, *stream):
    """Return a Philox generator for the sub-stream ``(seed, *stream)``.

    Distinct stream tags give statistically independent generators; the same
    tags always reproduce the same stream.
    """
    entropy = (check_seed(seed),) + tuple(int(t) for t in stream)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *stream):
    """Collapse ``(seed, *stream)`` into a fresh 64-bit master seed."""
    entropy = (check_seed(seed),) + tuple(int(t) for t in stream)
    state = np.random.SeedSequence(entropy).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


# Stream tags reserved by this module; queries use (seed, ordinal, 0|1).
_FOLD_STREAM = 101


def index_tie_ranks(seed, ordinal, n):
    """Rank of each dataset index in this query's random tie-break order.

    One permutation of the n indices is drawn per query from the stream
    ``(seed, ordinal, 0)``; equidistant neighbour candidates are taken in
    ascending rank. Lower rank wins.
    """
    perm = streamed_rng(seed, ordinal, 0).permutation(n)
    ranks = np.empty(n, dtype=np.int64)
    ranks[perm] = np.arange(n, dtype=np.int64)
    return ranks


def class_tie_order(seed, ordinal, class_count):
    """Random order of class ids used to resolve vote ties for one query."""
    return streamed_rng(seed, ordinal, 1).permutation(class_count)


@dataclass(frozen=True)
class LabeledDataset:
    """A labelled sample.

    ``points`` is carrier-dependent: an ``(n, d)`` float array for Euclidean
    data, an ``(n, D)`` uint8 array of bits for Hamming data, or a list whose
    elements are reduction codes (or tuples of codes for grouped reductions).
    """

    points: object
    labels: np.ndarray
    class_count: int
    feature_names: tuple = None
    class_names: tuple = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "labels", labels)
        n = len(labels)
        if n < 1:
            raise ValueError("dataset must contain at least one row")
        if len(self.points) != n:
            raise ValueError(
                f"points/labels length mismatch: {len(self.points)} vs {n}"
            )
        if self.class_count < 1:
            raise ValueError("class_count must be positive")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ValueError("labels must lie in [0, class_count)")
        if isinstance(self.points, np.ndarray):
            if self.points.ndim != 2:
                raise ValueError("point array must be 2-dimensional")
            if np.issubdtype(self.points.dtype, np.floating) and not np.isfinite(
                self.points
            ).all():
                raise ValueError("points contain non-finite values")

    @property
    def n(self):
        return len(self.labels)

    @property
    def dim(self):
        if isinstance(self.points, np.ndarray):
            return self.points.shape[1]
        raise TypeError("dim is only defined for array-carried points")

    def map_points(self, fn):
        """Return a copy whose points are ``fn(points)`` (labels unchanged).

        ``fn`` receives the whole point container and must return an
        equal-length container; this is the hook the transport combinator uses.
        """
        new_points = fn(self.points)
        if len(new_points) != self.n:
            raise ValueError("point mapping changed the sample size")
        return replace(self, points=new_points)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        if isinstance(self.points, np.ndarray):
            pts = self.points[idx]
        else:
            pts = [self.points[i] for i in idx]
        return replace(self, points=pts, labels=self.labels[idx])


def load_csv(path, label_column, class_map=None):
    """Load a labelled dataset from a header-row CSV file.

    Parameters
    ----------
    path : str
        Comma-separated UTF-8 file with a header row.
    label_column : str or int
        Header name or zero-based index of the label column; all other
        columns must be numeric features.
    class_map : dict, optional
        Mapping from label cell text to class id. Without it, ids are
        assigned in first-appearance order (this also applies to integer
        label cells; pass a class_map to pin a specific coding).
    """
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, header row required") from None
        if isinstance(label_column, int):
            if not 0 <= label_column < len(header):
                raise ValueError(
                    f"{path}: label column index {label_column} out of range"
                )
            label_idx = label_column
        else:
            try:
                label_idx = header.index(label_column)
            except ValueError:
                raise ValueError(
                    f"{path}: no column named {label_column!r} in header"
                ) from None

        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            feats = []
            for i, cell in enumerate(row):
                if i == label_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column {header[i]!r}: "
                        f"non-numeric value {cell!r}"
                    ) from None
            rows.append(feats)
            raw_labels.append(row[label_idx].strip())
    if not rows:
        raise ValueError(f"{path}: no data rows")

    if class_map is None:
        class_map = {}
        for text in raw_labels:
            if text not in class_map:
                class_map[text] = len(class_map)
    labels = []
    for i, text in enumerate(raw_labels):
        if text not in class_map:
            raise ValueError(f"{path}: row {i + 2}: unknown label {text!r}")
        labels.append(class_map[text])
    class_names = tuple(
        t for t, _ in sorted(class_map.items(), key=lambda kv: kv[1])
    )
    points = np.asarray(rows, dtype=np.float64)
    if not np.isfinite(points).all():
        bad = np.argwhere(~np.isfinite(points))[0]
        raise ValueError(
            f"{path}: row {bad[0] + 2}, column {feature_names[bad[1]]!r}: "
            "non-finite value"
        )
    return LabeledDataset(
        points=points,
        labels=np.asarray(labels, dtype=np.int64),
        class_count=len(class_map),
        feature_names=feature_names,
        class_names=class_names,
    )


def normalize_unit_cube(ds, params=None):
    """Affinely map each attribute onto [0, 1].

    Fits min/max per attribute (or reuses ``params`` from an earlier fit, the
    cross-validation train/test workflow) and returns ``(dataset, params)``.
    Constant attributes map to 0. Values outside a reused fit's range land
    outside [0, 1] and must be clamped before any cube coding; see
    :func:`clamp_unit`.
    """
    X = np.asarray(ds.points, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ValueError("points contain non-finite values")
    if params is None:
        mins, maxs = X.min(axis=0), X.max(axis=0)
    else:
        mins, maxs = (np.asarray(p, dtype=np.float64) for p in params)
    span = maxs - mins
    safe = np.where(span > 0, span, 1.0)
    out = (X - mins) / safe
    out[:, span == 0] = 0.0
    return ds.map_points(lambda _: out), (mins, maxs)


def clamp_unit(points):
    """Clamp coordinates to [0, 1] (required before cube coding)."""
    return np.clip(np.asarray(points, dtype=np.float64), 0.0, 1.0)


def distance(metric, a, b):
    """Distance between two points of the metric's carrier.

    ``euclidean`` on coordinate vectors, ``hamming`` on equal-length bit
    strings, ``reduced`` on reduction codes (or equal-length tuples of codes).
    """
    if metric == "euclidean":
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
        return float(np.linalg.norm(a - b))
    if metric == "hamming":
        a = np.asarray(a)
        b = np.asarray(b)
        if a.shape != b.shape:
            raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
        return int(np.count_nonzero(a != b))
    if metric == "reduced":
        from .borel import reduced_distance

        return reduced_distance(a, b)
    raise ValueError(f"unknown metric {metric!r}")


def split_folds(ds, folds, seed):
    """Deterministic (stratified) k-fold partition.

    Returns a list of ``(train_idx, test_idx)`` pairs. Test sets partition the
    index set with sizes differing by at most one; splits are stratified by
    label whenever every class has at least ``folds`` members.
    """
    n = ds.n
    if folds < 2:
        raise ValueError("folds must be at least 2 (a single fold has no train set)")
    if folds > n:
        raise ValueError(f"folds={folds} exceeds dataset size n={n}")
    rng = streamed_rng(seed, _FOLD_STREAM)
    counts = np.bincount(ds.labels, minlength=ds.class_count)
    stratified = counts.min() >= folds

    test_sets = [[] for _ in range(folds)]
    sizes = np.zeros(folds, dtype=np.int64)
    if stratified:
        groups = [np.flatnonzero(ds.labels == c) for c in range(ds.class_count)]
    else:
        groups = [np.arange(n)]
    for members in groups:
        members = members[rng.permutation(len(members))]
        base, extra = divmod(len(members), folds)
        # extras go to the currently smallest folds (lowest id on ties),
        # keeping global test sizes within one of each other
        order = np.lexsort((np.arange(folds), sizes))
        take = np.full(folds, base, dtype=np.int64)
        take[order[:extra]] += 1
        pos = 0
        for f in range(folds):
            test_sets[f].extend(members[pos : pos + take[f]])
            pos += take[f]
        sizes += take

    out = []
    all_idx = np.arange(n)
    for f in range(folds):
        test = np.sort(np.asarray(test_sets[f], dtype=np.int64))
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        out.append((all_idx[mask], test))
    return out
