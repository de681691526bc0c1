"""Exact k-NN: brute-force oracle, sorted one-dimensional index for reduced
data, majority and weighted votes, learning rules, and the transport
combinator.

Tie-breaking follows one seeded random permutation of dataset indices per
query (stream ``(seed, ordinal, 0)``) for equidistant neighbours, and a
seeded permutation of class ids (stream ``(seed, ordinal, 1)``) for vote
ties, so every prediction is reproducible and independent of scheduling.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .borel import BorelCode, code_gap
from .core import (
    LabeledDataset,
    class_tie_order,
    index_tie_ranks,
    streamed_rng,
)


@dataclass(frozen=True)
class NeighborSet:
    """k neighbours: distinct dataset indices with nondecreasing distances."""

    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        dist = np.asarray(self.distances, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "distances", dist)
        if idx.shape != dist.shape or idx.ndim != 1:
            raise ValueError("indices/distances must be matching 1-d arrays")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("neighbour indices must be distinct")
        if len(dist) > 1 and (np.diff(dist) < 0).any():
            raise ValueError("distances must be nondecreasing")

    @property
    def k(self):
        return len(self.indices)


def _order_ties(dist_of, candidates, seed, ordinal, n):
    """Sort candidate indices by (distance, per-query permutation rank)."""
    ranks = index_tie_ranks(seed, ordinal, n)
    return sorted(candidates, key=lambda i: (dist_of(i), ranks[i]))


def raw_distances(ds, q, metric):
    """Distances from ``q`` to every dataset point, in the carrier's native
    arithmetic.

    Returns ``(distances, exact)``: an integer list (exact big-int gaps or
    Hamming counts) with ``exact=True``, or a float array with
    ``exact=False``.
    """
    if metric == "euclidean":
        pts = np.asarray(ds.points, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64).reshape(-1)
        if q.shape[0] != pts.shape[1]:
            raise ValueError(f"dimension mismatch: {q.shape[0]} vs {pts.shape[1]}")
        return np.linalg.norm(pts - q, axis=1), False
    if metric == "hamming":
        pts = np.asarray(ds.points)
        q = np.asarray(q).reshape(-1)
        if q.shape[0] != pts.shape[1]:
            raise ValueError(f"length mismatch: {q.shape[0]} vs {pts.shape[1]}")
        return [int(v) for v in np.count_nonzero(pts != q, axis=1)], True
    if metric == "reduced":
        pts = ds.points
        if isinstance(pts[0], BorelCode):
            return [code_gap(p, q) for p in pts], True
        from .borel import reduced_distance

        return np.asarray([reduced_distance(p, q) for p in pts]), False
    raise ValueError(f"unknown metric {metric!r}")


def _select_k_array(dists, k, seed, ordinal):
    """k smallest of a numeric distance array, ties by seeded permutation.

    Returns indices ordered by (distance, rank); the permutation is only
    drawn when equal distances actually occur among the selected.
    """
    n = len(dists)
    part = np.argpartition(dists, k - 1)[:k] if k < n else np.arange(n)
    kth = dists[part].max()
    within = np.flatnonzero(dists <= kth)
    if len(within) == k and len(np.unique(dists[within])) == k:
        return within[np.argsort(dists[within], kind="stable")]
    ranks = index_tie_ranks(seed, ordinal, n)
    order = within[np.lexsort((ranks[within], dists[within]))]
    return order[:k]


def brute_knn(ds, q, k, metric="euclidean", seed=0, ordinal=0):
    """The k nearest dataset points to ``q`` by linear scan.

    Works on every carrier (the test oracle for all other search paths).
    Equidistant candidates are ranked by the per-query seeded permutation.
    """
    n = ds.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n]={n}, got {k}")
    dists, exact = raw_distances(ds, q, metric)
    if not exact:
        sel = _select_k_array(dists, k, seed, ordinal)
        return NeighborSet(sel, dists[sel])
    order = sorted(range(n), key=lambda i: dists[i])
    kth = dists[order[k - 1]]
    ties = len({dists[i] for i in order[:k]}) < k or (k < n and dists[order[k]] == kth)
    if ties:
        within = [i for i in order if dists[i] <= kth]
        order = _order_ties(lambda i: dists[i], within, seed, ordinal, n)
    sel = np.asarray(order[:k], dtype=np.int64)
    scale = (
        1 << (q.d * q.B)
        if metric == "reduced" and isinstance(q, BorelCode)
        else 1
    )
    return NeighborSet(
        sel, np.asarray([dists[i] / scale for i in sel], dtype=np.float64)
    )


@dataclass(frozen=True)
class Sorted1DIndex:
    """Reduced codes in ascending order; answers k-NN on the line in
    O(log n + k) by binary search plus two-pointer outward expansion."""

    values: tuple
    original: np.ndarray
    d: int
    B: int

    @property
    def n(self):
        return len(self.values)


def sorted_index_build(codes):
    """Build a :class:`Sorted1DIndex` from single-block reduction codes."""
    if len(codes) == 0:
        raise ValueError("cannot index an empty code list")
    d, B = codes[0].d, codes[0].B
    for c in codes:
        if (c.d, c.B) != (d, B):
            raise ValueError("codes mix (d, B) parameters")
    order = sorted(range(len(codes)), key=lambda i: (codes[i].value, i))
    return Sorted1DIndex(
        values=tuple(codes[i].value for i in order),
        original=np.asarray(order, dtype=np.int64),
        d=d,
        B=B,
    )


def sorted_knn(index, q, k, seed=0, ordinal=0):
    """k nearest stored codes to ``q`` on the line.

    Identical distance multiset to :func:`brute_knn` under the reduced
    metric; gap comparisons are exact integer arithmetic.
    """
    n = index.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n]={n}, got {k}")
    if (q.d, q.B) != (index.d, index.B):
        raise ValueError("query (d, B) does not match the index")
    vals = index.values
    qa = q.value
    pos = bisect_left(vals, qa)
    lo, hi = pos - 1, pos

    picked = []  # positions in sorted order, ascending gap
    for _ in range(k):
        if lo < 0:
            picked.append(hi)
            hi += 1
        elif hi >= n:
            picked.append(lo)
            lo -= 1
        elif qa - vals[lo] <= vals[hi] - qa:
            picked.append(lo)
            lo -= 1
        else:
            picked.append(hi)
            hi += 1
    kth_gap = max(abs(vals[p] - qa) for p in picked)
    # pull in every remaining position tied at the boundary gap
    tied_extra = []
    while lo >= 0 and qa - vals[lo] == kth_gap:
        tied_extra.append(lo)
        lo -= 1
    while hi < n and vals[hi] - qa == kth_gap:
        tied_extra.append(hi)
        hi += 1

    scale = 1 << (index.d * index.B)
    if tied_extra or len({abs(vals[p] - qa) for p in picked}) < k:
        cand = picked + tied_extra
        orig = [int(index.original[p]) for p in cand]
        gap_of = {index.original[p]: abs(vals[p] - qa) for p in cand}
        chosen = _order_ties(lambda i: gap_of[i], orig, seed, ordinal, n)[:k]
        gaps = [gap_of[i] for i in chosen]
    else:
        picked.sort(key=lambda p: abs(vals[p] - qa))
        chosen = [int(index.original[p]) for p in picked]
        gaps = [abs(vals[p] - qa) for p in picked]
    return NeighborSet(
        np.asarray(chosen, dtype=np.int64),
        np.asarray([g / scale for g in gaps], dtype=np.float64),
    )


def _break_class_tie(tied, seed, ordinal, class_count):
    order = class_tie_order(seed, ordinal, class_count)
    rank = np.empty(class_count, dtype=np.int64)
    rank[order] = np.arange(class_count)
    return int(tied[np.argmin(rank[tied])])


def majority_vote(labels, class_count, seed=0, ordinal=0):
    """Label of maximal count; ties go to the seeded permutation's
    first-ranked tied class."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot vote over an empty label list")
    counts = np.bincount(labels, minlength=class_count)
    tied = np.flatnonzero(counts == counts.max())
    if len(tied) == 1:
        return int(tied[0])
    return _break_class_tie(tied, seed, ordinal, class_count)


def weighted_vote(weights, labels, class_count, seed=0, ordinal=0):
    """Label maximizing summed weight; ties as in :func:`majority_vote`.

    Weights must be nonnegative and sum to one within 1e-12. With uniform
    weights 1/k this returns exactly the majority label.
    """
    weights = np.asarray(weights, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if weights.shape != labels.shape:
        raise ValueError("weights and labels must have matching length")
    if (weights < 0).any():
        raise ValueError("weights must be nonnegative")
    if abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to one, got {weights.sum()!r}")
    scores = np.bincount(labels, weights=weights, minlength=class_count)
    tied = np.flatnonzero(scores == scores.max())
    if len(tied) == 1:
        return int(tied[0])
    return _break_class_tie(tied, seed, ordinal, class_count)


def sqrt_schedule(n):
    """The default consistency schedule k = ceil(sqrt(n))."""
    return math.ceil(math.sqrt(n))


class Classifier:
    """Trained model: maps query points to labels, deterministically."""

    def classify(self, q, ordinal=0):
        raise NotImplementedError

    def predict(self, points, ordinals=None):
        """Classify a batch; ``ordinals`` default to the batch positions."""
        if ordinals is None:
            ordinals = range(len(points))
        return np.asarray(
            [self.classify(points[i], o) for i, o in enumerate(ordinals)],
            dtype=np.int64,
        )


class _NeighborVoteClassifier(Classifier):
    def __init__(self, ds, k, seed):
        self.ds = ds
        self.k = k
        self.seed = seed

    def _neighbors(self, q, ordinal):
        raise NotImplementedError

    def classify(self, q, ordinal=0):
        ns = self._neighbors(q, ordinal)
        return majority_vote(
            self.ds.labels[ns.indices], self.ds.class_count, self.seed, ordinal
        )


class _BruteClassifier(_NeighborVoteClassifier):
    def __init__(self, ds, k, seed, metric):
        super().__init__(ds, k, seed)
        self.metric = metric

    def _neighbors(self, q, ordinal):
        return brute_knn(self.ds, q, self.k, self.metric, self.seed, ordinal)


class _Sorted1DClassifier(_NeighborVoteClassifier):
    def __init__(self, ds, k, seed):
        super().__init__(ds, k, seed)
        self.index = sorted_index_build(list(ds.points))

    def _neighbors(self, q, ordinal):
        return sorted_knn(self.index, q, self.k, self.seed, ordinal)


class _KannClassifier(_NeighborVoteClassifier):
    def __init__(self, ds, k, seed, params, bits):
        from . import ann

        super().__init__(ds, k, seed)
        encoded = ann.thermometer_encode_batch(ds.points, bits)
        self.bits = bits
        self.index = ann.build_ann_index(encoded, params, k, seed)

    def _neighbors(self, q, ordinal):
        from . import ann

        enc = ann.thermometer_encode(np.asarray(q, dtype=np.float64), self.bits)
        return ann.kann_query(self.index, enc, self.k, self.seed, ordinal)


class _AdversarialClassifier(_NeighborVoteClassifier):
    def __init__(self, ds, k, seed, c, bias, metric):
        super().__init__(ds, k, seed)
        self.c = c
        self.bias = bias
        self.metric = metric

    def _neighbors(self, q, ordinal):
        from .ann import adversarial_kann

        return adversarial_kann(
            self.ds, q, self.k, self.c, self.bias, self.metric, self.seed, ordinal
        )


KNN_SOURCES = ("brute", "sorted1d", "kann", "adversarial")


@dataclass(frozen=True)
class LearningRule:
    """A family of classifiers indexed by the sample: ``train`` stores or
    indexes the sample and returns a deterministic classifier."""

    source: str
    k_schedule: object
    seed: int
    options: dict = field(default_factory=dict)

    def train(self, ds):
        k = int(self.k_schedule(ds.n))
        if not 1 <= k <= ds.n:
            raise ValueError(
                f"k schedule produced k={k} outside [1, n]={ds.n}"
            )
        opt = self.options
        if self.source == "brute":
            return _BruteClassifier(ds, k, self.seed, opt.get("metric", "euclidean"))
        if self.source == "sorted1d":
            return _Sorted1DClassifier(ds, k, self.seed)
        if self.source == "kann":
            from .ann import AnnParams

            params = opt.get("params") or AnnParams(c=opt.get("c", 0.5))
            return _KannClassifier(ds, k, self.seed, params, opt.get("bits", 16))
        if self.source == "adversarial":
            return _AdversarialClassifier(
                ds,
                k,
                self.seed,
                opt.get("c", 0.5),
                opt.get("bias", 1),
                opt.get("metric", "euclidean"),
            )
        raise ValueError(f"unknown neighbour source {self.source!r}")


def make_knn_rule(source, k_schedule=None, seed=0, **options):
    """Build a k-NN learning rule over the given neighbour source.

    ``source`` is one of ``brute`` (linear scan, any metric), ``sorted1d``
    (reduced codes on the line), ``kann`` (the approximate index), or
    ``adversarial`` (worst-case-legal approximate oracle; options ``c`` and
    ``bias``). ``k_schedule`` maps n to k and defaults to ceil(sqrt(n)).
    """
    if source not in KNN_SOURCES:
        raise ValueError(f"unknown neighbour source {source!r}")
    return LearningRule(
        source=source,
        k_schedule=k_schedule or sqrt_schedule,
        seed=seed,
        options=options,
    )


class _TransportedClassifier(Classifier):
    def __init__(self, inner, phi):
        self.inner = inner
        self.phi = phi

    def classify(self, q, ordinal=0):
        mapped = self.phi(np.asarray(q, dtype=np.float64)[None, :])
        return self.inner.classify(mapped[0], ordinal)

    def predict(self, points, ordinals=None):
        return self.inner.predict(self.phi(points), ordinals)


@dataclass(frozen=True)
class TransportedRule:
    """The transport of ``rule`` along ``phi``: train on the phi-image of the
    sample, classify q by the base classifier at phi(q).

    Predictions (hence learning error) coincide exactly with running the base
    rule on the mapped data, for any injective phi.
    """

    rule: object
    phi: object

    def train(self, ds):
        return _TransportedClassifier(self.rule.train(ds.map_points(self.phi)), self.phi)


def transport_rule(rule, phi):
    """Transport ``rule`` along the point mapping ``phi``.

    ``phi`` receives a whole point container (an (n, d) array or a code list)
    and returns the mapped container.
    """
    return TransportedRule(rule=rule, phi=phi)


def empirical_error(classifier, test, ordinals=None):
    """Fraction of test rows the classifier mislabels."""
    if test.n == 0:
        raise ValueError("empty test set")
    pred = classifier.predict(test.points, ordinals)
    return float(np.mean(pred != test.labels))
