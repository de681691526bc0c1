"""Query-instability diagnostics for nearest-neighbour workloads.

High-dimensional data concentrates distances: the ball of radius
(1+c) * eps_kNN(q) around a query, barely wider than the k-NN ball, can
swallow a large fraction of the dataset, at which point any (k, c)-ANN
answer is uninformative. These tools measure that effect and evaluate the
VC sample bound that controls it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial.distance import cdist

from .knn import raw_distances


def eps_knn(ds, q, k, metric="euclidean"):
    """The smallest radius of a ball around ``q`` holding k datapoints,
    i.e. the k-th smallest distance; k = 1 gives the nearest-neighbour
    radius."""
    n = ds.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n]={n}, got {k}")
    dists, exact = raw_distances(ds, q, metric)
    if exact:
        from .borel import BorelCode

        gap = sorted(dists)[k - 1]
        if metric == "reduced" and isinstance(q, BorelCode):
            return gap / (1 << (q.d * q.B))
        return float(gap)
    return float(np.partition(np.asarray(dists), k - 1)[k - 1])


def is_c_unstable(ds, q, c, metric="euclidean"):
    """True when the (1+c) * eps_NN(q) ball holds at least half the data.

    Integer-valued carriers compare against the inflated radius exactly.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    dists, exact = raw_distances(ds, q, metric)
    if exact:
        eps_nn = min(dists)
        radius = Fraction(1 + c) * eps_nn
        count = sum(1 for d in dists if d <= radius)
    else:
        dists = np.asarray(dists)
        count = int(np.count_nonzero(dists <= (1 + c) * dists.min()))
    return 2 * count >= ds.n


@dataclass(frozen=True)
class InstabilityProfile:
    """Per-query radii and ball counts plus their aggregates.

    ``grid``/``mean_curve`` sample the empirical distance-to-count
    distribution function; ``mean_knn_radius`` and ``mean_inflated_radius``
    are the two vertical markers of the classic profile plot.
    """

    k: int
    c: float
    eps_nn: np.ndarray
    eps_knn: np.ndarray
    counts: np.ndarray
    unstable: np.ndarray
    grid: np.ndarray
    mean_curve: np.ndarray

    @property
    def mean_count(self):
        return float(self.counts.mean())

    @property
    def unstable_fraction(self):
        return float(self.unstable.mean())

    @property
    def mean_knn_radius(self):
        return float(self.eps_knn.mean())

    @property
    def mean_inflated_radius(self):
        return float((1 + self.c) * self.eps_knn.mean())


def _distance_rows(ds, queries, metric, exclude):
    """Per-query distance arrays as floats (exact carriers stay exact until
    the cast; used only for aggregate statistics)."""
    if metric == "euclidean" and isinstance(ds.points, np.ndarray):
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        rows = cdist(Q, np.asarray(ds.points, dtype=np.float64))
    else:
        rows = np.empty((len(queries), ds.n), dtype=np.float64)
        for i, q in enumerate(queries):
            d, _ = raw_distances(ds, q, metric)
            rows[i] = np.asarray(d, dtype=np.float64)
    if exclude is not None:
        rows[np.arange(len(queries)), np.asarray(exclude, dtype=np.int64)] = np.inf
    return rows


def instability_profile(ds, queries, k, c, metric="euclidean", radius_grid=None, exclude=None):
    """Instability statistics of a query workload.

    Parameters
    ----------
    ds, queries
        The dataset and the query points (same carrier).
    k, c
        Neighbour count and inflation factor of the audited ball.
    radius_grid
        Radii at which to sample the mean distance-to-count curve; defaults
        to 200 even steps from 0 to the largest observed distance.
    exclude
        Optional per-query dataset index to leave out (leave-one-out mode
        when the queries are the dataset itself).
    """
    if len(queries) == 0:
        raise ValueError("queries must be nonempty")
    n_eff = ds.n - (1 if exclude is not None else 0)
    if not 1 <= k <= n_eff:
        raise ValueError(f"k must be in [1, {n_eff}], got {k}")
    if c < 0:
        raise ValueError("c must be nonnegative")
    rows = _distance_rows(ds, queries, metric, exclude)
    rows.sort(axis=1)
    rows = rows[:, :n_eff]
    e_nn = rows[:, 0]
    e_knn = rows[:, k - 1]
    radii = (1 + c) * e_knn
    counts = np.empty(len(queries), dtype=np.int64)
    unstable = np.empty(len(queries), dtype=bool)
    for i in range(len(queries)):
        counts[i] = np.searchsorted(rows[i], radii[i], side="right")
        half_ball = np.searchsorted(rows[i], (1 + c) * e_nn[i], side="right")
        unstable[i] = 2 * half_ball >= n_eff
    if radius_grid is None:
        radius_grid = np.linspace(0.0, float(rows[:, -1].max()), 200)
    else:
        radius_grid = np.asarray(radius_grid, dtype=np.float64)
    curve = np.zeros(len(radius_grid))
    for i in range(len(queries)):
        curve += np.searchsorted(rows[i], radius_grid, side="right")
    curve /= len(queries)
    return InstabilityProfile(
        k=k,
        c=c,
        eps_nn=e_nn.copy(),
        eps_knn=e_knn.copy(),
        counts=counts,
        unstable=unstable,
        grid=radius_grid,
        mean_curve=curve,
    )


def vc_sample_bound(d, eps, delta):
    """Sample size sufficient for eps-approximation of Euclidean balls.

    The VC dimension of the balls in R^d is d + 1, giving
    ceil(max{8(d+1)/eps * lg(8e/eps), 4/eps * lg(2/delta)}) with lg = log2.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    term1 = 8 * (d + 1) / eps * math.log2(8 * math.e / eps)
    term2 = 4 / eps * math.log2(2 / delta)
    return math.ceil(max(term1, term2))
