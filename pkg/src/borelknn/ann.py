"""Approximate similarity search in the Hamming cube.

The pipeline: real vectors are discretized into the cube by a thermometer
code (so Hamming distance equals quantized l1 distance), and for every
distance range l in {1..D} the scheme keeps R independently drawn random
D x k' Bernoulli(1/l) matrices. Multiplying by such a matrix mod 2
approximately preserves distances around scale l/2, so a binary search over
l finds the smallest range whose image ball already holds k datapoints; the
k image-nearest candidates from each draw are merged and reranked by true
cube distance.

Range tables are materialized lazily on first probe and cached: each table
is a pure function of (master seed, range, draw), so results, digests, and
the structural examples are independent of what happens to be cached.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._bits import gf2_project_packed, hamming_packed, pack_bits, unpack_bits
from .borel import BorelCode
from .knn import NeighborSet, raw_distances
from .core import index_tie_ranks, streamed_rng

_MATRIX_STREAM = 202

MAGIC = b"BKAN"
FORMAT_VERSION = 1


def thermometer_encode_batch(X, B):
    """Vectorized :func:`thermometer_encode` over the rows of (n, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    if X.size and (X.min() < 0.0 or X.max() > 1.0):
        bad = np.argwhere((X < 0.0) | (X > 1.0))[0]
        raise ValueError(
            f"coordinate out of [0, 1]: row {bad[0]}, axis {bad[1]}"
        )
    levels = np.floor(X * B).astype(np.int64)  # x = 1 quantizes to level B
    ramp = np.arange(B, dtype=np.int64)
    return (ramp[None, None, :] < levels[:, :, None]).astype(np.uint8).reshape(n, d * B)


def thermometer_encode(x, B):
    """Discretize a cube point into {0,1}^(d*B).

    Each coordinate quantizes to a level v = floor(x * B) in {0..B} and is
    written as v ones followed by B - v zeros; Hamming distance between two
    encodings is then exactly the l1 distance of the level vectors.
    """
    return thermometer_encode_batch(np.asarray(x, dtype=np.float64)[None, :], B)[0]


@dataclass(frozen=True)
class AnnParams:
    """Scheme parameters.

    ``c`` is the approximation factor of the (k, c)-ANN contract; the
    projection distortion ``epsilon`` defaults to c/4 (an additive error of
    l*eps at scale l/2 corresponds to relative error about 2*eps).
    ``repeats`` defaults to ceil(log2(1/delta)) constant-confidence trials.
    """

    c: float = 0.5
    epsilon: float = None
    delta: float = 0.1
    C: float = 4.0
    repeats: int = None

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("approximation factor c must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("failure probability delta must lie in (0, 1)")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", self.c / 4.0)
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.repeats is None:
            object.__setattr__(self, "repeats", max(1, math.ceil(math.log2(1.0 / self.delta))))
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if self.C <= 0:
            raise ValueError("constant C must be positive")

    def target_dim(self, n):
        """Projected dimension k' = ceil(C * eps^-2 * log2 n)."""
        if n < 1:
            raise ValueError("n must be positive")
        return max(1, math.ceil(self.C * self.epsilon**-2 * math.log2(n))) if n > 1 else 1


@dataclass(frozen=True)
class BinaryMatrix:
    """A D x k' random GF(2) projection drawn for range ``ell``.

    ``cols`` holds the packed matrix columns, one row of uint64 words per
    output coordinate.
    """

    D: int
    kp: int
    ell: int
    cols: np.ndarray

    @property
    def bits(self):
        """The (D, k') 0/1 entries (unpacked on demand)."""
        return unpack_bits(self.cols, self.D).T.copy()


def sample_projection(D, n, ell, params, seed, rep=0):
    """Draw the Bernoulli(1/ell) projection matrix for one (range, draw).

    Entries are i.i.d. 1 with probability 1/ell; k' columns per the
    ``params.target_dim`` formula. Deterministic in (seed, ell, rep).
    """
    if not 1 <= ell <= D:
        raise ValueError(f"range ell must be in [1, D]={D}, got {ell}")
    kp = params.target_dim(n)
    rng = streamed_rng(seed, _MATRIX_STREAM, ell, rep)
    raw = rng.random((D, kp)) < (1.0 / ell)
    return BinaryMatrix(D=D, kp=kp, ell=ell, cols=pack_bits(raw.T.astype(np.uint8)))


def project(matrix, x):
    """Multiply a cube point by the matrix over GF(2)."""
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    if x.shape[0] != matrix.D:
        raise ValueError(f"length mismatch: point {x.shape[0]}, matrix rows {matrix.D}")
    packed = pack_bits(x[None, :])
    img = gf2_project_packed(packed, matrix.cols)
    return unpack_bits(img, matrix.kp)[0]


@dataclass(frozen=True)
class _Draw:
    """One materialized (range, draw) table: the matrix, the distinct image
    codewords (packed), and the dataset indices behind each codeword."""

    matrix: BinaryMatrix
    codes: np.ndarray
    groups: tuple
    sizes: np.ndarray

    def as_map(self):
        """Hash-map view: packed codeword bytes -> dataset indices."""
        return {
            self.codes[j].tobytes(): tuple(int(i) for i in self.groups[j])
            for j in range(len(self.groups))
        }


@dataclass(frozen=True)
class RangeTable:
    """All R draws for one range ell."""

    ell: int
    draws: tuple


class AnnIndex:
    """The full indexing scheme over a Hamming-cube dataset.

    Range tables for every ell in {1..D} are available through
    :meth:`range_table`; they are built on first use (each is a pure
    function of the master seed) and cached.
    """

    def __init__(self, data_packed, D, params, k, seed, kp, meta=None):
        self.data = data_packed
        self.n = data_packed.shape[0]
        self.D = D
        self.params = params
        self.k = k
        self.seed = seed
        self.kp = kp
        self.meta = dict(meta) if meta else {}
        self._tables = {}

    def range_table(self, ell):
        """Materialize (or fetch) the R draws for one range."""
        if not 1 <= ell <= self.D:
            raise ValueError(f"range ell must be in [1, D]={self.D}, got {ell}")
        tbl = self._tables.get(ell)
        if tbl is None:
            draws = tuple(
                self._build_draw(ell, rep) for rep in range(self.params.repeats)
            )
            tbl = RangeTable(ell=ell, draws=draws)
            self._tables[ell] = tbl
        return tbl

    def _build_draw(self, ell, rep):
        matrix = sample_projection(self.D, self.n, ell, self.params, self.seed, rep)
        imgs = gf2_project_packed(self.data, matrix.cols)
        codes, inverse = np.unique(imgs, axis=0, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(codes)))
        groups = tuple(np.split(order, bounds[1:]))
        sizes = np.asarray([len(g) for g in groups], dtype=np.int64)
        return _Draw(matrix=matrix, codes=codes, groups=groups, sizes=sizes)

    def materialize_all(self):
        """Force every range table into the cache (toy scales only)."""
        for ell in range(1, self.D + 1):
            self.range_table(ell)
        return self

    def to_bytes(self):
        """Serialized form: magic, version, JSON header, packed dataset.

        Tables are not stored; they are reconstructed bit-exactly from the
        seed on demand.
        """
        fields = {
            "D": self.D,
            "n": self.n,
            "k": self.k,
            "c": self.params.c,
            "epsilon": self.params.epsilon,
            "delta": self.params.delta,
            "C": self.params.C,
            "repeats": self.params.repeats,
            "seed": self.seed,
        }
        if self.meta:
            fields["meta"] = self.meta
        header = json.dumps(fields, sort_keys=True).encode()
        body = np.ascontiguousarray(self.data).astype("<u8").tobytes()
        return b"".join(
            [MAGIC, struct.pack("<HI", FORMAT_VERSION, len(header)), header, body]
        )

    def digest(self):
        """sha256 of the serialized index; rebuild-deterministic."""
        return hashlib.sha256(self.to_bytes()).hexdigest()

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())


def build_ann_index(encoded, params, k, seed, meta=None):
    """Index an encoded dataset (list or array of equal-length bit strings).

    Requires n >= k. The build itself only packs the data; range tables
    follow lazily, deterministically in ``seed``. ``meta`` is an optional
    JSON-serializable dict carried verbatim through save/load (callers use
    it to remember how the bit strings were produced).
    """
    rows = [np.asarray(r, dtype=np.uint8).reshape(-1) for r in encoded]
    if not rows:
        raise ValueError("cannot index an empty dataset")
    D = rows[0].shape[0]
    for i, r in enumerate(rows):
        if r.shape[0] != D:
            raise ValueError(
                f"inconsistent string lengths: row {i} has {r.shape[0]}, expected {D}"
            )
    n = len(rows)
    if n < k:
        raise ValueError(f"need n >= k, got n={n}, k={k}")
    if k < 1:
        raise ValueError("k must be positive")
    data = pack_bits(np.stack(rows))
    return AnnIndex(
        data, D=D, params=params, k=k, seed=seed, kp=params.target_dim(n), meta=meta
    )


def load_ann_index(path):
    """Read an index file written by :meth:`AnnIndex.save`."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not an index file (bad magic)")
    version, hlen = struct.unpack_from("<HI", blob, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    header = json.loads(blob[10 : 10 + hlen].decode())
    W = (header["D"] + 63) // 64
    data = np.frombuffer(blob[10 + hlen :], dtype="<u8").reshape(header["n"], W)
    params = AnnParams(
        c=header["c"],
        epsilon=header["epsilon"],
        delta=header["delta"],
        C=header["C"],
        repeats=header["repeats"],
    )
    idx = AnnIndex(
        np.ascontiguousarray(data.astype(np.uint64)),
        D=header["D"],
        params=params,
        k=header["k"],
        seed=header["seed"],
        kp=params.target_dim(header["n"]),
        meta=header.get("meta"),
    )
    return idx


def _pull_image_nearest(draw, dist_u, k, tie_order):
    """Dataset indices of the k image-nearest points of one draw.

    Selection is at datapoint level: all members of codewords strictly
    inside the boundary image distance are taken, and the remaining slots
    among boundary-tied codewords go to the ``tie_order``-first members.
    """
    order = np.argsort(dist_u, kind="stable")
    csum = np.cumsum(draw.sizes[order])
    cut = int(np.searchsorted(csum, k))  # first position reaching k members
    boundary = dist_u[order[cut]]
    picked = []
    pool = []
    for pos in order:
        if dist_u[pos] < boundary:
            picked.extend(int(i) for i in draw.groups[pos])
        elif dist_u[pos] == boundary:
            pool.extend(int(i) for i in draw.groups[pos])
    if len(picked) + len(pool) > k:
        pool = tie_order(pool)
    picked.extend(pool[: k - len(picked)])
    return picked


def kann_query(index, q, k, seed=0, ordinal=0):
    """Answer the (k, c)-ANN query for one cube point.

    Per draw, a binary search over l in {1..D} finds the smallest range
    whose table holds at least k datapoints within image distance l of the
    projected query; the k image-nearest candidates of each draw are merged
    across the R draws and the k nearest to q in the original cube are
    returned. With confidence about 1 - delta all of them lie within
    (1 + c) * eps_kNN(q) of the query. Candidates the image distance cannot
    separate are pulled closest-in-cube first, so a zero-radius query (an
    exact duplicate of a datapoint) always returns a point at distance 0.
    """
    if not 1 <= k <= index.n:
        raise ValueError(f"k must be in [1, n]={index.n}, got {k}")
    q = np.asarray(q, dtype=np.uint8).reshape(-1)
    if q.shape[0] != index.D:
        raise ValueError(f"query length {q.shape[0]}, index expects {index.D}")
    q_packed = pack_bits(q[None, :])

    ranks_cache = {}

    def ranks_fn():
        if "r" not in ranks_cache:
            ranks_cache["r"] = index_tie_ranks(seed, ordinal, index.n)
        return ranks_cache["r"]

    def tie_order(pool):
        # image distance cannot split these candidates, so prefer the ones
        # actually closer in the original cube (exact matches never lose a
        # pull slot), then the per-query permutation
        arr = np.asarray(pool, dtype=np.int64)
        true_d = hamming_packed(index.data[arr], q_packed[0])
        ranks = ranks_fn()
        return [int(i) for i in arr[np.lexsort((ranks[arr], true_d))]]

    bucket = set()
    for rep in range(index.params.repeats):
        best = None
        lo, hi = 1, index.D
        while lo <= hi:
            mid = (lo + hi) // 2
            draw = index.range_table(mid).draws[rep]
            q_img = gf2_project_packed(q_packed, draw.matrix.cols)[0]
            dist_u = hamming_packed(q_img, draw.codes)
            if draw.sizes[dist_u <= mid].sum() >= k:
                best = (draw, dist_u)
                hi = mid - 1
            else:
                lo = mid + 1
        if best is None:
            # no range qualified; fall back to the widest range's draw
            draw = index.range_table(index.D).draws[rep]
            q_img = gf2_project_packed(q_packed, draw.matrix.cols)[0]
            best = (draw, hamming_packed(q_img, draw.codes))
        bucket.update(_pull_image_nearest(best[0], best[1], k, tie_order))

    cand = np.asarray(sorted(bucket), dtype=np.int64)
    true_d = hamming_packed(q_packed[0], index.data[cand])
    order = np.argsort(true_d, kind="stable")
    kth = true_d[order[k - 1]]
    ties = len(np.unique(true_d[order[:k]])) < k or (
        k < len(cand) and true_d[order[k]] == kth
    )
    if ties:
        ranks = ranks_fn()
        within = order[true_d[order] <= kth]
        order = within[np.lexsort((ranks[cand[within]], true_d[within]))]
    sel = cand[order[:k]]
    return NeighborSet(sel, true_d[order[:k]].astype(np.float64))


def adversarial_kann(ds, q, k, c, bias, metric="euclidean", seed=0, ordinal=0):
    """A worst-case-legal (k, c)-ANN oracle.

    Collects every point within (1 + c) * eps_kNN(q) and returns the k of
    them that maximize the count of the ``bias`` label (distance as the
    tie-break). Every returned point is within the contract radius by
    construction; integer-valued carriers compare against the inflated
    radius in exact rational arithmetic.
    """
    n = ds.n
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, n]={n}, got {k}")
    dists, is_int = raw_distances(ds, q, metric)
    if is_int:
        gaps = list(dists)
        eps_k = sorted(gaps)[k - 1]
        radius = Fraction(1 + c) * eps_k
        ball = [i for i, g in enumerate(gaps) if g <= radius]
        dist_of = lambda i: gaps[i]
    else:
        dists = np.asarray(dists, dtype=np.float64)
        eps_k = np.partition(dists, k - 1)[k - 1]
        ball = list(np.flatnonzero(dists <= (1 + c) * eps_k))
        dist_of = lambda i: dists[i]

    bias_flag = {i: 0 if ds.labels[i] == bias else 1 for i in ball}
    keys = [(bias_flag[i], dist_of(i)) for i in ball]
    if len(set(keys)) < len(keys):
        ranks = index_tie_ranks(seed, ordinal, n)
        ball.sort(key=lambda i: (bias_flag[i], dist_of(i), ranks[i]))
    else:
        ball.sort(key=lambda i: (bias_flag[i], dist_of(i)))
    chosen = ball[:k]
    chosen.sort(key=dist_of)
    scale = None
    if metric == "reduced" and isinstance(ds.points[0], BorelCode):
        scale = 1 << (ds.points[0].d * ds.points[0].B)
    dist_out = [dist_of(i) / scale if scale else float(dist_of(i)) for i in chosen]
    return NeighborSet(
        np.asarray(chosen, dtype=np.int64), np.asarray(dist_out, dtype=np.float64)
    )
