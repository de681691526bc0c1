"""Experiment harness: synthetic two-measure spaces with analytic Bayes
error, consistency curves, and the cross-validation benchmark protocol.

Synthetic problems are described by an ``Mm2Spec``: a marginal law for X
plus a piecewise-constant regression function eta(x) = P(Y=1 | X=x) given
as box->probability pairs. Keeping eta piecewise constant makes the Bayes
error a finite sum, so learning curves can report excess error exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from ._version import __version__
from .borel import ReductionConfig, borel_map_batch, grouped_reduce_batch
from .core import (
    LabeledDataset,
    check_seed,
    clamp_unit,
    derive_seed,
    normalize_unit_cube,
    split_folds,
    streamed_rng,
)
from .instability import InstabilityProfile
from .knn import brute_knn, empirical_error, majority_vote

_SYNTH_STREAM = 303

_MARGINALS = ("uniform", "gaussian", "empirical")


@dataclass(frozen=True)
class Box:
    """A half-open axis-aligned box [lo, hi) with a constant eta value."""

    lo: tuple
    hi: tuple
    p: float

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi):
            raise ValueError("box lo/hi dimensions differ")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"eta value must be in [0, 1], got {self.p}")

    def contains(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((X >= lo) & (X < hi), axis=1)


@dataclass(frozen=True)
class Mm2Spec:
    """A synthetic binary classification problem.

    ``marginal`` is the law of X: ``uniform`` on [0,1)^d, ``gaussian``
    (standard normal per coordinate), or ``empirical`` (bootstrap rows of
    ``data``). ``eta`` is a tuple of :class:`Box` regions that must
    partition the support of the marginal.
    """

    marginal: str
    d: int
    eta: tuple
    data: np.ndarray = None

    def __post_init__(self):
        if self.marginal not in _MARGINALS:
            raise ValueError(f"unknown marginal {self.marginal!r}")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        eta = tuple(self.eta)
        if not eta:
            raise ValueError("eta needs at least one region")
        for box in eta:
            if len(box.lo) != self.d:
                raise ValueError(
                    f"region dimension {len(box.lo)} does not match d={self.d}"
                )
        object.__setattr__(self, "eta", eta)
        if self.marginal == "empirical":
            if self.data is None:
                raise ValueError("empirical marginal needs a data array")
            data = np.asarray(self.data, dtype=np.float64)
            if data.ndim != 2 or data.shape[1] != self.d or not len(data):
                raise ValueError("empirical data must be a nonempty (n, d) array")
            if not np.isfinite(data).all():
                raise ValueError("empirical data contains non-finite values")
            object.__setattr__(self, "data", data)

    def _box_mass(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        if self.marginal == "uniform":
            width = np.clip(np.minimum(hi, 1.0) - np.maximum(lo, 0.0), 0.0, None)
            return float(np.prod(width))
        if self.marginal == "gaussian":
            return float(np.prod(norm.cdf(hi) - norm.cdf(lo)))
        inside = np.all((self.data >= lo) & (self.data < hi), axis=1)
        return float(np.mean(inside))

    def region_masses(self):
        return np.asarray([self._box_mass(b.lo, b.hi) for b in self.eta])

    def check_partition(self):
        """Raise unless the regions tile the marginal's support."""
        if self.marginal == "empirical":
            hits = np.stack([b.contains(self.data) for b in self.eta]).sum(axis=0)
            if (hits != 1).any():
                raise ValueError("regions do not partition the support")
            return
        masses = self.region_masses()
        if abs(masses.sum() - 1.0) > 1e-9:
            raise ValueError(
                f"regions do not partition the support: total mass {masses.sum()}"
            )
        for i, a in enumerate(self.eta):
            for b in self.eta[i + 1 :]:
                lo = np.maximum(a.lo, b.lo)
                hi = np.minimum(a.hi, b.hi)
                if (lo < hi).all() and self._box_mass(lo, hi) > 0:
                    raise ValueError("regions do not partition the support: overlap")

    def eta_of(self, X):
        """eta evaluated at each row of X; rows outside every region error."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(len(X), -1.0)
        for box in self.eta:
            mask = box.contains(X) & (out < 0)
            out[mask] = box.p
        if (out < 0).any():
            bad = int(np.flatnonzero(out < 0)[0])
            raise ValueError(f"point outside every eta region (row {bad})")
        return out


def step_spec():
    """The canonical 1-D test problem: uniform X on [0, 1), eta = 0.9 below
    0.5 and 0.1 above. Its Bayes error is exactly 0.1."""
    return Mm2Spec(
        marginal="uniform",
        d=1,
        eta=(Box((0.0,), (0.5,), 0.9), Box((0.5,), (1.0,), 0.1)),
    )


def synth_mm2(spec, n, seed):
    """Draw n i.i.d. pairs: X from the marginal, Y Bernoulli(eta(X))."""
    check_seed(seed)
    if n < 1:
        raise ValueError("sample size must be positive")
    spec.check_partition()
    rng = streamed_rng(seed, _SYNTH_STREAM)
    if spec.marginal == "uniform":
        X = rng.random((n, spec.d))
    elif spec.marginal == "gaussian":
        X = rng.standard_normal((n, spec.d))
    else:
        X = spec.data[rng.integers(0, len(spec.data), size=n)]
    labels = (rng.random(n) < spec.eta_of(X)).astype(np.int64)
    return LabeledDataset(points=X, labels=labels, class_count=2)


def bayes_error(spec):
    """The optimal misclassification error: sum of mass * min(p, 1-p)."""
    spec.check_partition()
    masses = spec.region_masses()
    ps = np.asarray([b.p for b in spec.eta])
    return float(np.sum(masses * np.minimum(ps, 1.0 - ps)))


def _pool_map(fn, items, threads):
    """Map fn over items into order-indexed slots; the worker count never
    affects the result, only the schedule."""
    if threads < 0:
        raise ValueError("threads must be >= 0 (0 = auto)")
    workers = threads if threads else (os.cpu_count() or 1)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class ConsistencyCurve:
    """Excess-error learning curve of one rule on one synthetic problem."""

    n_grid: tuple
    errors: np.ndarray  # (len(n_grid), trials) empirical test errors
    bayes: float
    seed: int
    label: str = ""

    def __post_init__(self):
        errors = np.asarray(self.errors, dtype=np.float64)
        object.__setattr__(self, "errors", errors)
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))
        if errors.ndim != 2 or errors.shape[0] != len(self.n_grid):
            raise ValueError("errors must be an (n_grid, trials) matrix")
        if (errors < 0).any() or (errors > 1).any():
            raise ValueError("errors must lie in [0, 1]")
        if not 0.0 <= self.bayes <= 1.0:
            raise ValueError("bayes error must lie in [0, 1]")

    @property
    def trials(self):
        return self.errors.shape[1]

    @property
    def mean_error(self):
        return self.errors.mean(axis=1)

    @property
    def std_error(self):
        return self.errors.std(axis=1)

    @property
    def excess(self):
        return self.mean_error - self.bayes


def run_consistency(
    spec, rule_factory, n_grid, trials, seed=0, test_size=10000, threads=1, label=""
):
    """Learning curve of a rule family over growing sample sizes.

    For each (n, trial) cell a fresh training sample of size n and a fresh
    ``test_size``-point test sample are drawn, a rule is built by
    ``rule_factory(sub_seed)``, and its empirical test error recorded. All
    sub-seeds derive from ``seed`` and the cell coordinates.
    """
    check_seed(seed)
    n_grid = tuple(int(v) for v in n_grid)
    if not n_grid:
        raise ValueError("n_grid must be nonempty")
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])) or n_grid[0] < 1:
        raise ValueError("n_grid must be strictly increasing and positive")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if test_size < 1:
        raise ValueError("test_size must be positive")
    bayes = bayes_error(spec)

    def cell(job):
        gi, t = job
        n = n_grid[gi]
        try:
            train = synth_mm2(spec, n, derive_seed(seed, gi, t, 0))
            test = synth_mm2(spec, test_size, derive_seed(seed, gi, t, 1))
            rule = rule_factory(derive_seed(seed, gi, t, 2))
            return empirical_error(rule.train(train), test)
        except Exception as exc:
            raise RuntimeError(f"rule failed at n={n}, trial={t}: {exc}") from exc

    jobs = [(gi, t) for gi in range(len(n_grid)) for t in range(trials)]
    flat = _pool_map(cell, jobs, threads)
    errors = np.asarray(flat, dtype=np.float64).reshape(len(n_grid), trials)
    return ConsistencyCurve(
        n_grid=n_grid, errors=errors, bayes=bayes, seed=seed, label=label
    )


@dataclass(frozen=True)
class CvReport:
    """Cross-validation outcome: correct counts per k, over all test folds."""

    variant: str
    counts: np.ndarray  # correct classifications for k = 1..k_max
    n: int
    folds: int
    seed: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 1 or not len(counts):
            raise ValueError("counts must be a nonempty vector")
        if (counts < 0).any() or (counts > self.n).any():
            raise ValueError("correct counts must lie in [0, n]")

    @property
    def k_max(self):
        return len(self.counts)

    @property
    def accuracy(self):
        return self.counts / self.n

    @property
    def best_k(self):
        # argmax returns the first maximum, so ties favor the smaller k
        return int(np.argmax(self.counts)) + 1

    @property
    def correct(self):
        return int(self.counts[self.best_k - 1])

    @property
    def incorrect(self):
        return self.n - self.correct


def run_cv(
    ds, k_max=20, folds=10, variant="original", cfg=None, seed=0, strict=False, threads=1
):
    """Stratified k-fold cross-validation over a grid of k values.

    ``original`` scores Euclidean k-NN on min-max normalized attributes;
    ``reduced`` additionally clamps and reduces every fold's points to
    interleaved codes (one code per point when cfg.group_size covers all
    coordinates, tuples of codes otherwise). Normalization is fit on the
    full dataset unless ``strict``, which refits inside each training fold.
    Each test row is classified once with k_max neighbours; prefix votes
    give every smaller k, since neighbour sets are nested along the
    (distance, tie-rank) order.
    """
    check_seed(seed)
    if variant not in ("original", "reduced"):
        raise ValueError(f"unknown variant {variant!r}")
    if cfg is None:
        cfg = ReductionConfig()
    if not isinstance(ds.points, np.ndarray):
        raise TypeError("cross-validation expects coordinate data")
    fold_list = split_folds(ds, folds, seed)
    min_train = min(len(tr) for tr, _ in fold_list)
    if not 1 <= k_max <= min_train:
        raise ValueError(
            f"k_max must be in [1, {min_train}] (smallest training fold), got {k_max}"
        )
    if not strict:
        full, _ = normalize_unit_cube(ds)

    def encode(points):
        pts = clamp_unit(points)
        d = pts.shape[1]
        if cfg.group_size is None or cfg.group_size >= d:
            return borel_map_batch(pts, ReductionConfig(bits=cfg.bits))
        return grouped_reduce_batch(pts, cfg)

    def fold(job):
        train_idx, test_idx = job
        if strict:
            train_ds, params = normalize_unit_cube(ds.subset(train_idx))
            test_ds, _ = normalize_unit_cube(ds.subset(test_idx), params)
        else:
            train_ds = full.subset(train_idx)
            test_ds = full.subset(test_idx)
        if variant == "reduced":
            train_ds = train_ds.map_points(encode)
            queries = encode(test_ds.points)
            metric = "reduced"
        else:
            queries = test_ds.points
            metric = "euclidean"
        counts = np.zeros(k_max, dtype=np.int64)
        for j, gi in enumerate(test_idx):
            ns = brute_knn(train_ds, queries[j], k_max, metric, seed, ordinal=int(gi))
            votes = train_ds.labels[ns.indices]
            truth = ds.labels[gi]
            for k in range(1, k_max + 1):
                pred = majority_vote(
                    votes[:k], ds.class_count, seed, ordinal=int(gi)
                )
                counts[k - 1] += pred == truth
        return counts

    per_fold = _pool_map(fold, fold_list, threads)
    counts = np.sum(per_fold, axis=0)
    config = {
        "k_max": k_max,
        "bits": cfg.bits,
        "group_size": cfg.group_size,
        "strict": strict,
    }
    return CvReport(
        variant=variant, counts=counts, n=ds.n, folds=folds, seed=seed, config=config
    )


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _config_lines(seed, config):
    items = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(config.items()))
    return [f"# borelknn {__version__}", f"# seed={_fmt(seed)}", f"# config {items}"]


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, bool):
        return v
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    return v


def emit_report(results, format="csv", path="report.csv", seed=None, extra=None):
    """Write a report file with stable field order and full provenance.

    Accepts a CvReport, a ConsistencyCurve, or an InstabilityProfile.
    Identical inputs produce byte-identical files. CSV carries the toolkit
    version, seed, and config as leading comment lines; JSON carries them
    as fields.
    """
    if results is None:
        raise ValueError("results must be nonempty")
    if format not in ("csv", "json"):
        raise ValueError(f"unknown format {format!r}")

    if isinstance(results, CvReport):
        config = {"variant": results.variant, "folds": results.folds, "n": results.n}
        config.update(results.config)
        rep_seed = results.seed
        columns = ["k", "accuracy"]
        rows = [(k + 1, results.accuracy[k]) for k in range(results.k_max)]
        payload = {
            "k": list(range(1, results.k_max + 1)),
            "accuracy": _jsonable(results.accuracy),
            "correct": _jsonable(results.counts),
            "best_k": results.best_k,
            "correct_count": results.correct,
            "incorrect_count": results.incorrect,
        }
    elif isinstance(results, ConsistencyCurve):
        config = {
            "bayes": results.bayes,
            "trials": results.trials,
            "label": results.label,
        }
        rep_seed = results.seed
        columns = ["n", "mean_error", "std_error", "excess"]
        rows = list(
            zip(results.n_grid, results.mean_error, results.std_error, results.excess)
        )
        payload = {
            "n_grid": list(results.n_grid),
            "mean_error": _jsonable(results.mean_error),
            "std_error": _jsonable(results.std_error),
            "excess": _jsonable(results.excess),
            "bayes": results.bayes,
        }
    elif isinstance(results, InstabilityProfile):
        config = {"k": results.k, "c": results.c, "queries": len(results.counts)}
        rep_seed = 0
        columns = ["radius", "mean_count"]
        rows = list(zip(results.grid, results.mean_curve))
        payload = {
            "radius": _jsonable(results.grid),
            "mean_count": _jsonable(results.mean_curve),
            "mean_knn_radius": results.mean_knn_radius,
            "mean_inflated_count": results.mean_count,
            "unstable_fraction": results.unstable_fraction,
        }
    else:
        raise TypeError(f"cannot report a {type(results).__name__}")

    if seed is not None:
        rep_seed = seed
    if extra:
        config.update(extra)

    if format == "csv":
        lines = _config_lines(rep_seed, config)
        lines.append(",".join(columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in rows)
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "version": __version__,
            "seed": _jsonable(rep_seed),
            "config": {k: _jsonable(v) for k, v in config.items()},
        }
        doc.update(payload)
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    with open(path, "w", newline="") as f:
        f.write(text)
    return path
