"""Exact neighbour search, votes, learning rules, transport."""

import unittest

import numpy as np
import pytest

from borelknn.borel import ReductionConfig, borel_map, borel_map_batch
from borelknn.core import LabeledDataset, normalize_unit_cube, split_folds
from borelknn.instability import eps_knn
from borelknn.knn import (
    NeighborSet,
    brute_knn,
    empirical_error,
    majority_vote,
    make_knn_rule,
    sorted_index_build,
    sorted_knn,
    sqrt_schedule,
    transport_rule,
    weighted_vote,
)


def _line_ds(values, labels=None):
    pts = np.asarray(values, dtype=np.float64)[:, None]
    if labels is None:
        labels = np.zeros(len(pts), dtype=int)
    return LabeledDataset(pts, labels, int(max(labels)) + 1)


def _code_ds(X, labels, class_count, bits=16):
    codes = borel_map_batch(X, ReductionConfig(bits=bits))
    return LabeledDataset(codes, labels, class_count)


class TestBruteKnn(unittest.TestCase):
    def test_nearest_on_line(self):
        ns = brute_knn(_line_ds([0.0, 1.0, 2.0]), [0.9], 1)
        self.assertEqual(ns.indices.tolist(), [1])
        self.assertAlmostEqual(ns.distances[0], 0.1)

    def test_k_equals_n(self):
        ns = brute_knn(_line_ds([0.0, 1.0, 2.0]), [0.9], 3)
        self.assertEqual(ns.indices.tolist(), [1, 0, 2])
        self.assertTrue(np.all(np.diff(ns.distances) >= 0))

    def test_equidistant_pair_seed_dependence(self):
        ds = _line_ds([-1.0, 1.0])
        picks = {brute_knn(ds, [0.0], 1, seed=s).indices[0] for s in range(12)}
        self.assertEqual(picks, {0, 1})
        for s in range(12):
            a = brute_knn(ds, [0.0], 1, seed=s).indices[0]
            b = brute_knn(ds, [0.0], 1, seed=s).indices[0]
            self.assertEqual(a, b)

    def test_k_out_of_range(self):
        ds = _line_ds([0.0, 1.0])
        with self.assertRaises(ValueError):
            brute_knn(ds, [0.0], 0)
        with self.assertRaises(ValueError):
            brute_knn(ds, [0.0], 3)

    def test_carrier_mismatch(self):
        with self.assertRaises(ValueError):
            brute_knn(_line_ds([0.0, 1.0]), [0.0, 0.0], 1)


def test_neighbor_set_invariants_enforced():
    with pytest.raises(ValueError):
        NeighborSet(np.array([1, 1]), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        NeighborSet(np.array([0, 1]), np.array([1.0, 0.5]))
    ns = NeighborSet(np.array([3, 0]), np.array([0.5, 0.5]))
    assert ns.k == 2


def test_kth_distance_matches_instability_radius():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n, d = int(rng.integers(4, 40)), int(rng.integers(1, 5))
        ds = LabeledDataset(rng.random((n, d)), np.zeros(n, dtype=int), 1)
        q = rng.random(d)
        k = int(rng.integers(1, n + 1))
        ns = brute_knn(ds, q, k)
        assert ns.distances[-1] == eps_knn(ds, q, k)


class TestSortedIndex(unittest.TestCase):
    def test_in_order_sorted(self):
        rng = np.random.default_rng(2)
        codes = borel_map_batch(rng.random((40, 3)), ReductionConfig(bits=8))
        idx = sorted_index_build(codes)
        self.assertEqual(list(idx.values), sorted(idx.values))

    def test_duplicates_keep_distinct_indices(self):
        c = borel_map([0.5, 0.5], ReductionConfig(bits=4))
        idx = sorted_index_build([c, c, c])
        self.assertEqual(sorted(idx.original.tolist()), [0, 1, 2])

    def test_empty_rejected(self):
        with self.assertRaises(ValueError):
            sorted_index_build([])

    def test_mixed_parameters_rejected(self):
        a = borel_map([0.5], ReductionConfig(bits=4))
        b = borel_map([0.5], ReductionConfig(bits=8))
        with self.assertRaises(ValueError):
            sorted_index_build([a, b])


class TestSortedKnn(unittest.TestCase):
    def test_matches_brute_on_random_queries(self):
        """Distance multisets equal brute force, 1e3 queries over n=500."""
        rng = np.random.default_rng(9)
        cfg = ReductionConfig(bits=16)
        codes = borel_map_batch(rng.random((500, 3)), cfg)
        ds = LabeledDataset(codes, np.zeros(500, dtype=int), 1)
        idx = sorted_index_build(codes)
        queries = borel_map_batch(rng.random((1000, 3)), cfg)
        for o, q in enumerate(queries):
            k = int(rng.integers(1, 8))
            a = sorted_knn(idx, q, k, seed=1, ordinal=o)
            b = brute_knn(ds, q, k, metric="reduced", seed=1, ordinal=o)
            self.assertEqual(a.distances.tolist(), b.distances.tolist())
            if len(set(a.distances.tolist())) == k:
                self.assertEqual(sorted(a.indices), sorted(b.indices))

    def test_stored_code_query(self):
        rng = np.random.default_rng(14)
        codes = borel_map_batch(rng.random((30, 2)), ReductionConfig(bits=16))
        idx = sorted_index_build(codes)
        ns = sorted_knn(idx, codes[7], 1)
        self.assertEqual(ns.distances[0], 0.0)

    def test_query_beyond_all_codes(self):
        codes = [borel_map([v], ReductionConfig(bits=8)) for v in (0.1, 0.2, 0.3, 0.4)]
        idx = sorted_index_build(codes)
        q = borel_map([0.99], ReductionConfig(bits=8))
        ns = sorted_knn(idx, q, 2)
        self.assertEqual(sorted(ns.indices.tolist()), [2, 3])

    def test_parameter_checks(self):
        codes = [borel_map([0.5], ReductionConfig(bits=8))]
        idx = sorted_index_build(codes)
        with self.assertRaises(ValueError):
            sorted_knn(idx, codes[0], 2)
        with self.assertRaises(ValueError):
            sorted_knn(idx, borel_map([0.5], ReductionConfig(bits=4)), 1)


class TestVotes(unittest.TestCase):
    def test_strict_majority(self):
        self.assertEqual(majority_vote([1, 1, 0], 2), 1)

    def test_plurality(self):
        self.assertEqual(majority_vote([2, 2, 1, 0], 3), 2)

    def test_tie_both_outcomes_reachable(self):
        got = {majority_vote([0, 1], 2, seed=s) for s in range(12)}
        self.assertEqual(got, {0, 1})
        for s in range(12):
            self.assertEqual(majority_vote([0, 1], 2, seed=s), majority_vote([0, 1], 2, seed=s))

    def test_empty_rejected(self):
        with self.assertRaises(ValueError):
            majority_vote([], 2)

    def test_weighted_simple(self):
        self.assertEqual(weighted_vote([0.6, 0.4], [0, 1], 2), 0)

    def test_weighted_tie_path(self):
        got = {weighted_vote([0.5, 0.5], [0, 1], 2, seed=s) for s in range(12)}
        self.assertEqual(got, {0, 1})

    def test_weight_vector_validation(self):
        with self.assertRaises(ValueError):
            weighted_vote([0.7, 0.4], [0, 1], 2)
        with self.assertRaises(ValueError):
            weighted_vote([-0.1, 1.1], [0, 1], 2)
        with self.assertRaises(ValueError):
            weighted_vote([0.5], [0, 1], 2)

    def test_uniform_weights_reduce_to_majority(self):
        """1e4 random vote instances: uniform weighted vote = majority."""
        rng = np.random.default_rng(21)
        for trial in range(10_000):
            k = int(rng.integers(1, 9))
            cc = int(rng.integers(2, 5))
            labels = rng.integers(0, cc, size=k)
            seed = int(rng.integers(0, 1000))
            m = majority_vote(labels, cc, seed=seed, ordinal=trial)
            w = weighted_vote(np.full(k, 1.0 / k), labels, cc, seed=seed, ordinal=trial)
            assert m == w


class TestRules(unittest.TestCase):
    def test_sqrt_schedule(self):
        self.assertEqual(sqrt_schedule(100), 10)
        self.assertEqual(sqrt_schedule(2), 2)

    def test_singleton_training_set(self):
        rule = make_knn_rule("brute", k_schedule=lambda n: 1)
        ds = LabeledDataset(np.array([[0.3, 0.3]]), [1], 2)
        clf = rule.train(ds)
        for q in ([0.0, 0.0], [1.0, 1.0], [0.3, 0.3]):
            self.assertEqual(clf.classify(q), 1)

    def test_brute_equals_sorted1d_on_distinct_distances(self):
        rng = np.random.default_rng(33)
        X = rng.random((60, 3))
        labels = rng.integers(0, 3, size=60)
        ds = _code_ds(X, labels, 3)
        queries = borel_map_batch(rng.random((40, 3)), ReductionConfig(bits=16))
        gaps = {abs(c.value - q.value) for q in queries for c in ds.points}
        assert len(gaps) == 60 * 40  # this seed produces no tied gaps
        b = make_knn_rule("brute", seed=5, metric="reduced").train(ds)
        s = make_knn_rule("sorted1d", seed=5).train(ds)
        self.assertEqual(
            [b.classify(q, o) for o, q in enumerate(queries)],
            [s.classify(q, o) for o, q in enumerate(queries)],
        )

    def test_bad_schedule_and_source(self):
        ds = _line_ds([0.0, 1.0])
        with self.assertRaises(ValueError):
            make_knn_rule("brute", k_schedule=lambda n: 0).train(ds)
        with self.assertRaises(ValueError):
            make_knn_rule("brute", k_schedule=lambda n: n + 1).train(ds)
        with self.assertRaises(ValueError):
            make_knn_rule("kdtree")

    def test_seed_determinism(self):
        rng = np.random.default_rng(41)
        ds = LabeledDataset(rng.random((50, 2)), rng.integers(0, 2, 50), 2)
        test = rng.random((20, 2))
        rule = make_knn_rule("brute", seed=17)
        p1 = rule.train(ds).predict(test)
        p2 = rule.train(ds).predict(test)
        assert np.array_equal(p1, p2)


def test_transport_identity_map():
    rng = np.random.default_rng(8)
    ds = LabeledDataset(rng.random((30, 2)), rng.integers(0, 2, 30), 2)
    test = rng.random((15, 2))
    base = make_knn_rule("brute", seed=3)
    moved = transport_rule(base, lambda pts: pts)
    assert np.array_equal(base.train(ds).predict(test), moved.train(ds).predict(test))


def test_transport_error_equality_exact():
    """Error of the transported rule = error of the base rule on the mapped
    sets, over 1000 random instances."""
    rng = np.random.default_rng(27)
    cfg = ReductionConfig(bits=16)
    phi = lambda pts: borel_map_batch(pts, cfg)
    for trial in range(1000):
        n = int(rng.integers(5, 40))
        d = int(rng.integers(1, 5))
        cc = int(rng.integers(2, 4))
        train = LabeledDataset(rng.random((n, d)), rng.integers(0, cc, n), cc)
        test = LabeledDataset(rng.random((8, d)), rng.integers(0, cc, 8), cc)
        source = "sorted1d" if trial % 2 else "brute"
        opts = {} if trial % 2 else {"metric": "reduced"}
        base = make_knn_rule(source, seed=trial, **opts)
        moved = transport_rule(base, phi)
        e_moved = empirical_error(moved.train(train), test)
        mapped_test = test.map_points(phi)
        e_base = empirical_error(base.train(train.map_points(phi)), mapped_test)
        assert e_moved == e_base


def test_transported_iris_equals_reduced_space_run(iris):
    """On iris the transported 1-D rule reproduces, fold for fold, the run of
    the same rule on the pre-reduced data; the original-space error sits near
    its known cross-validated value."""
    norm, _ = normalize_unit_cube(iris)
    folds = split_folds(norm, 10, 0)
    phi = lambda pts: borel_map_batch(pts, ReductionConfig(bits=16))
    orig_errs = []
    for train_idx, test_idx in folds:
        train, test = norm.subset(train_idx), norm.subset(test_idx)
        orig = make_knn_rule("brute", k_schedule=lambda n: 6).train(train)
        orig_errs.append(empirical_error(orig, test))
        base = make_knn_rule("sorted1d", k_schedule=lambda n: 6)
        moved = transport_rule(base, phi).train(train)
        direct = base.train(train.map_points(phi))
        assert empirical_error(moved, test) == empirical_error(direct, test.map_points(phi))
    assert abs(np.mean(orig_errs) - 0.04) <= 0.03


class TestEmpiricalError(unittest.TestCase):
    class _Const:
        def __init__(self, label):
            self.label = label

        def classify(self, q, ordinal=0):
            return self.label

        def predict(self, points, ordinals=None):
            return np.full(len(points), self.label, dtype=np.int64)

    def test_perfect(self):
        ds = _line_ds([0.1, 0.9], [0, 0])
        self.assertEqual(empirical_error(self._Const(0), ds), 0.0)

    def test_constant_on_balanced(self):
        ds = _line_ds([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        self.assertEqual(empirical_error(self._Const(0), ds), 0.5)

    def test_empty_rejected(self):
        # an empty test set cannot even be constructed
        with self.assertRaises(ValueError):
            LabeledDataset(np.empty((0, 1)), np.empty(0, dtype=int), 1)
