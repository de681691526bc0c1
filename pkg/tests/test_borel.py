"""Bit-interleaved reduction: exactness, bijectivity, order preservation."""

import unittest

import numpy as np
import pytest

from borelknn.borel import (
    MAX_BITS,
    BorelCode,
    ReductionConfig,
    borel_inverse,
    borel_inverse_batch,
    borel_map,
    borel_map_batch,
    code_gap,
    grouped_reduce,
    grouped_reduce_batch,
    quantize_levels,
    reduced_distance,
)


def _interleave_oracle(levels, B):
    """Independent string-based interleave: bit j of every coordinate in
    turn, coordinate 1 first, most significant bit leading."""
    strs = [format(int(v), f"0{B}b") for v in levels]
    return int("".join(s[j] for j in range(B) for s in strs), 2)


class TestBorelMap(unittest.TestCase):
    def test_half_half_two_bits(self):
        code = borel_map([0.5, 0.5], ReductionConfig(bits=2))
        self.assertEqual(code.value, 12)
        self.assertEqual((code.d, code.B), (2, 2))

    def test_origin(self):
        self.assertEqual(borel_map([0.0, 0.0], ReductionConfig(bits=2)).value, 0)

    def test_one_zero_one_single_bit(self):
        self.assertEqual(borel_map([1.0, 0.0, 1.0], ReductionConfig(bits=1)).value, 5)

    def test_matches_string_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            d = int(rng.integers(1, 7))
            B = int(rng.integers(1, MAX_BITS + 1))
            x = rng.random(d)
            code = borel_map(x, ReductionConfig(bits=B))
            levels = quantize_levels(x[None, :], B)[0]
            self.assertEqual(code.value, _interleave_oracle(levels, B))

    def test_quantize_top_edge(self):
        levels = quantize_levels(np.array([[1.0, 0.0]]), 4)
        self.assertEqual(levels.tolist(), [[15, 0]])

    def test_rejects_out_of_cube(self):
        with self.assertRaises(ValueError):
            borel_map([1.2, 0.0], ReductionConfig(bits=2))
        with self.assertRaises(ValueError):
            borel_map([-0.1], ReductionConfig(bits=2))

    def test_bits_bounds(self):
        with self.assertRaises(ValueError):
            ReductionConfig(bits=0)
        with self.assertRaises(ValueError):
            ReductionConfig(bits=MAX_BITS + 1)


class TestBorelInverse(unittest.TestCase):
    def test_code_twelve(self):
        x = borel_inverse(BorelCode(12, 2, 2))
        self.assertEqual(x.tolist(), [0.5, 0.5])

    def test_code_zero(self):
        x = borel_inverse(BorelCode(0, 3, 2))
        self.assertEqual(x.tolist(), [0.0, 0.0, 0.0])

    def test_round_trip_random(self):
        """inverse(map(x)) equals the quantized representative, 1e5 points."""
        rng = np.random.default_rng(11)
        cfg = ReductionConfig(bits=16)
        X = rng.random((100_000, 5))
        codes = borel_map_batch(X, cfg)
        back = borel_inverse_batch(codes)
        want = quantize_levels(X, 16).astype(np.float64) / (1 << 16)
        self.assertTrue(np.array_equal(back, want))
        again = borel_map_batch(back, cfg)
        self.assertEqual([c.value for c in again], [c.value for c in codes])

    def test_mixed_parameters_rejected(self):
        with self.assertRaises(ValueError):
            borel_inverse_batch([BorelCode(0, 2, 2), BorelCode(0, 2, 3)])


def test_bijective_exhaustive():
    """Every (d, B) with d*B <= 16: the map is a bijection onto [0, 2^(dB))."""
    for d, B in [(1, 16), (2, 8), (4, 4), (8, 2), (16, 1), (3, 5), (5, 3)]:
        width = d * B
        assert width <= 16
        levels = np.indices((2**B,) * d).reshape(d, -1).T
        X = levels.astype(np.float64) / (1 << B)
        codes = [c.value for c in borel_map_batch(X, ReductionConfig(bits=B))]
        assert sorted(codes) == list(range(1 << width)), (d, B)


def test_injective_random():
    rng = np.random.default_rng(23)
    X = rng.random((100_000, 6))
    levels = quantize_levels(X, 16)
    codes = [c.value for c in borel_map_batch(X, ReductionConfig(bits=16))]
    assert len(set(codes)) == len(np.unique(levels, axis=0))


def test_prefix_locality():
    """Agreement on the first m bits of every coordinate forces agreement on
    the top d*m bits of the code."""
    rng = np.random.default_rng(7)
    d, B = 4, 16
    for _ in range(200):
        m = int(rng.integers(1, B))
        base = rng.integers(0, 1 << m, size=d, dtype=np.uint64)
        la = (base << (B - m)) | rng.integers(0, 1 << (B - m), size=d, dtype=np.uint64)
        lb = (base << (B - m)) | rng.integers(0, 1 << (B - m), size=d, dtype=np.uint64)
        xa = la.astype(np.float64) / (1 << B)
        xb = lb.astype(np.float64) / (1 << B)
        ca = borel_map(xa, ReductionConfig(bits=B))
        cb = borel_map(xb, ReductionConfig(bits=B))
        shift = d * (B - m)
        assert ca.value >> shift == cb.value >> shift


def test_monotone_in_first_coordinate():
    """With the other coordinates at zero the code is strictly increasing in
    the first coordinate's level."""
    B = 10
    t = np.arange(1 << B, dtype=np.float64) / (1 << B)
    X = np.zeros((1 << B, 3))
    X[:, 0] = t
    vals = np.array([c.value for c in borel_map_batch(X, ReductionConfig(bits=B))])
    assert np.all(np.diff(vals) > 0)


def test_z_order_sort_equivalence():
    """Sorting by code equals sorting by the textbook z-order comparator."""
    rng = np.random.default_rng(31)
    X = rng.random((300, 3))
    B = 8
    cfg = ReductionConfig(bits=B)
    codes = np.array([c.value for c in borel_map_batch(X, cfg)])
    keys = [_interleave_oracle(lv, B) for lv in quantize_levels(X, B)]
    assert np.array_equal(np.argsort(codes, kind="stable"), np.argsort(keys, kind="stable"))


class TestGroupedReduce(unittest.TestCase):
    def test_two_blocks(self):
        codes = grouped_reduce([0.5, 0.5, 0.0, 0.0], ReductionConfig(bits=2, group_size=2))
        self.assertEqual([c.value for c in codes], [12, 0])
        self.assertEqual([(c.d, c.B) for c in codes], [(2, 2), (2, 2)])

    def test_group_equals_dimension_is_single_code(self):
        x = [0.25, 0.75, 0.5]
        whole = grouped_reduce(x, ReductionConfig(bits=4, group_size=3))
        self.assertEqual(len(whole), 1)
        self.assertEqual(whole[0].value, borel_map(x, ReductionConfig(bits=4)).value)

    def test_group_one_is_per_coordinate(self):
        x = np.array([0.25, 0.75])
        codes = grouped_reduce(x, ReductionConfig(bits=4, group_size=1))
        self.assertEqual([c.value for c in codes], quantize_levels(x[None, :], 4)[0].tolist())

    def test_group_too_large(self):
        with self.assertRaises(ValueError):
            grouped_reduce([0.5, 0.5], ReductionConfig(bits=2, group_size=3))

    def test_batch_agrees_with_single(self):
        rng = np.random.default_rng(13)
        X = rng.random((50, 5))
        cfg = ReductionConfig(bits=6, group_size=2)
        batch = grouped_reduce_batch(X, cfg)
        for row, got in zip(X, batch):
            self.assertEqual(list(got), grouped_reduce(row, cfg))


class TestReducedDistance(unittest.TestCase):
    def test_identical_codes(self):
        c = borel_map([0.3, 0.9], ReductionConfig(bits=8))
        self.assertEqual(reduced_distance(c, c), 0)
        self.assertEqual(code_gap(c, c), 0)

    def test_known_gap(self):
        a = BorelCode(12, 2, 2)
        b = BorelCode(0, 2, 2)
        self.assertEqual(code_gap(a, b), 12)
        self.assertEqual(reduced_distance(a, b), 0.75)

    def test_symmetry(self):
        rng = np.random.default_rng(19)
        X = rng.random((10_000, 4))
        codes = borel_map_batch(X, ReductionConfig(bits=16))
        for i in range(0, 10_000, 2):
            a, b = codes[i], codes[i + 1]
            self.assertEqual(code_gap(a, b), code_gap(b, a))
            self.assertEqual(reduced_distance(a, b), reduced_distance(b, a))

    def test_grouped_combines_euclideanly(self):
        a = (BorelCode(12, 2, 2), BorelCode(0, 2, 2))
        b = (BorelCode(0, 2, 2), BorelCode(12, 2, 2))
        self.assertAlmostEqual(reduced_distance(a, b), (2 * 0.75**2) ** 0.5)

    def test_parameter_mismatch(self):
        with self.assertRaises(ValueError):
            code_gap(BorelCode(0, 2, 2), BorelCode(0, 2, 3))
        with self.assertRaises(ValueError):
            reduced_distance(BorelCode(0, 2, 2), (BorelCode(0, 2, 2),))
        with self.assertRaises(ValueError):
            reduced_distance((BorelCode(0, 2, 2),), (BorelCode(0, 2, 2), BorelCode(0, 2, 2)))


def test_code_value_range_checked():
    with pytest.raises(ValueError):
        BorelCode(16, 2, 2)
    with pytest.raises(ValueError):
        BorelCode(-1, 2, 2)
    assert BorelCode(15, 2, 2).real == 15 / 16
