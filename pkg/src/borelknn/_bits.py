"""Packed-bit helpers: Hamming-cube points as uint64 words.

Bit c of a length-D string lives in word c // 64 at position c % 64.
"""

from __future__ import annotations

import numpy as np
from numba import njit


def pack_bits(bits):
    """Pack an (n, D) array of 0/1 into (n, ceil(D / 64)) uint64 words."""
    bits = np.ascontiguousarray(bits, dtype=np.uint64)
    n, D = bits.shape
    W = (D + 63) // 64
    out = np.zeros((n, W), dtype=np.uint64)
    for w in range(W):
        chunk = bits[:, w * 64 : (w + 1) * 64]
        weights = np.uint64(1) << np.arange(chunk.shape[1], dtype=np.uint64)
        out[:, w] = (chunk * weights[None, :]).sum(axis=1)
    return out


def unpack_bits(words, D):
    """Inverse of :func:`pack_bits` for width D."""
    words = np.atleast_2d(words)
    n, W = words.shape
    shifts = np.arange(64, dtype=np.uint64)
    bits = ((words[:, :, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return bits.reshape(n, W * 64)[:, :D]


def hamming_packed(q, rows):
    """Hamming distances from one packed point to many."""
    return np.bitwise_count(rows ^ q).sum(axis=1, dtype=np.int64)


@njit(cache=True)
def gf2_project_packed(points, matrix_cols):
    """Project packed points through a packed GF(2) matrix.

    ``points`` is (n, W); ``matrix_cols`` is (kp, W), one packed matrix
    column per row. Output bit c of point i is the parity of
    popcount(points[i] & matrix_cols[c]), i.e. the mod-2 matrix product.
    """
    n, W = points.shape
    kp = matrix_cols.shape[0]
    out_words = (kp + 63) // 64
    out = np.zeros((n, out_words), dtype=np.uint64)
    for i in range(n):
        for c in range(kp):
            acc = np.uint64(0)
            for w in range(W):
                acc ^= points[i, w] & matrix_cols[c, w]
            acc ^= acc >> np.uint64(32)
            acc ^= acc >> np.uint64(16)
            acc ^= acc >> np.uint64(8)
            acc ^= acc >> np.uint64(4)
            acc ^= acc >> np.uint64(2)
            acc ^= acc >> np.uint64(1)
            if acc & np.uint64(1):
                out[i, c >> 6] |= np.uint64(1) << np.uint64(c & 63)
    return out
