"""Build a (k, c)-approximate nearest neighbor index over thermometer-encoded
gaussian data and audit its guarantee against brute-force search.

The contract: each of the k returned points lies within (1 + c) times the
true k-NN radius of the query. The audit measures how often that holds.
"""

import argparse
import time

import numpy as np

from borelknn._bits import hamming_packed, pack_bits
from borelknn.ann import AnnParams, build_ann_index, kann_query, thermometer_encode_batch
from borelknn.core import clamp_unit, streamed_rng

parser = argparse.ArgumentParser()
parser.add_argument("--n", type=int, default=1000)
parser.add_argument("--d", type=int, default=12)
parser.add_argument("--bits", type=int, default=16)
parser.add_argument("--k", type=int, default=10)
parser.add_argument("--c", type=float, default=0.5)
parser.add_argument("--queries", type=int, default=100)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

raw = streamed_rng(args.seed, 1).normal(size=(args.n, args.d))
mins, maxs = raw.min(axis=0), raw.max(axis=0)
unit = (raw - mins) / (maxs - mins)
enc = thermometer_encode_batch(unit, args.bits)
print(f"{args.n} points, d={args.d} -> {enc.shape[1]} hamming bits")

params = AnnParams(c=args.c)
t0 = time.perf_counter()
index = build_ann_index(enc, params, args.k, seed=args.seed)
print(f"index built in {time.perf_counter() - t0:.2f}s "
      f"(epsilon={params.epsilon}, repeats={params.repeats})")

raw_q = streamed_rng(args.seed, 2).normal(size=(args.queries, args.d))
Q = thermometer_encode_batch(clamp_unit((raw_q - mins) / (maxs - mins)), args.bits)
qp = pack_bits(Q)

satisfied = 0
ratios = []
t0 = time.perf_counter()
for i in range(args.queries):
    ns = kann_query(index, Q[i], args.k, seed=args.seed, ordinal=i)
    true = np.sort(hamming_packed(qp[i], index.data))
    eps_k = true[args.k - 1]
    worst = ns.distances[-1]
    satisfied += bool(worst <= (1 + args.c) * eps_k)
    if eps_k > 0:
        ratios.append(worst / eps_k)
dt = time.perf_counter() - t0

print(f"\ncontract satisfied: {satisfied}/{args.queries} "
      f"(needs worst return <= {1 + args.c} * true k-NN radius)")
print(f"worst/true radius ratio: median {np.median(ratios):.3f}, "
      f"max {np.max(ratios):.3f}")
print(f"query time: {1000 * dt / args.queries:.2f} ms/query")
