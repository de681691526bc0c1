# How crowded does the inflated k-NN ball get as dimension grows?
#
# For gaussian data the count of points within (1 + c) times the k-NN radius
# explodes with d, and past a certain dimension that ball swallows half the
# dataset (the query is then "c-unstable": answer sets of half the data are
# interchangeable within the approximation factor).

import numpy as np

from borelknn.core import LabeledDataset, streamed_rng
from borelknn.instability import instability_profile, vc_sample_bound

n, k, c, n_queries = 2000, 20, 0.5, 200

print(f"n={n}, k={k}, c={c}, {n_queries} gaussian queries per dimension\n")
print("  d   mean count in (1+c)-ball   unstable fraction")
for d in (2, 5, 8, 11, 14, 17, 20):
    data = streamed_rng(0, d).normal(size=(n, d))
    queries = streamed_rng(0, d, 1).normal(size=(n_queries, d))
    ds = LabeledDataset(data, np.zeros(n, dtype=int), 1)
    prof = instability_profile(ds, queries, k, c)
    print(f"{d:>3}   {prof.mean_count:>12.1f} / {n}"
          f"          {prof.unstable_fraction:>8.2f}")

# a radius sweep for one dimension, the shape behind those means
d = 14
ds = LabeledDataset(streamed_rng(0, d).normal(size=(n, d)), np.zeros(n, dtype=int), 1)
queries = streamed_rng(0, d, 1).normal(size=(n_queries, d))
base = instability_profile(ds, queries, k, c).mean_knn_radius
mult = np.linspace(0.5, 2.0, 7)
prof = instability_profile(ds, queries, k, c, radius_grid=mult * base)
print(f"\nd={d}: mean count within r times the mean k-NN radius ({base:.2f}):")
for r, m in zip(mult, prof.mean_curve):
    bar = "#" * int(50 * m / n)
    print(f"  {r:4.2f}x  {m:7.1f}  {bar}")

# sample sizes certifying eps-accurate ball masses, by VC bound
print("\nsamples certifying ball-mass estimates (delta = 0.05):")
for d, eps in ((2, 0.1), (2, 0.05), (20, 0.1)):
    print(f"  d={d:>2}, eps={eps}: n >= {vc_sample_bound(d, eps, 0.05)}")
