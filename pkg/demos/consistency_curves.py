"""Learning curves on a synthetic problem with known Bayes error.

The step problem: X uniform on [0, 1], label 1 with probability 0.9 left of
1/2 and 0.1 right of it. The best possible error is 0.1; a consistent rule's
test error should approach it as the training sample grows.
"""

import numpy as np

from borelknn.bench import bayes_error, run_consistency, step_spec
from borelknn.borel import ReductionConfig, borel_map_batch
from borelknn.knn import make_knn_rule, transport_rule

spec = step_spec()
print(f"bayes error: {bayes_error(spec):.3f}")

cfg = ReductionConfig(bits=16)
phi = lambda pts: borel_map_batch(pts, cfg)
families = {
    "euclidean brute": lambda s: make_knn_rule("brute", seed=s),
    "reduced sorted-1d": lambda s: transport_rule(make_knn_rule("sorted1d", seed=s), phi),
    "adversarial c=0.2": lambda s: make_knn_rule("adversarial", seed=s, c=0.2, bias=1),
}

n_grid = (25, 100, 400, 1600)
print(f"n grid: {n_grid}, 5 trials each, k = ceil(sqrt(n))\n")
for name, factory in families.items():
    curve = run_consistency(spec, factory, n_grid, trials=5, seed=0, threads=0)
    cells = "  ".join(
        f"{n}:{e:.3f}" for n, e in zip(n_grid, curve.mean_error)
    )
    print(f"{name:>18}  mean error  {cells}")
    cells = "  ".join(f"{n}:{e:+.3f}" for n, e in zip(n_grid, curve.excess))
    print(f"{'':>18}  excess      {cells}\n")
