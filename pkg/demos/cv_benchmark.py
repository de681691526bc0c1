# Cross-validated accuracy over a k grid, in original and reduced space.
#
# Usage: python3 demos/cv_benchmark.py [path/to/dataset.csv] [label_column]

import sys

from borelknn.bench import emit_report, run_cv
from borelknn.core import load_csv

path = sys.argv[1] if len(sys.argv) > 1 else "data/iris.csv"
label = sys.argv[2] if len(sys.argv) > 2 else "class"

ds = load_csv(path, label)
print(f"{path}: n={ds.n}, d={ds.dim}, {ds.class_count} classes")

for variant in ("original", "reduced"):
    rep = run_cv(ds, k_max=20, folds=10, variant=variant, seed=0)
    acc = rep.accuracy
    print(f"\n{variant} space, 10-fold CV, seed 0:")
    print(f"  best k = {rep.best_k} at {100 * acc[rep.best_k - 1]:.1f}% "
          f"({rep.correct} correct, {rep.incorrect} wrong)")
    worst = int(acc.argmin()) + 1
    print(f"  weakest k = {worst} at {100 * acc[worst - 1]:.1f}%")
    out = f"cv_{variant}.csv"
    emit_report(rep, format="csv", path=out, seed=0)
    print(f"  full accuracy table written to {out}")
