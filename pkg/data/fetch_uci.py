"""Fetch the diabetes and ionosphere benchmark datasets and write them as CSV.

Requires network access. The diabetes (Pima Indians) set was withdrawn from the
UCI archive, so it is fetched from OpenML's copy (dataset 37); ionosphere comes
straight from UCI. Both are written in the header-row CSV format the toolkit
loads, with the label in the last column.

Usage: python data/fetch_uci.py [--dest DIR]
"""

import argparse
import csv
import io
import sys
import urllib.error
import urllib.request

IONOSPHERE_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "ionosphere/ionosphere.data"
)
DIABETES_URL = "https://www.openml.org/data/download/37/dataset_37_diabetes.arff"


def _get(url):
    req = urllib.request.Request(url, headers={"User-Agent": "curl/8"})
    with urllib.request.urlopen(req, timeout=60) as resp:
        return resp.read().decode("utf-8", errors="replace")


def fetch_ionosphere(dest):
    raw = _get(IONOSPHERE_URL)
    rows = [ln.split(",") for ln in raw.strip().splitlines() if ln.strip()]
    if len(rows) != 351 or any(len(r) != 35 for r in rows):
        raise ValueError(f"unexpected ionosphere shape: {len(rows)} rows")
    path = f"{dest}/ionosphere.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"a{i}" for i in range(1, 35)] + ["class"])
        w.writerows(rows)
    return path, len(rows)


def fetch_diabetes(dest):
    raw = _get(DIABETES_URL)
    lines = iter(io.StringIO(raw))
    for ln in lines:
        if ln.strip().lower().startswith("@data"):
            break
    rows = [ln.strip().split(",") for ln in lines if ln.strip() and not ln.startswith("%")]
    if len(rows) != 768 or any(len(r) != 9 for r in rows):
        raise ValueError(f"unexpected diabetes shape: {len(rows)} rows")
    path = f"{dest}/diabetes.csv"
    names = ["preg", "plas", "pres", "skin", "insu", "mass", "pedi", "age"]
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(names + ["class"])
        for r in rows:
            w.writerow([v.strip().strip("'\"") for v in r])
    return path, len(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dest", default="data", help="output directory")
    args = ap.parse_args()
    failures = 0
    for name, fn in [("ionosphere", fetch_ionosphere), ("diabetes", fetch_diabetes)]:
        try:
            path, n = fn(args.dest)
            print(f"{name}: wrote {n} rows to {path}")
        except (urllib.error.URLError, OSError, ValueError) as exc:
            failures += 1
            print(f"{name}: FAILED ({exc})", file=sys.stderr)
    sys.exit(2 if failures else 0)


if __name__ == "__main__":
    main()
