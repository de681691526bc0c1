"""Command-line entry point.

One binary, six subcommands: ``reduce``, ``classify``, ``ann``,
``instability``, ``cv``, ``consistency``. Setting precedence is flags >
``BORELKNN_*`` environment variables > ``--config`` JSON file > built-in
defaults. Exit codes: 0 success, 1 usage error, 2 runtime error. All
randomness flows from --seed; worker count never changes any output.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from ._version import __version__
from .ann import (
    AnnParams,
    build_ann_index,
    kann_query,
    load_ann_index,
    thermometer_encode_batch,
)
from ._bits import hamming_packed, pack_bits
from .bench import (
    Box,
    Mm2Spec,
    emit_report,
    run_consistency,
    run_cv,
    step_spec,
)
from .borel import ReductionConfig, grouped_reduce_batch
from .core import (
    LabeledDataset,
    clamp_unit,
    load_csv,
    normalize_unit_cube,
    streamed_rng,
)
from .instability import instability_profile
from .knn import make_knn_rule

_DATA_STREAM = 404


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract here is 1
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _to_bool(text):
    return str(text).strip().lower() in ("1", "true", "yes", "on")


class _Settings:
    """Layered option lookup: parsed flags, then environment, then config
    file, then the caller's default."""

    def __init__(self, args):
        self.args = vars(args)
        path = self.args.get("config") or os.environ.get("BORELKNN_CONFIG")
        self.config = {}
        if path:
            with open(path, encoding="utf-8") as f:
                self.config = json.load(f)
            if not isinstance(self.config, dict):
                raise ValueError(f"{path}: config file must hold a JSON object")

    def get(self, name, default=None, cast=str):
        v = self.args.get(name)
        if v is not None:
            return v
        env = os.environ.get("BORELKNN_" + name.upper())
        if env is not None:
            return cast(env)
        if name in self.config:
            v = self.config[name]
            return cast(v) if isinstance(v, str) else v
        return default

    def require(self, name, cast=str):
        v = self.get(name, None, cast)
        if v is None:
            raise _UsageError(f"--{name.replace('_', '-')} is required")
        return v

    def choice(self, name, allowed, default):
        v = self.get(name, default)
        if v not in allowed:
            raise _UsageError(
                f"--{name.replace('_', '-')} must be one of {', '.join(allowed)}"
            )
        return v

    def out_path(self, name, default_name):
        v = self.get(name)
        if v is not None:
            return v
        return os.path.join(self.get("output_dir", ".", str), default_name)

    @property
    def seed(self):
        return self.get("seed", 0, int)

    @property
    def threads(self):
        t = self.get("threads", 0, int)
        if t < 0:
            raise _UsageError("--threads must be >= 0 (0 = auto)")
        return t

    @property
    def verbose(self):
        return self.get("verbose", 0, int) or 0

    @property
    def fmt(self):
        return self.choice("format", ("text", "json"), "text")


def _note(s, text):
    if s.verbose:
        print(text, file=sys.stderr)


def _emit_summary(s, summary):
    if s.fmt == "json":
        print(json.dumps(summary, sort_keys=True))
    else:
        for key in summary:
            print(f"{key}: {summary[key]}")


def _file_format(path):
    return "json" if path.lower().endswith(".json") else "csv"


def _load_points(path, label_column):
    """Feature matrix from a CSV that may or may not carry a label column."""
    with open(path, newline="", encoding="utf-8") as f:
        header = next(csv.reader(f), None)
    if header is None:
        raise ValueError(f"{path}: empty file, header row required")
    if label_column in header:
        ds = load_csv(path, label_column)
        return ds.points
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValueError(
                    f"{path}: row {lineno}: non-numeric value"
                ) from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows, dtype=np.float64)


def _json_floats(arr):
    return json.dumps([float(v) for v in arr])


def cmd_reduce(s):
    path = s.require("input")
    label = s.get("label_column", "class")
    bits = s.get("bits", 16, int)
    group = s.get("group_size", None, int)
    out = s.out_path("output", "reduced.csv")

    ds = load_csv(path, label)
    norm, (mins, maxs) = normalize_unit_cube(ds)
    cfg = ReductionConfig(bits=bits, group_size=group)
    codes = grouped_reduce_batch(clamp_unit(norm.points), cfg)
    blocks = len(codes[0])
    _note(s, f"reduced {ds.n} rows of d={ds.dim} into {blocks} code(s) per row")

    lines = [
        f"# borelknn {__version__}",
        f"# d={ds.dim} bits={bits} group_size={group if group is not None else ds.dim}",
        f"# normalize mins={_json_floats(mins)} maxs={_json_floats(maxs)}",
        ",".join([f"code_{b}" for b in range(blocks)] + ["label"]),
    ]
    names = ds.class_names or tuple(str(c) for c in range(ds.class_count))
    for row, lab in zip(codes, ds.labels):
        lines.append(",".join([str(c.value) for c in row] + [names[lab]]))
    with open(out, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")

    _emit_summary(
        s, {"n": ds.n, "d": ds.dim, "bits": bits, "blocks": blocks, "output": out}
    )
    return 0


def cmd_classify(s):
    train_path = s.require("train")
    test_path = s.require("test")
    k = s.require("k", int)
    metric = s.choice("metric", ("euclidean", "reduced"), "euclidean")
    label = s.get("label_column", "class")
    bits = s.get("bits", 16, int)
    out = s.out_path("out", "predictions.csv")

    train = load_csv(train_path, label)
    names = train.class_names
    test = load_csv(test_path, label, class_map={t: i for i, t in enumerate(names)})
    train_n, params = normalize_unit_cube(train)
    test_n, _ = normalize_unit_cube(test, params)
    if metric == "reduced":
        from .borel import borel_map_batch

        cfg = ReductionConfig(bits=bits)
        train_n = train_n.map_points(lambda p: borel_map_batch(clamp_unit(p), cfg))
        queries = borel_map_batch(clamp_unit(test_n.points), cfg)
    else:
        queries = test_n.points

    rule = make_knn_rule("brute", k_schedule=lambda n: k, seed=s.seed, metric=metric)
    clf = rule.train(train_n)
    _note(s, f"classifying {test.n} rows with k={k} ({metric})")
    pred = clf.predict(queries)
    error = float(np.mean(pred != test.labels))

    lines = ["row,predicted,actual"]
    lines.extend(
        f"{i},{names[p]},{names[t]}" for i, (p, t) in enumerate(zip(pred, test.labels))
    )
    with open(out, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")

    _emit_summary(s, {"n": test.n, "k": k, "error": error})
    return 0


def _ann_build(s):
    path = s.require("input")
    label = s.get("label_column", "class")
    bits = s.get("bits", 16, int)
    k = s.get("k", 10, int)
    index_out = s.out_path("index_out", "ann.idx")

    ds = load_csv(path, label)
    norm, (mins, maxs) = normalize_unit_cube(ds)
    encoded = thermometer_encode_batch(clamp_unit(norm.points), bits)
    params = AnnParams(
        c=s.get("c", 0.5, float),
        epsilon=s.get("epsilon", None, float),
        delta=s.get("delta", 0.1, float),
        C=s.get("const_c", 4.0, float),
        repeats=s.get("repeats", None, int),
    )
    meta = {
        "bits": bits,
        "mins": [float(v) for v in mins],
        "maxs": [float(v) for v in maxs],
    }
    idx = build_ann_index(encoded, params, k, s.seed, meta=meta)
    idx.save(index_out)
    _emit_summary(
        s,
        {
            "n": idx.n,
            "D": idx.D,
            "kp": idx.kp,
            "repeats": params.repeats,
            "index": index_out,
            "sha256": idx.digest(),
        },
    )
    return 0


def _ann_query(s):
    index_in = s.require("index_in")
    queries_path = s.require("queries")
    label = s.get("label_column", "class")
    out = s.out_path("out", "neighbours.csv")

    idx = load_ann_index(index_in)
    k = s.get("k", idx.k, int)
    meta = idx.meta
    if not meta:
        raise ValueError(f"{index_in}: index lacks encoder metadata, rebuild it")
    X = _load_points(queries_path, label)
    holder = LabeledDataset(
        points=X, labels=np.zeros(len(X), dtype=np.int64), class_count=1
    )
    norm, _ = normalize_unit_cube(holder, (meta["mins"], meta["maxs"]))
    enc = thermometer_encode_batch(clamp_unit(norm.points), meta["bits"])
    _note(s, f"querying {len(X)} points against n={idx.n}, D={idx.D}")

    lines = ["query,rank,index,distance"]
    satisfied = 0
    for i in range(len(enc)):
        ns = kann_query(idx, enc[i], k, s.seed, ordinal=i)
        for r, (j, dist) in enumerate(zip(ns.indices, ns.distances)):
            lines.append(f"{i},{r},{j},{int(dist)}")
        if s.get("audit", False, _to_bool):
            true_d = hamming_packed(idx.data, pack_bits(enc[i][None, :])[0])
            eps_k = np.partition(true_d, k - 1)[k - 1]
            bound = (1.0 + idx.params.c) * eps_k
            satisfied += bool(np.all(ns.distances <= bound))
    with open(out, "w", newline="") as f:
        f.write("\n".join(lines) + "\n")

    summary = {"queries": len(enc), "k": k, "output": out}
    if s.get("audit", False, _to_bool):
        summary["contract_rate"] = satisfied / len(enc)
    _emit_summary(s, summary)
    return 0


def cmd_ann(s):
    mode = s.get("mode")
    if mode == "build":
        return _ann_build(s)
    if mode == "query":
        return _ann_query(s)
    raise _UsageError("one of --build or --query is required")


def cmd_instability(s):
    dist = s.choice("dist", ("gaussian", "csv"), "gaussian")
    k = s.get("k", 20, int)
    c = s.get("c", 0.5, float)
    out = s.out_path("out", "profile.csv")

    if dist == "gaussian":
        d = s.require("d", int)
        n = s.get("n", 2000, int)
        nq = s.get("queries", 200, int)
        rng = streamed_rng(s.seed, _DATA_STREAM)
        X = rng.standard_normal((n, d))
        queries = rng.standard_normal((nq, d))
        exclude = None
        source = f"gaussian(d={d},n={n})"
    else:
        path = s.require("input")
        ds0 = load_csv(path, s.get("label_column", "class"))
        X = ds0.points
        queries = X
        exclude = np.arange(ds0.n)  # leave-one-out: a point never counts itself
        source = path
    holder = LabeledDataset(
        points=X, labels=np.zeros(len(X), dtype=np.int64), class_count=1
    )
    _note(s, f"profiling {len(queries)} queries on {source}")
    profile = instability_profile(
        holder, queries, k, c, "euclidean", exclude=exclude
    )
    emit_report(profile, _file_format(out), out, seed=s.seed, extra={"source": source})

    _emit_summary(
        s,
        {
            "mean_knn_radius": profile.mean_knn_radius,
            "mean_inflated_count": profile.mean_count,
            "unstable_fraction": profile.unstable_fraction,
            "output": out,
        },
    )
    return 0


def cmd_cv(s):
    path = s.require("input")
    label = s.get("label_column", "class")
    folds = s.get("folds", 10, int)
    k_max = s.get("kmax", 20, int)
    variant = s.choice("variant", ("original", "reduced", "both"), "original")
    bits = s.get("bits", 16, int)
    group = s.get("group_size", None, int)
    strict = s.get("strict", False, _to_bool)

    ds = load_csv(path, label)
    cfg = ReductionConfig(bits=bits, group_size=group)
    variants = ("original", "reduced") if variant == "both" else (variant,)
    summary = {}
    for v in variants:
        _note(s, f"cross-validating {v} variant, {folds} folds, k up to {k_max}")
        report = run_cv(
            ds,
            k_max=k_max,
            folds=folds,
            variant=v,
            cfg=cfg,
            seed=s.seed,
            strict=strict,
            threads=s.threads,
        )
        out = s.get("out")
        if out is None:
            out = os.path.join(s.get("output_dir", ".", str), f"cv_{v}.csv")
        elif len(variants) > 1:
            stem, ext = os.path.splitext(out)
            out = f"{stem}_{v}{ext or '.csv'}"
        emit_report(report, _file_format(out), out, extra={"input": path})
        summary[f"{v}_best_k"] = report.best_k
        summary[f"{v}_accuracy"] = float(report.accuracy[report.best_k - 1])
        summary[f"{v}_correct"] = report.correct
        summary[f"{v}_incorrect"] = report.incorrect
        summary[f"{v}_output"] = out
    _emit_summary(s, summary)
    return 0


def _load_spec(value):
    if value == "step":
        return step_spec()
    with open(value, encoding="utf-8") as f:
        doc = json.load(f)
    eta = tuple(
        Box(tuple(r["lo"]), tuple(r["hi"]), float(r["p"])) for r in doc["eta"]
    )
    data = np.asarray(doc["data"], dtype=np.float64) if "data" in doc else None
    return Mm2Spec(
        marginal=doc.get("marginal", "uniform"),
        d=int(doc.get("d", len(eta[0].lo))),
        eta=eta,
        data=data,
    )


def cmd_consistency(s):
    spec = _load_spec(s.get("spec", "step"))
    rule_name = s.choice("rule", ("knn", "kann", "adversarial"), "knn")
    n_grid = tuple(
        int(v) for v in str(s.get("n_grid", "100,400,1600,6400")).split(",")
    )
    trials = s.get("trials", 5, int)
    c = s.get("c", 0.5, float)
    bits = s.get("bits", 16, int)
    test_size = s.get("test_size", 10000, int)
    out = s.out_path("out", "consistency.json")

    def factory(sd):
        if rule_name == "knn":
            return make_knn_rule("brute", seed=sd)
        if rule_name == "kann":
            return make_knn_rule("kann", seed=sd, c=c, bits=bits)
        return make_knn_rule("adversarial", seed=sd, c=c, bias=1)

    _note(s, f"consistency of {rule_name} over n_grid={n_grid}, {trials} trials")
    curve = run_consistency(
        spec,
        factory,
        n_grid,
        trials,
        seed=s.seed,
        test_size=test_size,
        threads=s.threads,
        label=rule_name,
    )
    emit_report(curve, _file_format(out), out, extra={"rule": rule_name})

    summary = {"bayes": curve.bayes, "output": out}
    for n, exc in zip(curve.n_grid, curve.excess):
        summary[f"excess_{n}"] = float(exc)
    _emit_summary(s, summary)
    return 0


def build_parser():
    parser = _Parser(prog="borelknn", description=__doc__)
    parser.add_argument("--version", action="version", version=f"borelknn {__version__}")

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help="master random seed (default 0)")
    common.add_argument(
        "--threads",
        type=int,
        help="worker pool size, 0 = auto; outputs never depend on it",
    )
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument(
        "--format", choices=("text", "json"), help="stdout summary format"
    )
    common.add_argument("--output-dir", help="directory for default output paths")
    common.add_argument("-v", "--verbose", action="count", help="progress to stderr")
    common.add_argument("--label-column", help="label column name (default 'class')")

    sub = parser.add_subparsers(dest="cmd", metavar="subcommand")

    p = sub.add_parser(
        "reduce", parents=[common], help="interleave coordinates into exact codes"
    )
    p.add_argument("--input", help="labelled CSV to reduce")
    p.add_argument("--output", help="output CSV of decimal codes")
    p.add_argument("--bits", type=int, help="bits per coordinate (default 16)")
    p.add_argument("--group-size", type=int, help="coordinates per code block")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser(
        "classify", parents=[common], help="k-NN predictions for a test file"
    )
    p.add_argument("--train", help="training CSV")
    p.add_argument("--test", help="test CSV")
    p.add_argument("--k", type=int, help="neighbours per vote")
    p.add_argument("--metric", choices=("euclidean", "reduced"))
    p.add_argument("--bits", type=int, help="bits per coordinate for --metric reduced")
    p.add_argument("--out", help="predictions CSV path")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser(
        "ann", parents=[common], help="build or query the approximate-NN index"
    )
    p.add_argument("--build", dest="mode", action="store_const", const="build")
    p.add_argument("--query", dest="mode", action="store_const", const="query")
    p.add_argument("--audit", action="store_const", const=True,
                   help="cross-check queries against the brute oracle")
    p.add_argument("--input", help="labelled CSV to index (--build)")
    p.add_argument("--queries", help="CSV of query points (--query)")
    p.add_argument("--bits", type=int, help="thermometer levels per coordinate")
    p.add_argument("--c", type=float, help="approximation factor (default 0.5)")
    p.add_argument("--epsilon", type=float, help="projection distortion (default c/4)")
    p.add_argument("--delta", type=float, help="failure probability (default 0.1)")
    p.add_argument("--k", type=int, help="neighbours per query")
    p.add_argument("--const-C", dest="const_c", type=float,
                   help="projected-dimension constant (default 4)")
    p.add_argument("--repeats", type=int, help="independent draws per range")
    p.add_argument("--index-out", help="index file to write (--build)")
    p.add_argument("--index-in", help="index file to read (--query)")
    p.add_argument("--out", help="neighbour CSV path (--query)")
    p.set_defaults(func=cmd_ann)

    p = sub.add_parser(
        "instability", parents=[common], help="query instability diagnostics"
    )
    p.add_argument("--dist", choices=("gaussian", "csv"), help="data source")
    p.add_argument("--input", help="CSV for --dist csv (queries = leave-one-out rows)")
    p.add_argument("--d", type=int, help="dimension for --dist gaussian")
    p.add_argument("--n", type=int, help="sample size for --dist gaussian (default 2000)")
    p.add_argument("--queries", type=int, help="fresh query count (default 200)")
    p.add_argument("--k", type=int, help="neighbours (default 20)")
    p.add_argument("--c", type=float, help="inflation factor (default 0.5)")
    p.add_argument("--out", help="profile CSV path (radius, mean_count)")
    p.set_defaults(func=cmd_instability)

    p = sub.add_parser(
        "cv", parents=[common], help="cross-validated accuracy over a k grid"
    )
    p.add_argument("--input", help="labelled CSV")
    p.add_argument("--folds", type=int, help="fold count (default 10)")
    p.add_argument("--kmax", type=int, help="largest k (default 20)")
    p.add_argument("--variant", choices=("original", "reduced", "both"))
    p.add_argument("--bits", type=int, help="bits per coordinate for reduced")
    p.add_argument("--group-size", type=int, help="coordinates per code block")
    p.add_argument("--strict", action="store_const", const=True,
                   help="fit normalization inside each training fold")
    p.add_argument("--out", help="report path (.csv or .json)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser(
        "consistency", parents=[common], help="learning curve on a synthetic problem"
    )
    p.add_argument("--spec", help="'step' or a JSON problem file")
    p.add_argument("--rule", choices=("knn", "kann", "adversarial"))
    p.add_argument("--n-grid", help="comma-separated sample sizes")
    p.add_argument("--trials", type=int, help="trials per sample size (default 5)")
    p.add_argument("--c", type=float, help="approximation factor for kann/adversarial")
    p.add_argument("--bits", type=int, help="thermometer levels for kann")
    p.add_argument("--test-size", type=int, help="test sample size (default 10000)")
    p.add_argument("--out", help="report path (.json or .csv)")
    p.set_defaults(func=cmd_consistency)

    for sp in sub.choices.values():
        sp.set_defaults(_parser=sp)
    return parser


def dispatch(argv):
    """Run one invocation; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "cmd", None) is None:
            parser.print_usage(sys.stderr)
            return 1
        settings = _Settings(args)
        try:
            return args.func(settings)
        except _UsageError as exc:
            sub = getattr(args, "_parser", None)
            usage = f"\n{sub.format_usage()}" if sub else ""
            raise _UsageError(f"{exc}{usage}") from None
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help / --version
        return exc.code or 0
    except BrokenPipeError:
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv=None):
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
