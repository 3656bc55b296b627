"""Command-line entry point: ``normnet {generate,train,test,evaluate,crossval,learning-curve}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
Environment: NORMNET_WORKERS sets the worker count for batch test scoring,
NORMNET_CACHE_DIR the directory for cached null tables.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import datasets as ds
from . import distributions as dist
from . import evaluation as ev
from . import neuralnet as nn
from . import scoring as sc
from .errors import (DegenerateCorrelation, DegenerateDenominator, NormnetError, SampleTooSmall,
                     ZeroBandwidth, ZeroSpacing)
from .features import descriptor, sbnn_features
from .normality import FssdConfig, run_test
from .rng import EVAL, SPLIT, TRAIN, substream

log = logging.getLogger("normnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
NUMERIC_ERRORS = (ArithmeticError, DegenerateDenominator, DegenerateCorrelation, ZeroSpacing,
                  ZeroBandwidth)

FAMILY_HELP = """parameter conventions for the benchmark groups:
  gamma(shape, scale), lognormal(mu, sigma) of the underlying normal,
  weibull(scale, shape), gumbel(loc, scale), beta(alpha, beta), uniform(a, b)"""


class UsageError(Exception):
    pass


# -- helpers --------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _arch_list(text: str) -> list[tuple[int, ...]]:
    """Architectures separated by ';', layer sizes by ','; e.g. ``100,10;1000``."""
    return [tuple(_int_list(part)) for part in text.split(";") if part.strip()]


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def _manifest(args, outputs: list[Path], inputs: list[Path], started: float, extra=None) -> Path:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    man = {
        "subcommand": args.command,
        "version": __version__,
        "config": config,
        "master_seed": getattr(args, "seed", None),
        "inputs": {str(p): ds.file_hash(p) for p in inputs},
        "outputs": {str(p): ds.file_hash(p) for p in outputs},
        "wall_time_seconds": time.perf_counter() - started,
    }
    if extra:
        man.update(extra)
    first = outputs[0] if outputs else Path(args.out)
    path = first.with_name(first.name + ".manifest.json")
    _write_text(path, json.dumps(man, indent=2, default=str) + "\n")
    return path


def _dataset_features(data: ds.LabeledDataset, mode: str, q: float):
    x, ok = sc.feature_matrix(data.samples, mode, q)
    return x, data.labels, ok


# -- generate ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    outputs: list[Path] = []
    inputs: list[Path] = []
    if args.set == "C":
        sizes = args.sizes or list(range(10, 101, 10))
        stem = out.with_suffix("")
        for group in dist.GROUPS:
            data = ds.generate_group_set(group, sizes, args.per_size, args.seed)
            path = stem.with_name(f"{stem.name}_{group}.jsonl")
            path.parent.mkdir(parents=True, exist_ok=True)
            ds.save_dataset(data, path)
            outputs.append(path)
    elif args.set in ("height", "magnitude"):
        if not args.csv:
            raise UsageError(f"--set {args.set} requires --csv")
        inputs.append(Path(args.csv))
        if args.set == "height":
            data = ds.ingest_height_csv(args.csv)
        else:
            sizes = args.sizes or list(range(5, 101, 5))
            data = ds.ingest_magnitude_csv(args.csv, sizes, args.per_size, args.seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        ds.save_dataset(data, out)
        outputs.append(out)
    else:
        per_class = args.per_class or (ds.FULL_PER_CLASS[args.set] if args.full_scale
                                       else ds.DESK_PER_CLASS)
        spec = ds.preset(args.set, per_class, args.seed, args.sizes, args.nonnormal_scale)
        data = ds.generate_pearson_style_set(spec)
        out.parent.mkdir(parents=True, exist_ok=True)
        ds.save_dataset(data, out)
        outputs.append(out)
        if args.split:
            cv, test = ds.split_cv_test(data, args.split, substream(args.seed, SPLIT))
            stem = out.with_suffix("")
            for part, suffix in ((cv, "cv"), (test, "test")):
                path = stem.with_name(f"{stem.name}_{suffix}.jsonl")
                ds.save_dataset(part, path)
                outputs.append(path)
    _manifest(args, outputs, inputs, started)
    for p in outputs:
        print(p)
    return EXIT_OK


# -- train ------------------------------------------------------------------------------

def _config_from_args(args) -> nn.NetworkConfig:
    return nn.NetworkConfig(
        hidden_layers=tuple(args.arch), q=args.q, reg_c=args.c, max_epochs=args.epochs,
        adam=nn.AdamConfig(step=args.lr),
        early_stop=nn.EarlyStopConfig(validation_fraction=args.validation_fraction,
                                      patience=args.patience),
        batch_size=args.batch_size, seed=args.seed, mode=args.mode,
        penalty_per_example=args.penalty == "per-example")


def cmd_train(args) -> int:
    started = time.perf_counter()
    data = ds.load_dataset(args.data)
    cfg = _config_from_args(args)
    x, y, ok = _dataset_features(data, cfg.mode, cfg.q)
    if not ok.any():
        raise NormnetError("no record yields a feature vector")
    net, report = nn.fit(x[ok], y[ok], cfg, substream(args.seed, TRAIN, 1))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    net.save(out)
    report_path = out.with_name(out.stem + ".report.json")
    _write_text(report_path, json.dumps({
        "epochs_run": report.epochs_run,
        "best_epoch": report.best_epoch,
        "train_loss_history": report.train_loss_history,
        "val_loss_history": report.val_loss_history,
        "wall_time_seconds": report.wall_time_seconds,
        "records_used": int(ok.sum()),
        "records_skipped": int((~ok).sum()),
    }, indent=2) + "\n")
    _manifest(args, [out, report_path], [Path(args.data)], started)
    print(out)
    return EXIT_OK


# -- test ---------------------------------------------------------------------------------

def _read_samples(args) -> list[tuple[int, list[str]]]:
    if args.sample is not None:
        return [(1, args.sample.split(","))]
    text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text(encoding="utf-8")
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        cells = [c for c in row if c.strip()]
        if cells:
            rows.append((lineno, cells))
    return rows


def _network_input(net: nn.Network, x: np.ndarray) -> np.ndarray:
    if net.config.mode == "sbnn":
        if x.size < sc.SBNN_MIN_SIZE:
            raise SampleTooSmall(f"SBNN needs at least {sc.SBNN_MIN_SIZE} values, got {x.size}")
        return sbnn_features(x).to_array()
    return descriptor(x, net.config.q).to_array()


def cmd_test(args) -> int:
    net = nn.Network.load(args.model) if args.model else None
    fssd = FssdConfig(null_sims=args.fssd_sims)
    for lineno, cells in _read_samples(args):
        record: dict = {"line": lineno}
        try:
            x = np.array([float(c) for c in cells])
            record["n"] = int(x.size)
            if net is not None:
                p1 = float(net.predict_proba(_network_input(net, x))[0])
                record["p1"] = p1
                record["label"] = nn.classify(net, p1)
            tests = {}
            for method in args.tests:
                try:
                    rng = substream(args.seed, EVAL, lineno)
                    tests[method] = run_test(method, x, args.alpha, rng, fssd).to_json()
                except NormnetError as exc:
                    tests[method] = {"error": type(exc).__name__, "message": str(exc)}
            record["tests"] = tests
        except (NormnetError, ValueError) as exc:
            record["error"] = type(exc).__name__
            record["message"] = str(exc)
        print(json.dumps(record))
    return EXIT_OK


# -- evaluate -----------------------------------------------------------------------------

def _method_scores(method: str, data: ds.LabeledDataset, args, nets: dict) -> np.ndarray:
    """Score for the normal class: p1 for networks, the p-value for tests."""
    if method in nets:
        return sc.network_scores(nets[method], data.samples)
    return sc.test_pvalues(method, data.samples, args.seed, FssdConfig(null_sims=args.fssd_sims))


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    data = ds.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    nets = {}
    if args.model:
        nets["DBNN"] = nn.Network.load(args.model)
        if args.threshold is not None:
            nets["DBNN"].threshold = args.threshold
    if args.sbnn_model:
        nets["SBNN"] = nn.Network.load(args.sbnn_model)
    methods = list(nets) + [m for m in args.tests if m not in nets]
    y, sizes = data.labels, data.sizes
    both_classes = 0 < y.sum() < y.size
    outputs = []
    scores = {m: _method_scores(m, data, args, nets) for m in methods}

    per_size, comparison = [], []
    curves = {}
    predictions_at = {}
    for m in methods:
        s = scores[m]
        if m in nets:
            settings = [("", sc.decisions_from_probabilities(s, nets[m].threshold))]
        else:
            settings = [(f"{a:g}", sc.decisions_from_pvalues(s, a)) for a in args.alpha]
        for alpha, dec in settings:
            rows = ev.per_size_report(dec, y, sizes, s if both_classes else None)
            label = f"{m}@{alpha}" if alpha else m
            per_size.append(ev.metrics_csv(rows, label))
            comparison.append((m, alpha, rows[-1]))
            predictions_at[(m, alpha)] = dec
        finite = np.isfinite(s)
        if both_classes and 0 < y[finite].sum() < finite.sum():
            curves[m] = ev.roc(s[finite], y[finite])

    outputs.append(_write_text(out / "per_size.csv",
                               "".join(t if i == 0 else t.split("\n", 1)[1]
                                       for i, t in enumerate(per_size))))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "alpha", "count", "A", "TPR", "PPV", "TNR", "NPV", "F1", "AUROC"])
    for m, alpha, row in comparison:
        mt = row.metrics
        w.writerow([m, alpha or "/", mt.count] + [ev._cell(getattr(mt, k)) for k in ev.METRIC_NAMES]
                   + [ev._cell(curves[m].auroc if m in curves else None)])
    outputs.append(_write_text(out / "comparison.csv", buf.getvalue()))
    if curves:
        outputs.append(_write_text(out / "roc.json", ev.roc_json(curves) + "\n"))

    if args.power:
        alpha = f"{args.power_alpha:g}"
        table = {}
        for m in methods:
            if m in nets:
                table[m] = predictions_at[(m, "")]
            else:
                table[m] = sc.decisions_from_pvalues(scores[m], args.power_alpha)
        outputs.append(_write_text(out / f"power_alpha{alpha}.csv", ev.power_table(table, sizes)))

    if args.reliability:
        if "DBNN" not in nets:
            raise UsageError("--reliability needs --model")
        p = scores["DBNN"]
        finite = np.isfinite(p)
        bins = ev.reliability(p[finite], y[finite], args.bins)
        outputs.append(_write_text(out / "reliability.csv", ev.reliability_csv(bins)))
        if args.reliability_subsets:
            diagrams = ev.reliability_subsets(p[finite], y[finite], args.bins,
                                              args.reliability_subsets, args.subset_size,
                                              substream(args.seed, EVAL, 1))
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["subset", "bin", "mean_predicted", "empirical_positive_rate", "count"])
            for k, diagram in enumerate(diagrams):
                for i, b in enumerate(diagram):
                    w.writerow([k, i, ev._cell(b.mean_predicted),
                                ev._cell(b.empirical_positive_rate), b.count])
            outputs.append(_write_text(out / "reliability_subsets.csv", buf.getvalue()))

    if args.optimize_threshold:
        if "DBNN" not in nets:
            raise UsageError("--optimize-threshold needs --model")
        rows = ev.threshold_report(scores["DBNN"], y, sizes, nets["DBNN"].threshold)
        outputs.append(_write_text(out / "thresholds.csv", ev.threshold_csv(rows)))

    inputs = [Path(args.data)] + [Path(p) for p in (args.model, args.sbnn_model) if p]
    _manifest(args, outputs, inputs, started)
    for p in outputs:
        print(p)
    return EXIT_OK


# -- cross-validation and learning curves ---------------------------------------------------

def cmd_crossval(args) -> int:
    started = time.perf_counter()
    data = ds.load_dataset(args.data)
    base = nn.NetworkConfig(max_epochs=args.epochs, seed=args.seed, mode="dbnn")
    cache = {}

    def featurize(q):
        if q not in cache:
            x, y, ok = _dataset_features(data, "dbnn", q)
            if not ok.all():
                raise NormnetError(f"{int((~ok).sum())} records have no descriptor")
            cache[q] = (x, y)
        return cache[q]

    grid = {"q": args.q, "hidden_layers": args.arch, "reg_c": args.c}
    best, cells = nn.grid_search_cv(featurize, grid, args.folds, substream(args.seed, TRAIN, 2),
                                    base)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "architecture", "c", "accuracy_mean", "accuracy_sd",
                "time_mean", "time_sd", "best"])
    for cell in cells:
        is_best = (cell.q, cell.hidden_layers, cell.reg_c) == (best.q, best.hidden_layers, best.reg_c)
        w.writerow([f"{cell.q:g}", ",".join(map(str, cell.hidden_layers)), f"{cell.reg_c:g}",
                    f"{cell.accuracy_mean:.6f}", f"{cell.accuracy_sd:.6f}",
                    f"{cell.time_mean:.3f}", f"{cell.time_sd:.3f}", int(is_best)])
    out = _write_text(Path(args.out), buf.getvalue())
    _manifest(args, [out], [Path(args.data)], started)
    print(out)
    return EXIT_OK


def cmd_learning_curve(args) -> int:
    started = time.perf_counter()
    data = ds.load_dataset(args.data)
    cfg = _config_from_args(args)
    x, y, ok = _dataset_features(data, cfg.mode, cfg.q)
    points = nn.learning_curve(x[ok], y[ok], args.fractions, args.folds, cfg,
                               substream(args.seed, TRAIN, 4))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fraction", "median_train_accuracy", "median_test_accuracy",
                "median_fit_time", "fit_times"])
    for pt in points:
        w.writerow([f"{pt.fraction:g}", f"{pt.median_train:.6f}", f"{pt.median_test:.6f}",
                    f"{float(np.median(pt.fit_times)):.3f}",
                    " ".join(f"{t:.3f}" for t in pt.fit_times)])
    out = _write_text(Path(args.out), buf.getvalue())
    _manifest(args, [out], [Path(args.data)], started)
    print(out)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("dbnn", "sbnn"), default="dbnn",
                   help="descriptor input (dbnn) or the 7-component statistic vector (sbnn)")
    p.add_argument("--arch", type=_int_list, default=[100, 10],
                   help="hidden layer sizes, comma separated (default 100,10)")
    p.add_argument("--q", type=float, default=0.1, help="descriptor quantile step (default 0.1)")
    p.add_argument("--c", type=float, default=0.1, help="L2 regularization coefficient (default 0.1)")
    p.add_argument("--epochs", type=int, default=200, help="maximum epochs (default 200)")
    p.add_argument("--patience", type=int, default=10, help="early-stopping patience in epochs")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=0.001, help="ADAM step size")
    p.add_argument("--validation-fraction", type=float, default=0.1)
    p.add_argument("--penalty", choices=("per-example", "plain"), default="per-example",
                   help="L2 term c/(2B)*||W||^2 per batch of B (per-example) or c/2*||W||^2")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="normnet", description=__doc__.split("\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"normnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize or ingest a dataset",
                       epilog=FAMILY_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    g.add_argument("--set", required=True, choices=("A", "B", "C", "D", "large", "height", "magnitude"))
    g.add_argument("--per-class", type=int, help="records per class (default 2000)")
    g.add_argument("--full-scale", action="store_true",
                   help="use 13050 records per class (7830 for the large set)")
    g.add_argument("--per-size", type=int, default=1000,
                   help="records per size and group (C) or per size (magnitude)")
    g.add_argument("--sizes", type=_int_list, help="comma-separated sample sizes")
    g.add_argument("--split", type=float, help="also write stratified _cv/_test parts")
    g.add_argument("--csv", help="input CSV for --set height or magnitude")
    g.add_argument("--nonnormal-scale", choices=("sd", "variance"), default="sd",
                   help="read the drawn scale of non-normal laws as sd (default) or variance")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output .jsonl (C: prefix for four group files)")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a DBNN or SBNN")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="model JSON path")
    _add_train_flags(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("test", help="classify samples and run the normality tests")
    s.add_argument("--model", help="trained model JSON")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="CSV with one sample per line ('-' for stdin)")
    src.add_argument("--sample", help="one comma-separated sample")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--tests", type=lambda v: [m.strip().upper() for m in v.split(",") if m.strip()],
                   default=["SW", "LF", "AD", "JB", "FSSD"])
    s.add_argument("--fssd-sims", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_test)

    e = sub.add_parser("evaluate", help="metric tables, ROC data and calibration")
    e.add_argument("--data", required=True)
    e.add_argument("--model", help="DBNN model JSON")
    e.add_argument("--sbnn-model", help="SBNN model JSON")
    e.add_argument("--threshold", type=float, help="override the DBNN decision threshold")
    e.add_argument("--tests", type=lambda v: [m.strip().upper() for m in v.split(",") if m.strip()],
                   default=["SW", "LF", "AD", "JB", "FSSD"])
    e.add_argument("--alpha", type=_float_list, default=[0.01, 0.05, 0.1])
    e.add_argument("--power", action="store_true", help="write the TNR-per-size table")
    e.add_argument("--power-alpha", type=float, default=0.1)
    e.add_argument("--reliability", action="store_true")
    e.add_argument("--bins", type=int, default=10)
    e.add_argument("--reliability-subsets", type=int, default=0,
                   help="also draw this many random-subset diagrams")
    e.add_argument("--subset-size", type=int, default=1000)
    e.add_argument("--optimize-threshold", action="store_true",
                   help="per-size ROC-optimal thresholds for the DBNN")
    e.add_argument("--fssd-sims", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("crossval", help="grid search with k-fold cross-validation")
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True, help="grid report CSV")
    c.add_argument("--folds", type=int, default=5)
    c.add_argument("--q", type=_float_list, default=[0.05, 0.1])
    c.add_argument("--arch", type=_arch_list, default=[(100, 10), (1000,)],
                   help="architectures, e.g. '100,10;1000'")
    c.add_argument("--c", type=_float_list, default=[0.1, 1.0, 10.0])
    c.add_argument("--epochs", type=int, default=200)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_crossval)

    lc = sub.add_parser("learning-curve", help="accuracy and fit time versus training-set size")
    lc.add_argument("--data", required=True)
    lc.add_argument("--out", required=True)
    lc.add_argument("--fractions", type=_float_list, default=[0.1, 0.25, 0.5, 0.75, 1.0])
    lc.add_argument("--folds", type=int, default=20)
    _add_train_flags(lc)
    lc.set_defaults(func=cmd_learning_curve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"normnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"normnet: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NormnetError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"normnet: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
