"""Command-line driver: train, predict, prune, benchmark, order-study and stats."""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .agglo import MEASURES
from .bench import SCHEMA_VERSION, dumps, run_benchmark, timing_path, write_report
from .core import GfmmError, IntervalData
from .io import load_csv, load_model, normalize, save_model
from .pruning import prune
from .selection import (
    AGGLO,
    ALGORITHMS,
    DEFAULT_THETAS,
    GridSpec,
    config_dict,
    make_config,
    order_stability_experiment,
    split_folds,
    timed_run,
)
from .stats import friedman, holm, rank_rows


class UsageError(Exception):
    pass


def _gamma(text: str | None):
    if text is None:
        return 1.0
    parts = [float(x) for x in text.split(",")]
    return parts[0] if len(parts) == 1 else parts


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--label-column", type=int, default=-1, help="label column index (default: last)")
    p.add_argument("--header", action=argparse.BooleanOptionalAction, default=None,
                   help="first row is a header (default: detect)")
    p.add_argument("--interval", action="store_true", help="features are l1..ln,u1..un interval bounds")
    p.add_argument("--delimiter", default=",")


def _load(args, path, **kw):
    return load_csv(path, label_column=kw.pop("label_column", args.label_column), header=args.header,
                    interval=args.interval, delimiter=args.delimiter, **kw)


def _config(args):
    try:
        return make_config(args.algo, args.theta, args.sigma, args.measure,
                           getattr(args, "theta_min", None), getattr(args, "phi", None),
                           getattr(args, "max_passes", None))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _base(command: str, **rest) -> dict:
    return {"schema": SCHEMA_VERSION, "tool": "gfmm", "version": __version__, "command": command, **rest}


def _emit(args, payload: dict, timing: dict | None = None) -> None:
    if getattr(args, "report", None):
        write_report(payload, args.report)
        if timing is not None:
            write_report(timing, timing_path(args.report))


def _verify(args, build: Callable[[], dict], first: dict) -> None:
    if getattr(args, "verify", False):
        again = build()
        if dumps(again) != dumps(first):
            raise GfmmError("verification rerun produced a different report")
        print("verify: rerun report is identical")


def cmd_train(args) -> int:
    config = _config(args)
    ds = _load(args, args.data)
    ds = normalize(ds)
    data = ds.patterns()
    if args.shuffle:
        data = data.subset(np.random.default_rng(args.seed).permutation(len(data)))
    gamma = _gamma(args.gamma)

    def build():
        run = timed_run(args.algo, data, config, gamma)
        model = run.model
        model.class_names = ds.class_names
        model.normalization = ds.normalization
        payload = _base("train", data=Path(args.data).name, algorithm=args.algo, config=config_dict(config),
                        seed=args.seed, shuffle=args.shuffle, gamma=model.gamma.tolist(),
                        n_samples=len(data), n_boxes=len(model),
                        training_error_pct=100 * model.error_rate(data) if np.any(data.labels) else None)
        for key in ("passes", "status", "sweeps"):
            if key in model.info:
                payload[key] = model.info[key]
        return model, run.seconds, payload

    model, seconds, payload = build()
    if args.out:
        save_model(model, args.out)
    err = payload["training_error_pct"]
    print(f"trained {args.algo}: {len(model)} hyperboxes, training error "
          f"{'n/a' if err is None else f'{err:.4f} %'}, {seconds:.4f} s"
          + (f" -> {args.out}" if args.out else ""))
    _emit(args, payload, {"schema": SCHEMA_VERSION, "train_seconds": seconds})
    _verify(args, lambda: build()[2], payload)
    return 0


def _apply_model_scaling(model, ds):
    if model.normalization is not None:
        ds = normalize(ds, norm=model.normalization)
    return ds


def cmd_predict(args) -> int:
    model = load_model(args.model)
    ds = _load(args, args.data, label_column=None if args.unlabeled else args.label_column,
               class_names=model.class_names)
    ds = _apply_model_scaling(model, ds)
    data = ds.patterns()
    res = model.predict_batch(data)
    names = model.class_names

    def name(c):
        return names[c - 1] if names else str(c)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["row", "predicted"] + [f"score_{name(c)}" for c in res.classes])
        for i in range(len(data)):
            w.writerow([i, name(res.labels[i])] + [repr(float(s)) for s in res.scores[i]])
    finally:
        if args.out:
            out.close()
    payload = _base("predict", data=Path(args.data).name, n_samples=len(data),
                    predictions=[name(c) for c in res.labels])
    if np.any(data.labels):
        err = 100 * model.error_rate(data)
        payload["error_pct"] = err
        print(f"error rate: {err:.4f} % on {int(np.count_nonzero(data.labels))} labeled rows", file=sys.stderr)
    _emit(args, payload)
    return 0


def cmd_prune(args) -> int:
    model = load_model(args.model)
    ds = _load(args, args.validation, class_names=model.class_names)
    val = _apply_model_scaling(model, ds).patterns()
    before = model.error_rate(val)
    pruned = prune(model, val, args.min_accuracy, until_stable=not args.single_shot)
    pruned.info.pop("merges", None)
    save_model(pruned, args.out)
    after = pruned.error_rate(val)
    print(f"pruned {len(model)} -> {len(pruned)} hyperboxes; validation error "
          f"{100 * before:.4f} % -> {100 * after:.4f} % -> {args.out}")
    _emit(args, _base("prune", validation=Path(args.validation).name, min_accuracy=args.min_accuracy,
                      boxes_before=len(model), boxes_after=len(pruned),
                      validation_error_before_pct=100 * before, validation_error_after_pct=100 * after,
                      rounds=pruned.info.get("pruning")))
    return 0


def cmd_benchmark(args) -> int:
    if args.grid:
        grid = GridSpec.from_toml(args.grid, args.algo)
    else:
        if not args.algo:
            raise UsageError("--algo is required without --grid")
        grid = GridSpec(DEFAULT_THETAS, algorithm=args.algo)
    ds = _load(args, args.data)
    gamma = _gamma(args.gamma)

    def build():
        return run_benchmark(ds, grid, args.folds, args.inner_folds, args.seed, gamma,
                             args.prune, args.min_accuracy)

    report = build()
    print(report.table())
    _emit(args, report.as_dict(), report.timing_dict())
    _verify(args, lambda: build().as_dict(), report.as_dict())
    return 0


def cmd_order_study(args) -> int:
    config = _config(args)
    ds = _load(args, args.data)
    plan = split_folds(ds.labels, args.folds, args.seed)
    train_idx, test_idx = plan.complement(args.test_fold), plan.indices(args.test_fold)
    ds = normalize(ds, train_idx)
    train_data, test_data = ds.subset(train_idx).patterns(), ds.subset(test_idx).patterns()
    gamma = _gamma(args.gamma)

    def build():
        study = order_stability_experiment(train_data, test_data, config, args.algo, args.shuffles,
                                           args.seed, gamma)
        return _base("order-study", data=Path(args.data).name, algorithm=args.algo,
                     config=config_dict(config), folds=args.folds, test_fold=args.test_fold,
                     shuffles=args.shuffles, seed=args.seed, result=study.as_dict())

    t0 = time.perf_counter()
    payload = build()
    seconds = time.perf_counter() - t0
    res = payload["result"]
    print(f"{args.algo} over {args.shuffles} shuffles: std(boxes) = {res['std_boxes']:.4f}, "
          f"std(test error %) = {res['std_test_error_pct']:.4f}, identical box sets: {res['identical_box_sets']}")
    _emit(args, payload, {"schema": SCHEMA_VERSION, "total_seconds": seconds})
    _verify(args, build, payload)
    return 0


def read_table(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    """Classifier names, dataset names and the value matrix of a results table."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise GfmmError(f"{path}: need a header row and at least one data row")
    names = [c.strip() for c in rows[0][1:]]
    datasets, values = [], []
    for line, r in enumerate(rows[1:], start=2):
        if len(r) != len(names) + 1:
            raise GfmmError(f"{path}: line {line} has {len(r)} fields, expected {len(names) + 1}")
        datasets.append(r[0].strip())
        try:
            values.append([float(c) for c in r[1:]])
        except ValueError:
            raise GfmmError(f"{path}: line {line} has a non-numeric value") from None
    return names, datasets, np.asarray(values)


def cmd_stats(args) -> int:
    names, datasets, E = read_table(args.errors)
    ranks = rank_rows(E, names, datasets)
    payload = _base(f"stats {args.test}", table=Path(args.errors).name, names=names, datasets=datasets,
                    ranks=ranks.values.tolist(), decimals=args.decimals)
    if args.test == "friedman":
        res = friedman(ranks, alpha=args.alpha, decimals=args.decimals)
        payload["result"] = res.as_dict()
        print("average ranks: " + ", ".join(f"{n}={r:.4f}" for n, r in zip(names, res.average_ranks)))
        print(f"chi2_F = {res.chi2_f:.4f} (df {res.df_chi2}, p = {res.p_chi2:.4g})")
        print(f"F_F = {res.f_f:.4f} (df {res.df_f[0]}, {res.df_f[1]}, p = {res.p_f:.4g}); "
              f"critical F = {res.critical_f:.4f} at alpha = {res.alpha}; "
              f"{'reject' if res.reject else 'retain'} H0")
    else:
        try:
            rows = holm(ranks, args.control, args.alpha, decimals=args.decimals)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        payload.update(control=args.control, alpha=args.alpha,
                       result=[{"name": r.name, "z": r.z, "p": r.p, "threshold": r.threshold,
                                "reject": r.reject} for r in rows])
        width = max(len(r.name) for r in rows)
        print(f"{'i':>2}  {args.control + ' vs.':<{width + 5}} {'z':>8} {'p':>8} {'alpha/(k-i)':>12}  decision")
        for i, r in enumerate(rows, start=1):
            print(f"{i:>2}  {r.name:<{width + 5}} {r.z:>8.4f} {r.p:>8.4f} {r.threshold:>12.4f}  "
                  f"{'reject' if r.reject else 'retain'}")
    _emit(args, payload)
    return 0


def _algo_args(p: argparse.ArgumentParser, theta_default: float | None = 0.26) -> None:
    p.add_argument("--algo", required=True, choices=sorted(ALGORITHMS))
    p.add_argument("--theta", type=float, default=theta_default)
    p.add_argument("--theta-min", type=float)
    p.add_argument("--phi", type=float)
    p.add_argument("--max-passes", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--measure", choices=MEASURES)
    p.add_argument("--gamma", help="sensitivity, one value or a comma-separated vector")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gfmm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gfmm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a CSV file")
    _algo_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--shuffle", action="store_true", help="present patterns in a seeded random order")
    p.add_argument("--out", help="model output path")
    p.add_argument("--report")
    p.add_argument("--verify", action="store_true", help="rerun and check the report is identical")
    _data_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify the rows of a CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--unlabeled", action="store_true", help="the file has no label column")
    p.add_argument("--report")
    _data_args(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("prune", help="prune a model on a validation CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--validation", required=True)
    p.add_argument("--min-accuracy", type=float, default=0.5)
    p.add_argument("--single-shot", action="store_true", help="one pruning round only")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _data_args(p)
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("benchmark", help="outer folds x inner grid search evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--algo", choices=sorted(ALGORITHMS))
    p.add_argument("--grid", help="TOML grid specification")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--inner-folds", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma")
    p.add_argument("--prune", action="store_true", help="also evaluate validation-pruned models")
    p.add_argument("--min-accuracy", type=float, default=0.5)
    p.add_argument("--report")
    p.add_argument("--verify", action="store_true")
    _data_args(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("order-study", help="presentation-order sensitivity experiment")
    _algo_args(p)
    p.add_argument("--data", required=True)
    p.add_argument("--shuffles", type=int, default=10)
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--test-fold", type=int, default=0)
    p.add_argument("--report")
    p.add_argument("--verify", action="store_true")
    _data_args(p)
    p.set_defaults(func=cmd_order_study)

    p = sub.add_parser("stats", help="Friedman / Holm tests on a results table")
    p.add_argument("test", choices=["friedman", "holm"])
    p.add_argument("--errors", required=True, help="CSV: dataset column then one column per classifier")
    p.add_argument("--control", help="control classifier name (holm)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--decimals", type=int, help="round average ranks half-up before testing")
    p.add_argument("--report")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "stats" and args.test == "holm" and not args.control:
        parser.error("stats holm requires --control")
    if args.command == "order-study" and args.algo == "online-adaptive" and args.theta is None:
        parser.error("--theta is required")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (GfmmError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
