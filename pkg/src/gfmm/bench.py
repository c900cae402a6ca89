"""Outer-fold evaluation with inner grid search, timing capture and reports.

Reports are split in two: the deterministic part (configuration, selected
cells, errors, box counts) and wall-clock timings, which are kept apart so
that reruns with the same seed give byte-identical reports.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .io import Dataset, normalize
from .pruning import prune as prune_model
from .selection import GridSpec, config_dict, grid_search, split_folds, timed_run

SCHEMA_VERSION = 1


def dumps(obj: Any) -> str:
    """Canonical JSON used for every report file."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


@dataclass
class FoldRecord:
    fold: int
    n_train: int
    n_test: int
    best: dict
    validation_error: float
    test_error: float
    n_boxes: int
    train_seconds: float
    tune_seconds: float
    grid: dict = field(default_factory=dict)
    pruned: dict | None = None

    def as_dict(self) -> dict:
        out = {
            "fold": self.fold, "n_train": self.n_train, "n_test": self.n_test,
            "best": self.best, "validation_error": self.validation_error,
            "test_error_pct": 100 * self.test_error, "n_boxes": self.n_boxes,
            "grid": self.grid,
        }
        if self.pruned is not None:
            out["pruned"] = self.pruned
        return out


@dataclass
class EvalReport:
    dataset: str
    n_samples: int
    n_features: int
    algorithm: str
    grid: dict
    folds: int
    inner_folds: int
    seed: int
    gamma: list
    prune: bool
    records: list[FoldRecord] = field(default_factory=list)
    version: str = __version__

    def averages(self) -> dict:
        r = self.records
        out = {
            "test_error_pct": float(np.mean([100 * x.test_error for x in r])),
            "n_boxes": float(np.mean([x.n_boxes for x in r])),
        }
        if self.prune:
            out["pruned_test_error_pct"] = float(np.mean([x.pruned["test_error_pct"] for x in r]))
            out["pruned_n_boxes"] = float(np.mean([x.pruned["n_boxes"] for x in r]))
        return out

    def timing_averages(self) -> dict:
        return {
            "train_seconds": float(np.mean([x.train_seconds for x in self.records])),
            "tune_seconds": float(np.mean([x.tune_seconds for x in self.records])),
        }

    def as_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "tool": "gfmm",
            "version": self.version,
            "command": "benchmark",
            "dataset": {"name": self.dataset, "n_samples": self.n_samples, "n_features": self.n_features},
            "config": {
                "algorithm": self.algorithm, "grid": self.grid, "folds": self.folds,
                "inner_folds": self.inner_folds, "seed": self.seed, "gamma": self.gamma,
                "prune": self.prune,
            },
            "folds": [x.as_dict() for x in self.records],
            "averages": self.averages(),
        }

    def timing_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "folds": [{"fold": x.fold, "train_seconds": x.train_seconds, "tune_seconds": x.tune_seconds}
                      for x in self.records],
            "averages": self.timing_averages(),
        }

    def table(self) -> str:
        head = f"{'fold':>4}  {'best':<44} {'boxes':>6} {'test err %':>10} {'train s':>9} {'tune s':>9}"
        lines = [f"{self.dataset}: {self.algorithm}, {self.folds} folds x {self.inner_folds} inner", head]
        for x in self.records:
            best = ", ".join(f"{k}={v}" for k, v in x.best.items())
            lines.append(f"{x.fold:>4}  {best:<44} {x.n_boxes:>6} {100 * x.test_error:>10.4f} "
                         f"{x.train_seconds:>9.4f} {x.tune_seconds:>9.4f}")
        avg, tim = self.averages(), self.timing_averages()
        lines.append(f"{'mean':>4}  {'':<44} {avg['n_boxes']:>6.2f} {avg['test_error_pct']:>10.4f} "
                     f"{tim['train_seconds']:>9.4f} {tim['tune_seconds']:>9.4f}")
        if self.prune:
            lines.append(f"pruned: boxes {avg['pruned_n_boxes']:.2f}, test error {avg['pruned_test_error_pct']:.4f} %")
        return "\n".join(lines)


def run_benchmark(dataset: Dataset, grid: GridSpec, folds: int = 4, inner_folds: int = 3,
                  seed: int = 0, gamma=1.0, prune: bool = False, min_accuracy: float = 0.5,
                  workers: int | None = None) -> EvalReport:
    """Outer folds as test sets; grid search on the rest; final train and test.

    Features are normalised per outer fold with training-split statistics.
    With ``prune`` a second model is trained with the selected cell on all
    but one inner fold and pruned on that held-out fold.
    """
    plan = split_folds(dataset.labels, folds, seed)
    gamma_vec = np.broadcast_to(np.asarray(gamma, dtype=float), (dataset.n_features,)).tolist()
    report = EvalReport(dataset.name, len(dataset), dataset.n_features, grid.algorithm, grid.as_dict(),
                        folds, inner_folds, seed, gamma_vec, prune)
    for f in range(folds):
        train_idx, test_idx = plan.complement(f), plan.indices(f)
        ds = normalize(dataset, train_idx)
        train_data, test_data = ds.subset(train_idx).patterns(), ds.subset(test_idx).patterns()
        inner = split_folds(train_data.labels, inner_folds, seed + 1 + f)
        t0 = time.perf_counter()
        result = grid_search(train_data, inner, grid, gamma, workers)
        tune_seconds = time.perf_counter() - t0
        config = result.best_config()
        run = timed_run(grid.algorithm, train_data, config, gamma)
        record = FoldRecord(
            f, len(train_data), len(test_data), config_dict(config), result.best_error,
            run.model.error_rate(test_data), len(run.model), run.seconds, tune_seconds,
            grid=result.as_dict(),
        )
        if prune:
            hold = inner.indices(inner_folds - 1)
            fit = inner.complement(inner_folds - 1)
            base = timed_run(grid.algorithm, train_data.subset(fit), config, gamma).model
            pruned = prune_model(base, train_data.subset(hold), min_accuracy)
            record.pruned = {
                "unpruned_n_boxes": len(base),
                "unpruned_test_error_pct": 100 * base.error_rate(test_data),
                "n_boxes": len(pruned),
                "test_error_pct": 100 * pruned.error_rate(test_data),
            }
        report.records.append(record)
    return report


def write_report(payload: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(payload))


def timing_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".timing.json")
