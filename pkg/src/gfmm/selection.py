"""Experimental protocol: fold splitting, grid search, order studies and timing."""
from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np

from .agglo import MEASURES, AggloConfig, train_agglo_2, train_agglo_sm
from .core import GfmmError, GfmmModel, IntervalData, InvalidParameterError, as_interval_data
from .online import OnlineConfig, train_online, train_online_adaptive

# 0.06, 0.1, 0.16, 0.2, 0.26 then alternating +0.04 / +0.06 steps up to 0.8
DEFAULT_THETAS = (0.06, 0.1, 0.16, 0.2, 0.26, 0.3, 0.36, 0.4, 0.46, 0.5,
                0.56, 0.6, 0.66, 0.7, 0.76, 0.8)
DEFAULT_SIGMAS = tuple(round(0.02 * i, 2) for i in range(1, 50))

ALGORITHMS: dict[str, Callable[..., GfmmModel]] = {
    "online": train_online,
    "online-adaptive": train_online_adaptive,
    "agglo-sm": train_agglo_sm,
    "agglo-2": train_agglo_2,
}
AGGLO = ("agglo-sm", "agglo-2")


def check_algorithm(name: str) -> str:
    if name not in ALGORITHMS:
        raise InvalidParameterError(f"unknown algorithm {name!r}; choose from {sorted(ALGORITHMS)}")
    return name


def make_config(algorithm: str, theta: float, sigma: float | None = None, measure: str | None = None,
                theta_min: float | None = None, phi: float | None = None,
                max_passes: int | None = None) -> OnlineConfig | AggloConfig:
    """Build the trainer config for ``algorithm``; unused options are rejected."""
    check_algorithm(algorithm)
    if algorithm in AGGLO:
        if theta_min is not None or phi is not None or max_passes is not None:
            raise InvalidParameterError("theta_min/phi/max_passes only apply to online-adaptive")
        return AggloConfig(theta, 0.0 if sigma is None else sigma, measure or "longest")
    if sigma is not None or measure is not None:
        raise InvalidParameterError("sigma/measure only apply to agglomerative algorithms")
    if algorithm == "online":
        if theta_min is not None or phi is not None or max_passes is not None:
            raise InvalidParameterError("theta_min/phi/max_passes only apply to online-adaptive")
        return OnlineConfig(theta)
    kw = {k: v for k, v in (("theta_min", theta_min), ("phi", phi), ("max_passes", max_passes)) if v is not None}
    return OnlineConfig(theta, adaptive=True, **kw)


def train(algorithm: str, data: Any, config, gamma=1.0) -> GfmmModel:
    return ALGORITHMS[check_algorithm(algorithm)](data, config, gamma)


def config_dict(config) -> dict:
    if isinstance(config, AggloConfig):
        return {"theta": config.theta, "sigma": config.sigma, "measure": config.measure.value}
    out = {"theta": config.theta}
    if config.adaptive:
        out.update(theta_min=config.theta_min, phi=config.phi, max_passes=config.max_passes)
    return out


@dataclass
class FoldPlan:
    assignments: np.ndarray
    k: int
    strategy: str = "stratified"
    seed: int | None = None

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def complement(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def folds(self) -> list[np.ndarray]:
        return [self.indices(f) for f in range(self.k)]


def split_folds(labels, k: int = 4, seed: int = 0) -> FoldPlan:
    """Seeded stratified assignment of samples to ``k`` folds.

    Each class is shuffled and dealt round-robin, continuing from the fold
    where the previous class stopped, so per-class and total fold sizes both
    differ by at most one.
    """
    if hasattr(labels, "labels"):
        labels = labels.labels
    labels = np.asarray(labels)
    n = labels.size
    if k < 2:
        raise InvalidParameterError("at least 2 folds are required")
    if k > n:
        raise InvalidParameterError(f"cannot split {n} samples into {k} folds")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=np.int64)
    offset = 0
    small = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        if idx.size < k:
            small.append(int(c))
        assign[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    if small:
        warnings.warn(f"classes {small} have fewer than {k} samples; some folds miss them",
                      RuntimeWarning, stacklevel=2)
    return FoldPlan(assign, k, "stratified", seed)


class Cell(NamedTuple):
    theta: float
    sigma: float | None = None
    measure: str | None = None

    def as_dict(self) -> dict:
        return {k: v for k, v in self._asdict().items() if v is not None}


@dataclass
class GridSpec:
    theta_list: Sequence[float] = DEFAULT_THETAS
    sigma_list: Sequence[float] = (0.0,)
    measure_list: Sequence[str] = ("longest",)
    algorithm: str = "online"
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        check_algorithm(self.algorithm)
        self.theta_list = [float(t) for t in self.theta_list]
        self.sigma_list = [float(s) for s in self.sigma_list]
        self.measure_list = [str(m) for m in self.measure_list]
        if any(not 0 < t <= 1 for t in self.theta_list):
            raise InvalidParameterError("grid thetas must lie in (0, 1]")
        if any(not 0 <= s <= 1 for s in self.sigma_list):
            raise InvalidParameterError("grid sigmas must lie in [0, 1]")
        bad = [m for m in self.measure_list if m not in MEASURES]
        if bad:
            raise InvalidParameterError(f"unknown similarity measures {bad}")

    @classmethod
    def from_dict(cls, spec: dict, algorithm: str | None = None) -> "GridSpec":
        algo = algorithm or spec.get("algorithm", "online")
        kw: dict[str, Any] = {"algorithm": algo}
        if "theta" in spec:
            kw["theta_list"] = spec["theta"]
        if algo in AGGLO:
            kw["sigma_list"] = spec.get("sigma", [0.0])
            kw["measure_list"] = spec.get("measure", ["longest"])
        extra = {k: spec[k] for k in ("theta_min", "phi", "max_passes") if k in spec}
        return cls(extra=extra, **kw)

    @classmethod
    def from_toml(cls, path: str | Path, algorithm: str | None = None) -> "GridSpec":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh), algorithm)

    def cells(self) -> list[Cell]:
        if self.algorithm in AGGLO:
            return [Cell(t, s, m) for t in self.theta_list for s in self.sigma_list for m in self.measure_list]
        return [Cell(t) for t in self.theta_list]

    def config(self, cell: Cell):
        return make_config(self.algorithm, cell.theta, cell.sigma, cell.measure, **self.extra)

    def as_dict(self) -> dict:
        out = {"algorithm": self.algorithm, "theta": list(self.theta_list)}
        if self.algorithm in AGGLO:
            out.update(sigma=list(self.sigma_list), measure=list(self.measure_list))
        out.update(self.extra)
        return out


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GFMM_THREADS", "1")))
    except ValueError:
        return 1


def _fit_and_score(task):
    algorithm, config, gamma, train_data, val_data = task
    model = train(algorithm, train_data, config, gamma)
    return model.error_rate(val_data)


def _pool_map(fn, tasks: list, workers: int | None) -> list:
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))  # map preserves task order


@dataclass
class GridResult:
    cells: list[Cell]
    errors: np.ndarray  # (cells, folds) validation error rates
    best_index: int
    grid: GridSpec

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=1)

    @property
    def best(self) -> Cell:
        return self.cells[self.best_index]

    @property
    def best_error(self) -> float:
        return float(self.mean_errors[self.best_index])

    def best_config(self):
        return self.grid.config(self.best)

    def as_dict(self) -> dict:
        return {
            "best": self.best.as_dict(),
            "best_error": self.best_error,
            "cells": [dict(c.as_dict(), fold_errors=self.errors[i].tolist(),
                           mean_error=float(self.mean_errors[i])) for i, c in enumerate(self.cells)],
        }


def select_best(cells: Sequence[Cell], mean_errors: np.ndarray, measure_order: Sequence[str]) -> int:
    """Lowest mean error; ties go to smaller theta, smaller sigma, earlier measure."""
    def key(i):
        c = cells[i]
        return (round(float(mean_errors[i]), 12), c.theta, c.sigma or 0.0,
                measure_order.index(c.measure) if c.measure in measure_order else 0)
    return min(range(len(cells)), key=key)


def grid_search(data: Any, folds: FoldPlan | Sequence[np.ndarray], grid: GridSpec, gamma=1.0,
                workers: int | None = None) -> GridResult:
    """Average validation error of every grid cell over all fold rotations."""
    data = as_interval_data(data)
    fold_list = folds.folds() if isinstance(folds, FoldPlan) else [np.asarray(f) for f in folds]
    if len(fold_list) < 2:
        raise InvalidParameterError("grid search needs at least 2 folds")
    cells = grid.cells()
    if not cells:
        raise InvalidParameterError("grid is empty")
    everything = np.concatenate(fold_list)
    tasks = []
    for cell in cells:
        config = grid.config(cell)
        for f, val_idx in enumerate(fold_list):
            train_idx = np.concatenate([g for j, g in enumerate(fold_list) if j != f])
            if np.intersect1d(train_idx, val_idx).size:
                raise GfmmError("validation fold overlaps its training folds")
            tasks.append((grid.algorithm, config, gamma, data.subset(train_idx), data.subset(val_idx)))
    if np.unique(everything).size != everything.size:
        raise GfmmError("folds are not disjoint")
    errors = np.asarray(_pool_map(_fit_and_score, tasks, workers)).reshape(len(cells), len(fold_list))
    best = select_best(cells, errors.mean(axis=1), grid.measure_list)
    return GridResult(cells, errors, best, grid)


class TimedRun(NamedTuple):
    model: GfmmModel
    seconds: float
    times: list[float]


def timed_run(algorithm: str, data: Any, config, gamma=1.0, repeats: int = 1) -> TimedRun:
    """Train ``repeats`` times and report the mean wall-clock training time."""
    data = as_interval_data(data)
    times = []
    model = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        model = train(algorithm, data, config, gamma)
        times.append(time.perf_counter() - t0)
    return TimedRun(model, float(np.mean(times)), times)


@dataclass
class OrderStudy:
    box_counts: np.ndarray
    errors: np.ndarray
    box_sets: list[frozenset]

    @staticmethod
    def _std(x: np.ndarray) -> float:
        # shifting by one sample is exact for constant runs (plain np.std can leave ~1e-18)
        x = np.asarray(x, dtype=float)
        return float(np.std(x - x[0]))

    @property
    def std_boxes(self) -> float:
        return self._std(self.box_counts)

    @property
    def std_error(self) -> float:
        return self._std(self.errors)

    @property
    def identical_box_sets(self) -> bool:
        return all(s == self.box_sets[0] for s in self.box_sets)

    def as_dict(self) -> dict:
        return {
            "box_counts": self.box_counts.tolist(),
            "test_errors_pct": (100 * self.errors).tolist(),
            "std_boxes": self.std_boxes,
            "std_test_error_pct": 100 * self.std_error,
            "identical_box_sets": self.identical_box_sets,
        }


def order_stability_experiment(train_data: Any, test_data: Any, config, algorithm: str,
                               n_shuffles: int = 10, seed: int = 0, gamma=1.0,
                               permutations: Sequence[np.ndarray] | None = None) -> OrderStudy:
    """Retrain on shuffled copies of the training set and collect the spread."""
    train_data = as_interval_data(train_data)
    test_data = as_interval_data(test_data)
    if permutations is None:
        if n_shuffles < 2:
            raise InvalidParameterError("need at least 2 shuffles")
        rng = np.random.default_rng(seed)
        permutations = [rng.permutation(len(train_data)) for _ in range(n_shuffles)]
    counts, errors, sets = [], [], []
    for perm in permutations:
        model = train(algorithm, train_data.subset(perm), config, gamma)
        counts.append(len(model))
        errors.append(model.error_rate(test_data))
        sets.append(frozenset(model.box_set()))
    return OrderStudy(np.asarray(counts), np.asarray(errors), sets)
