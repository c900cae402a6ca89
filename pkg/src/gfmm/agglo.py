"""Agglomerative GFMM learning: similarity measures, AGGLO-SM and AGGLO-2.

Both learners start from one point (or interval) box per distinct input
pattern and repeatedly merge pairs of class-compatible boxes.  A merge of
boxes ``i`` and ``h`` is admissible when

(a) the merged box overlaps no box of a different non-zero class,
(b) its span is at most ``theta`` in every dimension,
(c) the pair's similarity is at least ``sigma``,
(d) the labels agree or at least one of them is unlabeled.

Every accepted merge is appended to ``model.info["merges"]`` as
``(kept, removed, similarity)`` in initial-box numbering, so that
:func:`verify_merge_log` can replay and re-check it.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .core import (
    THETA_TOL,
    UNLABELED,
    DimensionMismatchError,
    GfmmError,
    GfmmModel,
    Hyperbox,
    IntervalData,
    InvalidParameterError,
    _ramp,
    as_gamma,
    boxes_overlap,
    as_interval_data,
)


class SimilarityMeasure(str, Enum):
    MID_MIN = "mid-min"
    MID_MAX = "mid-max"
    SHORTEST = "shortest"
    LONGEST = "longest"

    @property
    def symmetric(self) -> bool:
        return self in (SimilarityMeasure.SHORTEST, SimilarityMeasure.LONGEST)


MEASURES = [m.value for m in SimilarityMeasure]


@dataclass(frozen=True)
class AggloConfig:
    theta: float = 0.26
    sigma: float = 0.0
    measure: SimilarityMeasure = SimilarityMeasure.LONGEST

    def __post_init__(self) -> None:
        if not 0 < self.theta <= 1:
            raise InvalidParameterError(f"theta must lie in (0, 1], got {self.theta}")
        if not 0 <= self.sigma <= 1:
            raise InvalidParameterError(f"sigma must lie in [0, 1], got {self.sigma}")
        object.__setattr__(self, "measure", SimilarityMeasure(self.measure))


def _sim(vi, wi, vh, wh, gamma, measure: SimilarityMeasure) -> np.ndarray:
    """Similarity of box ``i`` (broadcastable) against box(es) ``h``; min over the last axis."""
    one = lambda z: 1.0 - _ramp(z, gamma)  # noqa: E731
    if measure is SimilarityMeasure.SHORTEST:
        return np.minimum(one(vh - wi), one(vi - wh)).min(axis=-1)
    if measure is SimilarityMeasure.LONGEST:
        return np.minimum(one(wh - vi), one(wi - vh)).min(axis=-1)
    s_ih = np.minimum(one(wh - wi), one(vi - vh)).min(axis=-1)
    s_hi = np.minimum(one(wi - wh), one(vh - vi)).min(axis=-1)
    if measure is SimilarityMeasure.MID_MIN:
        return np.minimum(s_ih, s_hi)
    return np.maximum(s_ih, s_hi)


def similarity(a: Hyperbox, b: Hyperbox, measure: SimilarityMeasure | str = "longest", gamma=1.0) -> float:
    if a.n_dims != b.n_dims:
        raise DimensionMismatchError(f"boxes have {a.n_dims} and {b.n_dims} dimensions")
    if a.is_empty or b.is_empty:
        raise GfmmError("similarity of an uninitialised (sentinel) hyperbox is undefined")
    g = as_gamma(gamma, a.n_dims)
    return float(_sim(a.min_point, a.max_point, b.min_point, b.max_point, g, SimilarityMeasure(measure)))


def _compatible(la: int, lb: int) -> bool:
    return la == lb or la == UNLABELED or lb == UNLABELED


def _merged_label(la: int, lb: int) -> int:
    return la if la != UNLABELED else lb


def aggregation_admissible(a: Hyperbox, b: Hyperbox, others: Sequence[Hyperbox],
                           config: AggloConfig, gamma=1.0) -> bool:
    """Check the four merge conditions for ``a`` and ``b`` given the other live boxes."""
    if not _compatible(a.label, b.label):
        return False
    v = np.minimum(a.min_point, b.min_point)
    w = np.maximum(a.max_point, b.max_point)
    if np.any(w - v > config.theta + THETA_TOL):
        return False
    if similarity(a, b, config.measure, gamma) < config.sigma:
        return False
    label = _merged_label(a.label, b.label)
    for o in others:
        if o.label in (UNLABELED, label):
            continue
        if boxes_overlap(v, w, o.min_point, o.max_point):
            return False
    return True


def initial_boxes(data: Any) -> tuple[IntervalData, np.ndarray]:
    """Distinct patterns in first-occurrence order, with their multiplicities."""
    data = as_interval_data(data)
    if len(data) == 0:
        raise GfmmError("training data is empty")
    if np.any(data.lower < 0) or np.any(data.upper > 1):
        raise InvalidParameterError("training patterns must be normalised to [0, 1]")
    rows = np.hstack([data.lower, data.upper, data.labels[:, None].astype(float)])
    _, first, counts = np.unique(rows, axis=0, return_index=True, return_counts=True)
    order = np.argsort(first)
    return data.subset(first[order]), counts[order]


class _AggloState:
    def __init__(self, data: IntervalData, counts: np.ndarray, gamma: np.ndarray, config: AggloConfig):
        self.counts = counts.copy()
        self.V = data.lower.copy()
        self.W = data.upper.copy()
        self.labels = data.labels.copy()
        self.alive = np.ones(len(data), dtype=bool)
        self.gamma = gamma
        self.config = config
        self.merges: list[tuple[int, int, float]] = []

    def row(self, i: int, idx: np.ndarray) -> np.ndarray:
        return _sim(self.V[i], self.W[i], self.V[idx], self.W[idx], self.gamma, self.config.measure)

    def compatible_with(self, i: int) -> np.ndarray:
        li = self.labels[i]
        mask = self.alive.copy()
        if li != UNLABELED:
            mask &= (self.labels == li) | (self.labels == UNLABELED)
        mask[i] = False
        return mask

    def size_ok(self, i: int, idx: np.ndarray) -> np.ndarray:
        span = np.maximum(self.W[idx], self.W[i]) - np.minimum(self.V[idx], self.V[i])
        return np.all(span <= self.config.theta + THETA_TOL, axis=1)

    def overlap_free(self, i: int, h: int) -> bool:
        v = np.minimum(self.V[i], self.V[h])
        w = np.maximum(self.W[i], self.W[h])
        label = _merged_label(int(self.labels[i]), int(self.labels[h]))
        foreign = self.alive & (self.labels != UNLABELED) & (self.labels != label)
        foreign[[i, h]] = False
        idx = np.flatnonzero(foreign)
        if idx.size == 0:
            return True
        hit = boxes_overlap(self.V[idx], self.W[idx], v, w)
        return not bool(hit.any())

    def merge(self, i: int, h: int, s: float) -> None:
        np.minimum(self.V[i], self.V[h], out=self.V[i])
        np.maximum(self.W[i], self.W[h], out=self.W[i])
        self.labels[i] = _merged_label(int(self.labels[i]), int(self.labels[h]))
        self.counts[i] += self.counts[h]
        self.alive[h] = False
        self.merges.append((int(i), int(h), float(s)))

    def to_model(self, **info: Any) -> GfmmModel:
        keep = np.flatnonzero(self.alive)
        info.update(merges=self.merges, initial_boxes=int(self.alive.size),
                    multiplicity=self.counts[keep].tolist())
        return GfmmModel(self.V[keep], self.W[keep], self.labels[keep], self.gamma,
                         n_dims=self.V.shape[1], info=info)


def _check(config: AggloConfig) -> AggloConfig:
    if not isinstance(config, AggloConfig):
        raise InvalidParameterError("an AggloConfig is required")
    return config


def train_agglo_sm(data: Any, config: AggloConfig = AggloConfig(), gamma=1.0) -> GfmmModel:
    """Agglomeration driven by the full pairwise similarity matrix.

    Each step orders all candidate pairs by descending similarity (ties by
    the smaller first, then second, box index) and merges the first
    admissible pair into its lower-indexed box.  Only the merged box's row
    of the matrix is recomputed.  A pair that fails the checks stays
    inadmissible until one of its boxes changes, since rejected merges
    can only be caused by foreign boxes that never shrink.
    """
    config = _check(config)
    boxes, counts = initial_boxes(data)
    gamma = as_gamma(gamma, boxes.n_dims)
    st = _AggloState(boxes, counts, gamma, config)
    m = len(boxes)

    S = np.full((m, m), -np.inf)
    iu, ju = np.triu_indices(m, k=1)
    if iu.size:
        compat = ((st.labels[iu] == st.labels[ju]) | (st.labels[iu] == UNLABELED)
                  | (st.labels[ju] == UNLABELED))
        iu, ju = iu[compat], ju[compat]
        S[iu, ju] = _sim(st.V[iu], st.W[iu], st.V[ju], st.W[ju], gamma, config.measure)

    while True:
        ii, jj = np.nonzero(S >= config.sigma)
        if ii.size == 0:
            break
        s = S[ii, jj]
        order = np.lexsort((jj, ii, -s))
        merged = False
        for t in order:
            i, h = int(ii[t]), int(jj[t])
            size_ok = st.size_ok(i, np.array([h]))[0]
            if size_ok and st.overlap_free(i, h):
                st.merge(i, h, float(s[t]))
                merged = True
                break
            S[i, h] = -np.inf
        if not merged:
            break
        S[h, :] = -np.inf
        S[:, h] = -np.inf
        S[i, :] = -np.inf
        S[:, i] = -np.inf
        idx = np.flatnonzero(st.compatible_with(i))
        if idx.size:
            vals = st.row(i, idx)
            lo, hi = idx[idx < i], idx[idx > i]
            S[lo, i] = vals[idx < i]
            S[i, hi] = vals[idx > i]
    return st.to_model(algorithm="agglo-sm", theta=config.theta,
                       sigma=config.sigma, measure=config.measure.value)


def train_agglo_2(data: Any, config: AggloConfig = AggloConfig(), gamma=1.0) -> GfmmModel:
    """Accelerated agglomeration without the full similarity matrix.

    Boxes are visited in index order.  The current box is merged (in place)
    with its most similar admissible partner; partners are tried in
    descending similarity.  Sweeps repeat until one completes without a merge.
    """
    config = _check(config)
    boxes, counts = initial_boxes(data)
    gamma = as_gamma(gamma, boxes.n_dims)
    st = _AggloState(boxes, counts, gamma, config)
    m = len(boxes)
    sweeps = 0
    while True:
        sweeps += 1
        merged_any = False
        for i in range(m):
            if not st.alive[i]:
                continue
            idx = np.flatnonzero(st.compatible_with(i))
            if idx.size == 0:
                continue
            vals = st.row(i, idx)
            ok = (vals >= config.sigma) & st.size_ok(i, idx)
            idx, vals = idx[ok], vals[ok]
            for t in np.argsort(-vals, kind="stable"):
                h = int(idx[t])
                if st.overlap_free(i, h):
                    st.merge(i, h, float(vals[t]))
                    merged_any = True
                    break
        if not merged_any:
            break
    return st.to_model(algorithm="agglo-2", theta=config.theta, sigma=config.sigma,
                       measure=config.measure.value, sweeps=sweeps)


def verify_merge_log(data: Any, model: GfmmModel, config: AggloConfig) -> list[str]:
    """Replay a trainer's merge log and re-check every merge condition.

    Uses the scalar box-level checks only.  Returns a list of problems;
    an empty list means every merge was admissible when it was made and the
    replay reproduces the model's box set.
    """
    boxes_data, _ = initial_boxes(data)
    boxes = {i: Hyperbox.from_pattern(p) for i, p in enumerate(boxes_data)}
    problems = []
    for step, (i, h, s) in enumerate(model.info.get("merges", [])):
        if i not in boxes or h not in boxes or i == h:
            problems.append(f"merge {step}: box {i} or {h} is not live")
            continue
        a, b = boxes[i], boxes[h]
        others = [bx for k, bx in boxes.items() if k not in (i, h)]
        if not aggregation_admissible(a, b, others, config, model.gamma):
            problems.append(f"merge {step}: ({i}, {h}) violates a merge condition")
        if not np.isclose(similarity(a, b, config.measure, model.gamma), s, rtol=0, atol=1e-12):
            problems.append(f"merge {step}: logged similarity {s} does not match")
        boxes[i] = Hyperbox(np.minimum(a.min_point, b.min_point), np.maximum(a.max_point, b.max_point),
                            _merged_label(a.label, b.label))
        del boxes[h]
    replayed = {b.key() for b in boxes.values()}
    if replayed != model.box_set() or len(boxes) != len(model):
        problems.append("replayed merges do not reproduce the model's boxes")
    return problems
