"""Hyperbox domain types, the GFMM membership function and class-node prediction.

Patterns and hyperboxes live in the unit cube.  A pattern is an interval
``[lower, upper]`` (crisp points have ``lower == upper``) with a class label,
where label 0 marks an unlabeled sample.  A trained model is stored as two
``(m, n)`` matrices of min points ``V`` and max points ``W`` plus a label
vector; the class connection weights are implicit in the labels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

UNLABELED = 0

# Absolute slack for the maximum-size test; 0.4 - 0.1 is 0.30000000000000004.
THETA_TOL = 1e-9

# Memory cap (in float64 elements) for one block of the membership tensor.
_BLOCK = 1 << 21


class GfmmError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(GfmmError, ValueError):
    pass


class DimensionMismatchError(GfmmError, ValueError):
    pass


class EmptyModelError(GfmmError):
    pass


def ramp(z: float, gamma_j: float) -> float:
    """Piecewise-linear ramp ``f(z, gamma)`` clipped to [0, 1]."""
    if not gamma_j > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma_j!r}")
    zg = z * gamma_j
    if zg > 1:
        return 1.0
    if zg < 0:
        return 0.0
    return float(zg)


def _ramp(z: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return np.clip(z * gamma, 0.0, 1.0)


def as_gamma(gamma: float | Sequence[float] | np.ndarray | None, n_dims: int) -> np.ndarray:
    """Broadcast a scalar or per-dimension sensitivity to a positive vector."""
    if gamma is None:
        gamma = 1.0
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full(n_dims, float(g))
    if g.shape != (n_dims,):
        raise DimensionMismatchError(f"gamma has shape {g.shape}, expected ({n_dims},)")
    if not np.all(g > 0):
        raise InvalidParameterError("gamma must be positive in every dimension")
    return g


@dataclass(frozen=True, eq=False)
class IntervalPattern:
    lower: np.ndarray
    upper: np.ndarray
    label: int = UNLABELED

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        up = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.ndim != 1 or lo.shape != up.shape or lo.size == 0:
            raise DimensionMismatchError("lower and upper must be equal-length non-empty vectors")
        if np.any(lo > up):
            raise InvalidParameterError("lower bound exceeds upper bound")
        if np.any(lo < 0) or np.any(up > 1):
            raise InvalidParameterError("pattern coordinates must lie in [0, 1]")
        if int(self.label) < 0:
            raise InvalidParameterError("labels must be non-negative")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "label", int(self.label))

    @classmethod
    def point(cls, x: Sequence[float], label: int = UNLABELED) -> "IntervalPattern":
        return cls(np.asarray(x, dtype=float), np.asarray(x, dtype=float), label)

    @property
    def n_dims(self) -> int:
        return self.lower.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalPattern):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )


@dataclass(eq=False)
class Hyperbox:
    min_point: np.ndarray
    max_point: np.ndarray
    label: int = UNLABELED

    def __post_init__(self) -> None:
        self.min_point = np.atleast_1d(np.asarray(self.min_point, dtype=float)).copy()
        self.max_point = np.atleast_1d(np.asarray(self.max_point, dtype=float)).copy()
        if self.min_point.shape != self.max_point.shape or self.min_point.ndim != 1:
            raise DimensionMismatchError("min and max points must be equal-length vectors")
        self.label = int(self.label)

    @classmethod
    def empty(cls, n_dims: int, label: int = UNLABELED) -> "Hyperbox":
        """A fresh box in the sentinel state V = 1, W = 0."""
        return cls(np.ones(n_dims), np.zeros(n_dims), label)

    @classmethod
    def from_pattern(cls, pattern: IntervalPattern) -> "Hyperbox":
        return cls(pattern.lower, pattern.upper, pattern.label)

    @property
    def n_dims(self) -> int:
        return self.min_point.size

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.min_point > self.max_point))

    def span(self) -> np.ndarray:
        return self.max_point - self.min_point

    def contains(self, pattern: IntervalPattern) -> bool:
        return bool(np.all(self.min_point <= pattern.lower) and np.all(pattern.upper <= self.max_point))

    def copy(self) -> "Hyperbox":
        return Hyperbox(self.min_point, self.max_point, self.label)

    def key(self) -> tuple:
        return (tuple(self.min_point.tolist()), tuple(self.max_point.tolist()), self.label)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hyperbox):
            return NotImplemented
        return self.key() == other.key()

    def __repr__(self) -> str:
        return f"Hyperbox(V={self.min_point.tolist()}, W={self.max_point.tolist()}, label={self.label})"


class IntervalData:
    """A batch of interval patterns held as ``(N, n)`` bound matrices."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray | None = None, labels: Iterable[int] | None = None):
        lo = np.atleast_2d(np.asarray(lower, dtype=float))
        up = lo if upper is None else np.atleast_2d(np.asarray(upper, dtype=float))
        if lo.shape != up.shape:
            raise DimensionMismatchError(f"lower {lo.shape} and upper {up.shape} differ in shape")
        if labels is None:
            lab = np.zeros(lo.shape[0], dtype=np.int64)
        else:
            lab = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels, dtype=np.int64)
        if lab.shape != (lo.shape[0],):
            raise DimensionMismatchError("one label per pattern is required")
        if np.any(lab < 0):
            raise InvalidParameterError("labels must be non-negative")
        if np.any(lo > up):
            raise InvalidParameterError("lower bound exceeds upper bound")
        self.lower = lo
        self.upper = up
        self.labels = lab

    @classmethod
    def from_patterns(cls, patterns: Sequence[IntervalPattern]) -> "IntervalData":
        if len(patterns) == 0:
            raise GfmmError("no patterns given")
        dims = {p.n_dims for p in patterns}
        if len(dims) != 1:
            raise DimensionMismatchError("patterns have differing dimensionality")
        return cls(
            np.vstack([p.lower for p in patterns]),
            np.vstack([p.upper for p in patterns]),
            [p.label for p in patterns],
        )

    @property
    def n_dims(self) -> int:
        return self.lower.shape[1]

    def __len__(self) -> int:
        return self.lower.shape[0]

    def __getitem__(self, i: int) -> IntervalPattern:
        return IntervalPattern(self.lower[i], self.upper[i], int(self.labels[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def subset(self, index) -> "IntervalData":
        index = np.asarray(index)
        return IntervalData(self.lower[index], self.upper[index], self.labels[index])

    def with_labels(self, labels) -> "IntervalData":
        return IntervalData(self.lower, self.upper, labels)


def as_interval_data(data: Any) -> IntervalData:
    """Coerce a pattern list, an ``(X, y)`` pair or a dataset into ``IntervalData``."""
    if isinstance(data, IntervalData):
        return data
    if hasattr(data, "patterns") and callable(data.patterns):
        return data.patterns()
    if isinstance(data, tuple) and len(data) == 2:
        X, y = data
        return IntervalData(X, X, y)
    if isinstance(data, tuple) and len(data) == 3:
        return IntervalData(*data)
    if isinstance(data, Sequence) and all(isinstance(p, IntervalPattern) for p in data):
        return IntervalData.from_patterns(data)
    raise TypeError(f"cannot interpret {type(data).__name__} as interval data")


def boxes_overlap(v1, w1, v2, w2) -> np.ndarray:
    """True where two boxes share interior in every dimension (broadcast over leading axes).

    Per dimension the intervals must cross (v1 < w2 and v2 < w1), so boxes that
    only touch do not overlap, while a point box strictly inside another does.
    """
    return np.all((v1 < w2) & (v2 < w1), axis=-1)


def membership(box: Hyperbox, pattern: IntervalPattern, gamma: float | Sequence[float] | np.ndarray = 1.0) -> float:
    """Degree to which ``pattern`` fits ``box``; 1 exactly when it lies inside."""
    if box.n_dims != pattern.n_dims:
        raise DimensionMismatchError(f"box has {box.n_dims} dims, pattern has {pattern.n_dims}")
    if box.is_empty:
        raise GfmmError("membership of an uninitialised (sentinel) hyperbox is undefined")
    g = as_gamma(gamma, box.n_dims)
    upper_side = 1.0 - _ramp(pattern.upper - box.max_point, g)
    lower_side = 1.0 - _ramp(box.min_point - pattern.lower, g)
    return float(np.min(np.minimum(upper_side, lower_side)))


def membership_matrix(V: np.ndarray, W: np.ndarray, lower: np.ndarray, upper: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Memberships of every pattern (rows) in every box (columns)."""
    n_pat, n = lower.shape
    m = V.shape[0]
    out = np.empty((n_pat, m))
    if m == 0 or n_pat == 0:
        return out
    step = max(1, _BLOCK // max(1, m * n))
    for s in range(0, n_pat, step):
        lo = lower[s:s + step, None, :]
        up = upper[s:s + step, None, :]
        a = 1.0 - _ramp(up - W[None], gamma)
        b = 1.0 - _ramp(V[None] - lo, gamma)
        out[s:s + step] = np.minimum(a, b).min(axis=2)
    return out


def membership_row(V: np.ndarray, W: np.ndarray, lower: np.ndarray, upper: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Memberships of one pattern in every box."""
    a = 1.0 - _ramp(upper - W, gamma)
    b = 1.0 - _ramp(V - lower, gamma)
    return np.minimum(a, b).min(axis=1)


@dataclass
class Prediction:
    """Batch prediction: winning class, class scores and the winning box per pattern."""

    labels: np.ndarray
    scores: np.ndarray
    classes: np.ndarray
    winners: np.ndarray

    def score_dict(self, i: int) -> dict[int, float]:
        return {int(c): float(s) for c, s in zip(self.classes, self.scores[i])}


class GfmmModel:
    """Ordered hyperbox collection with per-dimension sensitivity ``gamma``.

    ``info`` carries training diagnostics (passes, fallback boxes, merge logs)
    and never influences prediction.
    """

    def __init__(
        self,
        V: np.ndarray,
        W: np.ndarray,
        labels: Iterable[int],
        gamma: float | Sequence[float] | np.ndarray = 1.0,
        n_dims: int | None = None,
        class_names: list[str] | None = None,
        normalization: Any = None,
        info: dict | None = None,
    ):
        V = np.asarray(V, dtype=float)
        W = np.asarray(W, dtype=float)
        if n_dims is None:
            if V.ndim != 2:
                raise DimensionMismatchError("n_dims is required for an empty model")
            n_dims = V.shape[1]
        V = V.reshape(-1, n_dims)
        W = W.reshape(-1, n_dims)
        if V.shape != W.shape:
            raise DimensionMismatchError("V and W differ in shape")
        self.V = V
        self.W = W
        self.labels = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels, dtype=np.int64).reshape(-1)
        if self.labels.shape[0] != V.shape[0]:
            raise DimensionMismatchError("one label per box is required")
        self.n_dims = int(n_dims)
        self.gamma = as_gamma(gamma, self.n_dims)
        self.class_names = class_names
        self.normalization = normalization
        self.info = {} if info is None else info

    @classmethod
    def from_boxes(cls, boxes: Sequence[Hyperbox], gamma=1.0, n_dims: int | None = None, **kw) -> "GfmmModel":
        if boxes:
            n_dims = boxes[0].n_dims
            if any(b.n_dims != n_dims for b in boxes):
                raise DimensionMismatchError("boxes have differing dimensionality")
        elif n_dims is None:
            raise DimensionMismatchError("n_dims is required for an empty model")
        V = np.array([b.min_point for b in boxes]).reshape(-1, n_dims)
        W = np.array([b.max_point for b in boxes]).reshape(-1, n_dims)
        return cls(V, W, [b.label for b in boxes], gamma, n_dims=n_dims, **kw)

    def __len__(self) -> int:
        return self.V.shape[0]

    @property
    def n_boxes(self) -> int:
        return len(self)

    @property
    def boxes(self) -> list[Hyperbox]:
        return [Hyperbox(v, w, int(c)) for v, w, c in zip(self.V, self.W, self.labels)]

    @property
    def classes(self) -> set[int]:
        return {int(c) for c in self.labels if c != UNLABELED}

    def box_set(self) -> set[tuple]:
        return {b.key() for b in self.boxes}

    def subset(self, keep) -> "GfmmModel":
        keep = np.asarray(keep)
        return GfmmModel(
            self.V[keep], self.W[keep], self.labels[keep], self.gamma,
            n_dims=self.n_dims, class_names=self.class_names,
            normalization=self.normalization, info=dict(self.info),
        )

    def copy(self) -> "GfmmModel":
        return self.subset(np.arange(len(self)))

    def same_boxes(self, other: "GfmmModel") -> bool:
        return (
            self.n_dims == other.n_dims
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.gamma, other.gamma)
        )

    def predict_batch(self, data: Any) -> Prediction:
        """Class-node union over all labeled boxes for a batch of patterns."""
        data = as_interval_data(data)
        if data.n_dims != self.n_dims:
            raise DimensionMismatchError(f"model has {self.n_dims} dims, data has {data.n_dims}")
        labeled = np.flatnonzero(self.labels != UNLABELED)
        if labeled.size == 0:
            raise EmptyModelError("model has no labeled hyperboxes")
        V, W, lab = self.V[labeled], self.W[labeled], self.labels[labeled]
        mem = membership_matrix(V, W, data.lower, data.upper, self.gamma)
        classes = np.unique(lab)
        scores = np.empty((len(data), classes.size))
        for k, c in enumerate(classes):
            scores[:, k] = mem[:, lab == c].max(axis=1)
        best = np.argmax(scores, axis=1)  # first maximum = smallest class id
        pred = classes[best]
        # winner: first box (by index) of the predicted class attaining its score
        hit = (lab[None, :] == pred[:, None]) & (mem == scores[np.arange(len(data)), best][:, None])
        winners = labeled[np.argmax(hit, axis=1)]
        return Prediction(pred, scores, classes, winners)

    def predict(self, data: Any) -> np.ndarray:
        return self.predict_batch(data).labels

    def error_rate(self, data: Any) -> float:
        """Fraction of labeled patterns that are misclassified."""
        data = as_interval_data(data)
        mask = data.labels != UNLABELED
        if not np.any(mask):
            raise GfmmError("no labeled patterns to score")
        pred = self.predict(data.subset(np.flatnonzero(mask)))
        return float(np.mean(pred != data.labels[mask]))

    def __repr__(self) -> str:
        return f"GfmmModel(n_boxes={len(self)}, n_dims={self.n_dims}, classes={sorted(self.classes)})"


def predict(model: GfmmModel, pattern: IntervalPattern) -> tuple[int, dict[int, float]]:
    """Winning class and per-class scores for a single pattern."""
    res = model.predict_batch(IntervalData(pattern.lower[None], pattern.upper[None], [pattern.label]))
    return int(res.labels[0]), res.score_dict(0)
