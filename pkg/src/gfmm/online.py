"""Incremental (online) GFMM learning.

Each pattern either expands the best compatible hyperbox that stays within
the maximum size ``theta`` or seeds a new box.  A changed box is then tested
for overlap against boxes of other classes and any overlap is removed by
contracting both boxes along the dimension of smallest overlap.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

from .core import (
    THETA_TOL,
    UNLABELED,
    DimensionMismatchError,
    GfmmError,
    GfmmModel,
    Hyperbox,
    IntervalData,
    IntervalPattern,
    InvalidParameterError,
    as_gamma,
    boxes_overlap,
    as_interval_data,
    membership_row,
)


@dataclass(frozen=True)
class OnlineConfig:
    theta: float = 0.26
    adaptive: bool = False
    theta_min: float = 0.01
    phi: float = 0.9
    max_passes: int = 100

    def __post_init__(self) -> None:
        if not 0 < self.theta <= 1:
            raise InvalidParameterError(f"theta must lie in (0, 1], got {self.theta}")
        if not 0 <= self.phi <= 1:
            raise InvalidParameterError(f"phi must lie in [0, 1], got {self.phi}")
        if self.adaptive and not 0 < self.theta_min <= self.theta:
            raise InvalidParameterError("theta_min must lie in (0, theta]")
        if self.max_passes < 1:
            raise InvalidParameterError("max_passes must be positive")


class Overlap(NamedTuple):
    dim: int
    case: int
    width: float


def _check_dims(box: Hyperbox, n: int) -> None:
    if box.n_dims != n:
        raise DimensionMismatchError(f"expected {n} dimensions, got {box.n_dims}")


def can_expand(box: Hyperbox, pattern: IntervalPattern, theta: float) -> bool:
    _check_dims(box, pattern.n_dims)
    span = np.maximum(box.max_point, pattern.upper) - np.minimum(box.min_point, pattern.lower)
    return bool(np.all(span <= theta + THETA_TOL))


def expand(box: Hyperbox, pattern: IntervalPattern) -> Hyperbox:
    _check_dims(box, pattern.n_dims)
    return Hyperbox(
        np.minimum(box.min_point, pattern.lower),
        np.maximum(box.max_point, pattern.upper),
        box.label,
    )


def _dim_case(vi: float, wi: float, vk: float, wk: float) -> tuple[int, float]:
    """Overlap case and width in one dimension where the intervals overlap."""
    if vi <= vk and wi <= wk:
        return 1, wi - vk
    if vk <= vi and wk <= wi:
        return 2, wk - vi
    if vi < vk:  # k strictly inside i
        return 3, min(wk - vi, wi - vk)
    return 4, min(wi - vk, wk - vi)  # i strictly inside k


def _overlap_arrays(vi, wi, vk, wk) -> Overlap | None:
    if not boxes_overlap(vi, wi, vk, wk):
        return None
    best = None
    for j in range(vi.size):
        case, width = _dim_case(vi[j], wi[j], vk[j], wk[j])
        if best is None or width < best.width:
            best = Overlap(j, case, float(width))
    return best


def overlap_test(a: Hyperbox, b: Hyperbox) -> Overlap | None:
    """Dimension, case (1-4) and width of the smallest overlap, or None.

    Boxes that merely touch (zero overlap in some dimension) do not overlap.
    """
    _check_dims(b, a.n_dims)
    if a.is_empty or b.is_empty:
        return None
    return _overlap_arrays(a.min_point, a.max_point, b.min_point, b.max_point)


def _contract_inplace(vi, wi, vk, wk, j: int, case: int) -> None:
    if case == 1:
        mid = (vk[j] + wi[j]) / 2
        wi[j] = vk[j] = mid
    elif case == 2:
        mid = (vi[j] + wk[j]) / 2
        vi[j] = wk[j] = mid
    elif case == 3:
        if wk[j] - vi[j] <= wi[j] - vk[j]:
            vi[j] = wk[j]
        else:
            wi[j] = vk[j]
    elif case == 4:
        if wk[j] - vi[j] <= wi[j] - vk[j]:
            wk[j] = vi[j]
        else:
            vk[j] = wi[j]
    else:
        raise InvalidParameterError(f"unknown overlap case {case}")


def contract(a: Hyperbox, b: Hyperbox, dim: int, case: int) -> tuple[Hyperbox, Hyperbox]:
    """Shrink ``a`` and ``b`` in dimension ``dim`` so that they no longer overlap."""
    a2, b2 = a.copy(), b.copy()
    _contract_inplace(a2.min_point, a2.max_point, b2.min_point, b2.max_point, dim, case)
    return a2, b2


class _OnlineState:
    """Mutable box storage used during training (amortised growth)."""

    def __init__(self, n: int, gamma: np.ndarray, capacity: int = 64):
        self.n = n
        self.gamma = gamma
        self.V = np.empty((capacity, n))
        self.W = np.empty((capacity, n))
        self.labels = np.empty(capacity, dtype=np.int64)
        self.fallback = np.zeros(capacity, dtype=bool)
        self.m = 0
        self.contractions = 0

    @classmethod
    def from_model(cls, model: GfmmModel) -> "_OnlineState":
        st = cls(model.n_dims, model.gamma, max(64, 2 * len(model)))
        m = len(model)
        st.V[:m], st.W[:m], st.labels[:m] = model.V, model.W, model.labels
        fb = model.info.get("fallback_boxes", [])
        st.fallback[list(fb)] = True
        st.m = m
        return st

    def add(self, lo, up, label, fallback: bool) -> int:
        if self.m == self.V.shape[0]:
            cap = 2 * self.m
            for name in ("V", "W", "labels", "fallback"):
                arr = getattr(self, name)
                new = np.zeros((cap,) + arr.shape[1:], dtype=arr.dtype)
                new[: self.m] = arr[: self.m]
                setattr(self, name, new)
        i = self.m
        self.V[i], self.W[i], self.labels[i], self.fallback[i] = lo, up, label, fallback
        self.m += 1
        return i

    def present(self, lo: np.ndarray, up: np.ndarray, label: int, theta: float) -> None:
        m = self.m
        V, W, labels = self.V[:m], self.W[:m], self.labels[:m]
        target = -1
        if m:
            if label == UNLABELED:
                cand = np.arange(m)
            else:
                cand = np.flatnonzero((labels == label) | (labels == UNLABELED))
            if cand.size:
                mem = membership_row(V[cand], W[cand], lo, up, self.gamma)
                # descending membership, ties by box index (stable sort)
                order = cand[np.argsort(-mem, kind="stable")]
                span = np.maximum(W[order], up) - np.minimum(V[order], lo)
                ok = np.flatnonzero(np.all(span <= theta + THETA_TOL, axis=1))
                if ok.size:
                    target = int(order[ok[0]])
        if target < 0:
            wide = bool(np.any(up - lo > theta + THETA_TOL))
            target = self.add(lo, up, label, wide)
        else:
            old_v, old_w, old_label = V[target].copy(), W[target].copy(), labels[target]
            np.minimum(V[target], lo, out=V[target])
            np.maximum(W[target], up, out=W[target])
            if labels[target] == UNLABELED and label != UNLABELED:
                labels[target] = label
            if (np.array_equal(old_v, V[target]) and np.array_equal(old_w, W[target])
                    and old_label == labels[target]):
                return
        self._resolve_overlaps(target)

    def _resolve_overlaps(self, i: int) -> None:
        m = self.m
        V, W, labels = self.V[:m], self.W[:m], self.labels[:m]
        if labels[i] == UNLABELED:
            others = np.ones(m, dtype=bool)
        else:
            others = labels != labels[i]
        others[i] = False
        idx = np.flatnonzero(others)
        if idx.size == 0:
            return
        hit = boxes_overlap(V[idx], W[idx], V[i], W[i])
        for k in idx[hit]:
            ov = _overlap_arrays(V[i], W[i], V[k], W[k])
            if ov is not None:
                _contract_inplace(V[i], W[i], V[k], W[k], ov.dim, ov.case)
                self.contractions += 1

    def to_model(self, **info: Any) -> GfmmModel:
        m = self.m
        info["fallback_boxes"] = np.flatnonzero(self.fallback[:m]).tolist()
        info["contractions"] = self.contractions
        return GfmmModel(self.V[:m].copy(), self.W[:m].copy(), self.labels[:m].copy(),
                         self.gamma, n_dims=self.n, info=info)


def _validated(data: Any) -> IntervalData:
    data = as_interval_data(data)
    if len(data) == 0:
        raise GfmmError("training data is empty")
    if np.any(data.lower < 0) or np.any(data.upper > 1):
        raise InvalidParameterError("training patterns must be normalised to [0, 1]")
    return data


def _run_pass(state: _OnlineState, data: IntervalData, order, theta: float) -> None:
    for t in order:
        state.present(data.lower[t], data.upper[t], int(data.labels[t]), theta)


def train_online(data: Any, config: OnlineConfig = OnlineConfig(), gamma=1.0,
                 model: GfmmModel | None = None) -> GfmmModel:
    """One presentation of every pattern with a fixed maximum box size.

    Passing ``model`` continues training on a copy of an existing model.
    """
    data = _validated(data)
    if model is not None:
        if model.n_dims != data.n_dims:
            raise DimensionMismatchError("model and data dimensionality differ")
        state = _OnlineState.from_model(model)
    else:
        state = _OnlineState(data.n_dims, as_gamma(gamma, data.n_dims))
    _run_pass(state, data, range(len(data)), config.theta)
    return state.to_model(algorithm="online", theta=config.theta, passes=1)


def train_online_adaptive(data: Any, config: OnlineConfig, gamma=1.0) -> GfmmModel:
    """Online learning with a geometrically shrinking maximum box size.

    Pass 1 presents all patterns at ``theta``; afterwards ``theta`` is scaled
    by ``phi`` and only the currently misclassified patterns are re-presented
    to the existing model.  Stops on zero training error, when ``theta``
    drops below ``theta_min`` or after ``max_passes`` passes.
    """
    data = _validated(data)
    state = _OnlineState(data.n_dims, as_gamma(gamma, data.n_dims))
    labeled = np.flatnonzero(data.labels != UNLABELED)
    theta = config.theta
    thetas = []
    order = np.arange(len(data))
    status = "converged"
    passes = 0
    while True:
        _run_pass(state, data, order, theta)
        thetas.append(theta)
        passes += 1
        model = state.to_model()
        if labeled.size == 0:
            break
        pred = model.predict(data.subset(labeled))
        order = labeled[pred != data.labels[labeled]]
        if order.size == 0:
            break
        theta = config.phi * theta
        if theta < config.theta_min:
            status = "theta_min"
            break
        if passes >= config.max_passes:
            status = "max_passes"
            warnings.warn(f"adaptive training stopped after {passes} passes with "
                          f"{order.size} misclassified patterns", RuntimeWarning, stacklevel=2)
            break
    return state.to_model(algorithm="online-adaptive", theta=thetas[-1], thetas=thetas,
                          passes=passes, status=status)


def max_adaptive_passes(theta: float, phi: float, theta_min: float) -> int:
    """Upper bound on the number of adaptive passes for ``phi < 1``."""
    return math.ceil(math.log(theta_min / theta) / math.log(phi))
