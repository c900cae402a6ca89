"""Validation-set pruning of low-accuracy hyperboxes."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import UNLABELED, EmptyModelError, GfmmError, GfmmModel, as_interval_data


@dataclass(frozen=True)
class BoxStats:
    index: int
    wins: int
    correct: int

    @property
    def accuracy(self) -> float | None:
        return self.correct / self.wins if self.wins else None


def box_stats(model: GfmmModel, validation: Any) -> list[BoxStats]:
    """Win and correct-win counts per box over the labeled validation patterns."""
    val = as_interval_data(validation)
    val = val.subset(np.flatnonzero(val.labels != UNLABELED))
    res = model.predict_batch(val)
    m = len(model)
    wins = np.bincount(res.winners, minlength=m)
    correct = np.bincount(res.winners[res.labels == val.labels], minlength=m)
    return [BoxStats(i, int(wins[i]), int(correct[i])) for i in range(m)]


def _error(model: GfmmModel, val) -> float:
    try:
        return model.error_rate(val)
    except EmptyModelError:
        return np.inf


def prune(model: GfmmModel, validation: Any, min_accuracy: float = 0.5,
          until_stable: bool = True) -> GfmmModel:
    """Remove boxes whose validation accuracy is below ``min_accuracy``.

    Boxes that never won a validation pattern are either all kept or all
    removed, whichever gives the lower validation error (ties keep them).
    One round computes winners once against its input model.  With
    ``until_stable`` rounds repeat until the model stops changing, which makes
    pruning idempotent.  ``info["pruning"]`` records each round's decision.
    """
    val = as_interval_data(validation)
    if len(val) == 0:
        raise GfmmError("validation set is empty")
    if not np.any(val.labels != UNLABELED):
        raise GfmmError("validation set has no labeled patterns")
    if len(model) == 0:
        raise EmptyModelError("cannot prune an empty model")
    rounds = []
    current = model
    while True:
        pruned, record = _prune_round(current, val, min_accuracy)
        if record["status"] == "unchanged" and not rounds:
            warnings.warn("pruning would leave no labeled boxes; model returned unchanged",
                          RuntimeWarning, stacklevel=2)
        changed = len(pruned) != len(current)
        if changed or not rounds:
            rounds.append(record)
        current = pruned
        if not (until_stable and changed):
            break
    current.info["pruning"] = rounds
    return current


def _prune_round(model: GfmmModel, val, min_accuracy: float) -> tuple[GfmmModel, dict]:
    stats = box_stats(model, val)
    wins = np.array([s.wins for s in stats])
    correct = np.array([s.correct for s in stats])
    unlabeled = model.labels == UNLABELED
    low = (wins > 0) & (correct < min_accuracy * wins)
    never = (wins == 0) & ~unlabeled

    keep_all = model.subset(np.flatnonzero(~low))
    drop_all = model.subset(np.flatnonzero(~low & ~never))
    err_keep, err_drop = _error(keep_all, val), _error(drop_all, val)
    if err_drop < err_keep:
        chosen, decision, err = drop_all, "removed", err_drop
    else:
        chosen, decision, err = keep_all, "kept", err_keep
    if not np.isfinite(err):
        return model.copy(), {"status": "unchanged", "removed": 0}
    return chosen, {
        "status": "ok",
        "min_accuracy": min_accuracy,
        "low_accuracy_removed": int(low.sum()),
        "never_winners": int(never.sum()),
        "never_winner_decision": decision,
        "validation_error_keep": float(err_keep),
        "validation_error_drop": float(err_drop),
        "removed": int(len(model) - len(chosen)),
    }
