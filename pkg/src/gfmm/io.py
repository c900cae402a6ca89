"""Dataset loading, min-max normalisation and the plain-text model format."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import UNLABELED, GfmmError, GfmmModel, IntervalData

MODEL_FORMAT = "gfmm-model"
MODEL_VERSION = 1


class DataFormatError(GfmmError, ValueError):
    pass


class ModelFormatError(GfmmError, ValueError):
    pass


@dataclass(frozen=True)
class Normalization:
    """Per-feature min/max fitted on a training split."""

    minimum: np.ndarray
    maximum: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        span = self.maximum - self.minimum
        const = span <= 0
        out = (values - self.minimum) / np.where(const, 1.0, span)
        out[:, const] = 0.5
        return np.clip(out, 0.0, 1.0)

    def as_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}


@dataclass
class Dataset:
    """Raw features as interval bounds, labels in 1..K (0 = unlabeled)."""

    name: str
    lower: np.ndarray
    upper: np.ndarray
    labels: np.ndarray
    class_names: list[str] = field(default_factory=list)
    normalization: Normalization | None = None
    interval: bool = False

    def __len__(self) -> int:
        return self.lower.shape[0]

    @property
    def n_features(self) -> int:
        return self.lower.shape[1]

    def patterns(self) -> IntervalData:
        return IntervalData(self.lower, self.upper, self.labels)

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return replace(self, lower=self.lower[index], upper=self.upper[index], labels=self.labels[index])


def _parse_float(text: str, line: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"line {line}: column {col + 1} is not numeric: {text!r}") from None
    if not math.isfinite(value):
        raise DataFormatError(f"line {line}: column {col + 1} is not finite")
    return value


def _label_map(raw: Sequence[str]) -> list[str]:
    names = sorted({r for r in raw if r != ""})
    try:
        return sorted(names, key=float)
    except ValueError:
        return names


def load_csv(path: str | Path, label_column: int | None = -1, header: bool | None = None,
             interval: bool = False, delimiter: str = ",",
             class_names: Sequence[str] | None = None) -> Dataset:
    """Read a numeric CSV with one label column.

    Labels are mapped to 1..K in sorted order (numeric order when every label
    parses as a number); an empty label field means unlabeled (0).  With
    ``interval`` the 2n feature columns are read as ``l1..ln, u1..un``.
    ``header=None`` treats the first row as a header when its feature cells
    are not numeric.  ``label_column=None`` reads an unlabeled file.  Passing
    ``class_names`` reuses an existing label mapping.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh, delimiter=delimiter))
                if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    first_line, first = rows[0]
    if header is None:
        cells = [c for j, c in enumerate(first) if label_column is None or j != label_column % len(first)]
        try:
            [float(c) for c in cells]
            header = False
        except ValueError:
            header = True
    if header:
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    arity = len(rows[0][1])
    feats, raw_labels = [], []
    for line, row in rows:
        if len(row) != arity:
            raise DataFormatError(f"line {line}: expected {arity} fields, found {len(row)}")
        row = [c.strip() for c in row]
        if label_column is None:
            values, lab = row, ""
        else:
            j = label_column % arity
            values, lab = row[:j] + row[j + 1:], row[j]
        if any(v == "" for v in values):
            raise DataFormatError(f"line {line}: missing feature value")
        feats.append([_parse_float(v, line, c) for c, v in enumerate(values)])
        raw_labels.append(lab)
    X = np.asarray(feats, dtype=float)
    if interval:
        if X.shape[1] % 2:
            raise DataFormatError("interval mode needs an even number of feature columns")
        n = X.shape[1] // 2
        lower, upper = X[:, :n], X[:, n:]
        if np.any(lower > upper):
            bad = int(np.flatnonzero(np.any(lower > upper, axis=1))[0])
            raise DataFormatError(f"line {rows[bad][0]}: lower bound exceeds upper bound")
    else:
        lower, upper = X, X.copy()
    names = list(class_names) if class_names is not None else _label_map(raw_labels)
    lookup = {n: i + 1 for i, n in enumerate(names)}
    labels = []
    for (line, _), lab in zip(rows, raw_labels):
        if lab == "":
            labels.append(UNLABELED)
        elif lab in lookup:
            labels.append(lookup[lab])
        else:
            raise DataFormatError(f"line {line}: unknown class {lab!r}")
    return Dataset(path.stem, lower, upper, np.asarray(labels, dtype=np.int64), names, None, interval)


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Write features then the class name, one row per pattern."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        for i in range(len(dataset)):
            feats = list(dataset.lower[i]) + (list(dataset.upper[i]) if dataset.interval else [])
            lab = dataset.labels[i]
            w.writerow([repr(float(v)) for v in feats] + [dataset.class_names[lab - 1] if lab else ""])


def fit_normalization(dataset: Dataset, fit_index=None) -> Normalization:
    ds = dataset if fit_index is None else dataset.subset(fit_index)
    if len(ds) == 0:
        raise GfmmError("cannot fit normalisation on an empty split")
    return Normalization(ds.lower.min(axis=0), ds.upper.max(axis=0))


def normalize(dataset: Dataset, fit_index=None, norm: Normalization | None = None) -> Dataset:
    """Min-max scale to [0, 1] with statistics from the fit split; clip the rest."""
    norm = norm or fit_normalization(dataset, fit_index)
    return replace(dataset, lower=norm.apply(dataset.lower), upper=norm.apply(dataset.upper),
                   normalization=norm)


def save_model(model: GfmmModel, path: str | Path) -> None:
    lines = [
        f"{MODEL_FORMAT} {MODEL_VERSION}",
        f"n_dims {model.n_dims}",
        "gamma " + " ".join(repr(float(g)) for g in model.gamma),
        "classes " + json.dumps(model.class_names or []),
    ]
    norm = model.normalization
    if norm is not None:
        lines.append("norm_min " + " ".join(repr(float(v)) for v in norm.minimum))
        lines.append("norm_max " + " ".join(repr(float(v)) for v in norm.maximum))
    lines.append(f"boxes {len(model)}")
    for v, w, c in zip(model.V, model.W, model.labels):
        lines.append(" ".join([str(int(c))] + [repr(float(x)) for x in v] + [repr(float(x)) for x in w]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> GfmmModel:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MODEL_FORMAT:
        raise ModelFormatError(f"{path}: not a {MODEL_FORMAT} file")
    if head[1] != str(MODEL_VERSION):
        raise ModelFormatError(f"{path}: unsupported model version {head[1]} (expected {MODEL_VERSION})")
    fields: dict[str, str] = {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        fields[key] = rest
        i += 1
        if key == "boxes":
            break
    try:
        n = int(fields["n_dims"])
        gamma = [float(x) for x in fields["gamma"].split()]
        names = json.loads(fields["classes"]) or None
        count = int(fields["boxes"])
    except (KeyError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed header ({exc})") from None
    body = lines[i:i + count]
    if len(body) != count:
        raise ModelFormatError(f"{path}: truncated, expected {count} boxes, found {len(body)}")
    V = np.empty((count, n))
    W = np.empty((count, n))
    labels = np.empty(count, dtype=np.int64)
    for r, line in enumerate(body):
        parts = line.split()
        if len(parts) != 1 + 2 * n:
            raise ModelFormatError(f"{path}: box record {r + 1} has {len(parts)} fields")
        labels[r] = int(parts[0])
        V[r] = [float(x) for x in parts[1:1 + n]]
        W[r] = [float(x) for x in parts[1 + n:]]
    norm = None
    if "norm_min" in fields:
        norm = Normalization(np.array([float(x) for x in fields["norm_min"].split()]),
                             np.array([float(x) for x in fields["norm_max"].split()]))
    return GfmmModel(V, W, labels, gamma, n_dims=n, class_names=names, normalization=norm)
