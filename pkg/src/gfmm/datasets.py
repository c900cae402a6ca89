"""Seeded synthetic datasets shaped like the Circle and Spiral benchmarks."""
from __future__ import annotations

import numpy as np

from .io import Dataset


def _dataset(name: str, X: np.ndarray, y: np.ndarray) -> Dataset:
    X = np.clip(X, 0.0, 1.0)
    labels = y.astype(np.int64) + 1
    names = [str(c) for c in sorted(set(labels.tolist()))]
    return Dataset(name, X, X.copy(), labels, names)


def make_circle(n: int = 1000, seed: int = 0, n_features: int = 2) -> Dataset:
    """Uniform points in the unit cube; class 2 lies inside a centred ball of radius 0.3."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, n_features))
    r = np.linalg.norm(X - 0.5, axis=1)
    return _dataset("circle", X, (r < 0.3).astype(int))


def make_spiral(n: int = 1000, seed: int = 0, noise: float = 0.01, turns: float = 1.5) -> Dataset:
    """Two interleaved Archimedean spiral arms."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    t = np.sqrt(rng.random(n)) * turns * 2 * np.pi
    r = t / (turns * 2 * np.pi) * 0.45
    ang = t + np.pi * y
    X = np.column_stack([0.5 + r * np.cos(ang), 0.5 + r * np.sin(ang)])
    X += rng.normal(scale=noise, size=X.shape)
    return _dataset("spiral", X, y)


def make_blobs(n: int = 500, seed: int = 0, n_classes: int = 2, n_features: int = 2,
               spread: float = 0.08) -> Dataset:
    """Gaussian clusters with centres drawn in the inner part of the cube."""
    rng = np.random.default_rng(seed)
    centres = 0.2 + 0.6 * rng.random((n_classes, n_features))
    y = np.arange(n) % n_classes
    X = centres[y] + rng.normal(scale=spread, size=(n, n_features))
    return _dataset("blobs", X, y)
