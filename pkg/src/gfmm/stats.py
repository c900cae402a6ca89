"""Rank-based comparison of classifiers over several datasets.

Friedman's chi-square on average ranks, the Iman-Davenport F correction and
Holm's step-down procedure against a control classifier.  Distribution tails
are computed here from the regularized incomplete beta and gamma functions.
"""
from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import InvalidParameterError

_EPS = 1e-15
_TINY = 1e-300


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c, d = 1.0, 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _TINY else _TINY)
    h = d
    for m in range(1, 10_000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = 1.0 + aa / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise InvalidParameterError("beta parameters must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x)."""
    if a <= 0:
        raise InvalidParameterError("gamma shape must be positive")
    if x <= 0:
        return 1.0
    log_front = -x + a * math.log(x) - math.lgamma(a)
    if x < a + 1.0:
        term = total = 1.0 / a
        ap = a
        for _ in range(10_000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        return 1.0 - total * math.exp(log_front)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = 1.0 / (d if abs(d) > _TINY else _TINY)
        c = b + an / c
        c = c if abs(c) > _TINY else _TINY
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(log_front) * h


def f_dist_sf(x: float, d1: float, d2: float) -> float:
    """Survival function P(F > x) of the F(d1, d2) distribution."""
    if d1 < 1 or d2 < 1:
        raise InvalidParameterError("F degrees of freedom must be at least 1")
    if math.isinf(x):
        return 0.0
    if x <= 0:
        return 1.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


def chi2_sf(x: float, df: float) -> float:
    if df <= 0:
        raise InvalidParameterError("chi-square degrees of freedom must be positive")
    return gammaincc(df / 2.0, x / 2.0) if x > 0 else 1.0


def f_dist_ppf_upper(alpha: float, d1: float, d2: float) -> float:
    """Critical value c with P(F > c) = alpha (bisection on the survival function)."""
    lo, hi = 0.0, 1.0
    while f_dist_sf(hi, d1, d2) > alpha:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_dist_sf(mid, d1, d2) > alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _midranks(row: np.ndarray) -> np.ndarray:
    order = np.argsort(row, kind="stable")
    ranks = np.empty(row.size)
    i = 0
    while i < row.size:
        j = i
        while j + 1 < row.size and row[order[j + 1]] == row[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


@dataclass
class RankMatrix:
    values: np.ndarray
    names: list[str] = field(default_factory=list)
    datasets: list[str] = field(default_factory=list)

    @property
    def n_datasets(self) -> int:
        return self.values.shape[0]

    @property
    def n_classifiers(self) -> int:
        return self.values.shape[1]

    @property
    def average(self) -> np.ndarray:
        return self.values.mean(axis=0)


def rank_rows(errors, names: Sequence[str] | None = None, datasets: Sequence[str] | None = None) -> RankMatrix:
    """Rank classifiers within each dataset, 1 = lowest error, midranks for ties."""
    E = np.atleast_2d(np.asarray(errors, dtype=float))
    if np.isnan(E).any():
        raise InvalidParameterError("error matrix contains NaN")
    R = np.vstack([_midranks(row) for row in E])
    k = E.shape[1]
    return RankMatrix(R, list(names) if names else [f"C{j + 1}" for j in range(k)],
                      list(datasets) if datasets else [])


@dataclass
class TestResult:
    chi2_f: float
    f_f: float
    df_chi2: int
    df_f: tuple[int, int]
    p_chi2: float
    p_f: float
    critical_f: float
    alpha: float
    reject: bool
    average_ranks: list[float]
    n_datasets: int
    n_classifiers: int

    def as_dict(self) -> dict:
        return {
            "chi2_f": self.chi2_f, "f_f": self.f_f, "df_chi2": self.df_chi2,
            "df_f": list(self.df_f), "p_chi2": self.p_chi2, "p_f": self.p_f,
            "critical_f": self.critical_f, "alpha": self.alpha, "reject": self.reject,
            "average_ranks": self.average_ranks, "n_datasets": self.n_datasets,
            "n_classifiers": self.n_classifiers,
        }


def round_half_up(values, decimals: int) -> np.ndarray:
    """Round as in printed tables (1.65625 -> 1.6563), not half-to-even."""
    q = Decimal(1).scaleb(-decimals)
    return np.array([float(Decimal(repr(float(v))).quantize(q, rounding=ROUND_HALF_UP))
                     for v in np.ravel(values)])


def _average_ranks(ranks: RankMatrix | Sequence[float], n_datasets: int | None):
    if isinstance(ranks, RankMatrix):
        return ranks.average, ranks.n_datasets
    if n_datasets is None:
        raise InvalidParameterError("n_datasets is required with bare average ranks")
    return np.asarray(ranks, dtype=float), int(n_datasets)


def friedman(ranks: RankMatrix | Sequence[float], n_datasets: int | None = None,
             alpha: float = 0.05, decimals: int | None = None) -> TestResult:
    """Friedman chi-square and Iman-Davenport F on average ranks.

    ``ranks`` is a :class:`RankMatrix` or a vector of average ranks (then
    ``n_datasets`` is required).  ``decimals`` rounds the average ranks first,
    reproducing hand calculations done on rounded averages.
    """
    R, N = _average_ranks(ranks, n_datasets)
    if decimals is not None:
        R = round_half_up(R, decimals)
    k = R.size
    if N < 2 or k < 2:
        raise InvalidParameterError("need at least 2 datasets and 2 classifiers")
    chi2 = 12.0 * N / (k * (k + 1)) * (float(np.sum(R ** 2)) - k * (k + 1) ** 2 / 4.0)
    chi2 = max(chi2, 0.0)
    denom = N * (k - 1) - chi2
    f_f = (N - 1) * chi2 / denom if denom > 1e-12 else math.inf
    d1, d2 = k - 1, (k - 1) * (N - 1)
    p_f = f_dist_sf(f_f, d1, d2)
    crit = f_dist_ppf_upper(alpha, d1, d2)
    return TestResult(chi2, f_f, k - 1, (d1, d2), chi2_sf(chi2, k - 1), p_f, crit, alpha,
                      bool(f_f > crit), [float(r) for r in R], N, k)


@dataclass
class HolmRow:
    name: str
    index: int
    z: float
    p: float
    threshold: float
    reject: bool


def holm(ranks: RankMatrix | Sequence[float], control: int | str, alpha: float = 0.05,
         n_datasets: int | None = None, names: Sequence[str] | None = None,
         decimals: int | None = None) -> list[HolmRow]:
    """Holm step-down comparison of every classifier against ``control``.

    Rows are ordered by ascending two-sided p-value; row ``i`` (1-based) is
    compared with ``alpha / (k - i)`` and hypotheses are rejected up to the
    first one that is retained.
    """
    R, N = _average_ranks(ranks, n_datasets)
    if decimals is not None:
        R = round_half_up(R, decimals)
    k = R.size
    if k < 2:
        raise InvalidParameterError("need at least 2 classifiers")
    if names is None:
        names = ranks.names if isinstance(ranks, RankMatrix) else [f"C{j + 1}" for j in range(k)]
    names = list(names)
    if isinstance(control, str):
        if control not in names:
            raise InvalidParameterError(f"unknown control classifier {control!r}")
        control = names.index(control)
    if not 0 <= control < k:
        raise InvalidParameterError(f"control index {control} out of range")
    se = math.sqrt(k * (k + 1) / (6.0 * N))
    rows = []
    for j in range(k):
        if j == control:
            continue
        z = float((R[control] - R[j]) / se)
        p = math.erfc(abs(z) / math.sqrt(2.0))  # 2 * (1 - Phi(|z|))
        rows.append((p, j, z))
    rows.sort(key=lambda r: (r[0], r[1]))
    out = []
    rejecting = True
    for i, (p, j, z) in enumerate(rows, start=1):
        thr = alpha / (k - i)
        if p > thr:
            rejecting = False
        out.append(HolmRow(names[j], j, z, p, thr, rejecting))
    return out
