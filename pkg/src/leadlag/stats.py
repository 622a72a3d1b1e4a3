"""Self-contained statistical kernel.

Student-t CDF through the regularized incomplete beta function, one-sample
and paired two-sided t-tests, and Spearman rank correlation with average
ranks for ties. No external stats libraries; everything here is exercised
against independent numeric oracles in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "DegenerateSampleError",
    "UndefinedCorrelationError",
    "TestResult",
    "SpearmanResult",
    "t_cdf",
    "one_sample_ttest",
    "paired_ttest",
    "spearman",
]


class DegenerateSampleError(ValueError):
    """Sample (or difference) variance is zero, so no t statistic exists."""


class UndefinedCorrelationError(ValueError):
    """A correlation was requested for a constant input vector."""


@dataclass(frozen=True)
class TestResult:
    """Outcome of a t-test."""

    statistic: float
    degrees_of_freedom: int
    p_value: float

    def reject_at(self, alpha: float) -> bool:
        return self.p_value < alpha


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    n: int


_CF_MAX_ITER = 400
_CF_EPS = 3e-16
_CF_TINY = 1e-300


def _ln_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction failed to converge")


def _reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = a * math.log(x) + b * math.log1p(-x) - _ln_beta(a, b)
    front = math.exp(ln_front)
    # The continued fraction converges fast only on one side of the mean;
    # use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) on the other.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: int) -> float:
    """Cumulative probability of the Student-t distribution at x.

    df must be a positive integer. Accuracy is driven by the continued
    fraction tolerance, well inside 1e-8 over the tested grid.
    """
    if df < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")
    x = float(x)
    if x == 0.0:
        return 0.5
    tail = 0.5 * _reg_inc_beta(0.5 * df, 0.5, df / (df + x * x))
    return 1.0 - tail if x > 0.0 else tail


def one_sample_ttest(samples: Sequence[float], null_mean: float = 0.0) -> TestResult:
    """Two-sided one-sample t-test of the mean against null_mean.

    Raises DegenerateSampleError when the sample variance is zero: the
    caller decides what a flat sample means (graph assembly treats it as
    no relationship).
    """
    xs = [float(v) for v in samples]
    n = len(xs)
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    mean = math.fsum(xs) / n
    ss = math.fsum((v - mean) ** 2 for v in xs)
    if ss <= 0.0:
        raise DegenerateSampleError("zero sample variance")
    var = ss / (n - 1)
    statistic = (mean - float(null_mean)) / math.sqrt(var / n)
    df = n - 1
    p_value = 2.0 * t_cdf(-abs(statistic), df)
    return TestResult(statistic=statistic, degrees_of_freedom=df, p_value=p_value)


def paired_ttest(xs: Sequence[float], ys: Sequence[float]) -> TestResult:
    """Two-sided paired t-test: one-sample test on the pairwise differences."""
    if len(xs) != len(ys):
        raise ValueError(f"paired lengths differ: {len(xs)} vs {len(ys)}")
    diffs = [float(a) - float(b) for a, b in zip(xs, ys)]
    return one_sample_ttest(diffs, null_mean=0.0)


def _average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the average of their positions."""
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> SpearmanResult:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    if len(xs) != len(ys):
        raise ValueError(f"lengths differ: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise ValueError(f"need at least 2 pairs, got {n}")
    if min(xs) == max(xs) or min(ys) == max(ys):
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    rx = _average_ranks([float(v) for v in xs])
    ry = _average_ranks([float(v) for v in ys])
    mx = math.fsum(rx) / n
    my = math.fsum(ry) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = math.fsum((a - mx) ** 2 for a in rx)
    vy = math.fsum((b - my) ** 2 for b in ry)
    if vx <= 0.0 or vy <= 0.0:
        # All-tied ranks despite unequal raw values cannot happen, but a
        # guard beats a ZeroDivisionError.
        raise UndefinedCorrelationError("rank variance is zero")
    rho = cov / math.sqrt(vx * vy)
    rho = max(-1.0, min(1.0, rho))
    return SpearmanResult(rho=rho, n=n)
