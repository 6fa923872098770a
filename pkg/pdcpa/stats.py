"""
Statistical tests used by the harness.

Chi-square tests merge consecutive bins until every bin expects at least
``min_expected`` hits, so sparse domains stay valid.
"""

from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from exceptions import InsufficientSamplesError, ValidationError

MIN_EXPECTED = 5.0


def merge_bins(
    observed: np.ndarray, expected: np.ndarray, min_expected: float = MIN_EXPECTED
) -> Tuple[np.ndarray, np.ndarray]:
    """Merge runs of consecutive bins until each expects ``min_expected``.
    A short tail is folded into the last full bin."""
    merged_obs, merged_exp = [], []
    acc_obs = acc_exp = 0.0
    for o, e in zip(observed, expected):
        acc_obs += o
        acc_exp += e
        if acc_exp >= min_expected:
            merged_obs.append(acc_obs)
            merged_exp.append(acc_exp)
            acc_obs = acc_exp = 0.0
    if acc_exp > 0 and merged_exp:
        merged_obs[-1] += acc_obs
        merged_exp[-1] += acc_exp
    return np.asarray(merged_obs, dtype=float), np.asarray(merged_exp, dtype=float)


def uniformity_test(
    samples: Sequence[int], domain_size: int, min_expected: float = MIN_EXPECTED
) -> Tuple[float, float]:
    """Chi-square goodness of fit of integer samples against uniform on [0, domain_size)"""
    if domain_size < 2:
        raise ValidationError("Uniformity needs a domain of at least two values")
    samples = np.asarray(samples, dtype=np.int64)
    required = int(np.ceil(2 * min_expected))
    if samples.size < required:
        raise InsufficientSamplesError(int(samples.size), required)
    if samples.min() < 0 or samples.max() >= domain_size:
        raise ValidationError("Samples fall outside the domain")
    counts = np.bincount(samples, minlength=domain_size).astype(float)
    expected = np.full(domain_size, samples.size / domain_size)
    observed, expected = merge_bins(counts, expected, min_expected)
    if observed.size < 2:
        raise InsufficientSamplesError(int(samples.size), int(2 * min_expected * 2))
    result = stats.chisquare(observed, expected)
    return float(result.statistic), float(result.pvalue)


def two_sample_test(
    first: Sequence[int],
    second: Sequence[int],
    domain_size: int,
    min_expected: float = MIN_EXPECTED,
) -> Tuple[float, float]:
    """Chi-square test that two integer samples share one distribution"""
    a = np.bincount(np.asarray(first, dtype=np.int64), minlength=domain_size)
    b = np.bincount(np.asarray(second, dtype=np.int64), minlength=domain_size)
    n_a, n_b = a.sum(), b.sum()
    if min(n_a, n_b) < min_expected:
        raise InsufficientSamplesError(int(min(n_a, n_b)), int(min_expected))
    # a column's smaller expected cell is total * min(n_a, n_b) / (n_a + n_b)
    scale = min(n_a, n_b) / (n_a + n_b)
    columns_a, columns_b = [], []
    acc_a = acc_b = 0
    for x, y in zip(a, b):
        acc_a += x
        acc_b += y
        if (acc_a + acc_b) * scale >= min_expected:
            columns_a.append(acc_a)
            columns_b.append(acc_b)
            acc_a = acc_b = 0
    if acc_a + acc_b and columns_a:
        columns_a[-1] += acc_a
        columns_b[-1] += acc_b
    if len(columns_a) < 2:
        raise InsufficientSamplesError(int(n_a + n_b), int(4 * min_expected / scale))
    chi2, p, _, _ = stats.chi2_contingency(np.array([columns_a, columns_b]))
    return float(chi2), float(p)


def binomial_ci(successes: int, trials: int, confidence: float = 0.99) -> Tuple[float, float]:
    """Exact (Clopper-Pearson) interval for a success proportion"""
    if trials < 1:
        raise InsufficientSamplesError(trials, 1)
    interval = stats.binomtest(successes, trials).proportion_ci(
        confidence_level=confidence, method="exact"
    )
    return float(interval.low), float(interval.high)


def binomial_p_value(successes: int, trials: int, p: float = 0.5) -> float:
    if trials < 1:
        raise InsufficientSamplesError(trials, 1)
    return float(stats.binomtest(successes, trials, p).pvalue)


def bonferroni(alpha: float, tests: int) -> float:
    return alpha / max(1, tests)
