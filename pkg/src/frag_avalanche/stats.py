"""Goodness-of-fit and interval tools for the statistical acceptance checks.

Supports are finite and discrete, so everything here is Pearson chi-square,
total variation and normal-approximation intervals.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.special import gammaincc

from .errors import DegenerateExpected, SupportMismatch, TooFewSamples, UnknownCoordinate

POOL_THRESHOLD = 5.0
MIN_TOTAL = 100
MIN_CI_SAMPLES = 30
Z_VALUES = {0.95: 1.96, 0.99: 2.576, 0.997: 3.0}


@dataclass(frozen=True)
class EmpiricalPmf:
    support: tuple
    counts: tuple[int, ...]
    total: int

    @property
    def frequencies(self) -> np.ndarray:
        c = np.asarray(self.counts, dtype=float)
        return c / self.total if self.total else c


@dataclass(frozen=True)
class GofReport:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    pooled_bins: int


def empirical_pmf(samples: Iterable[Hashable], support: Sequence[Hashable]) -> EmpiricalPmf:
    """Count samples per support point by identity (hash equality).

    Raises
    ------
    UnknownCoordinate
        If a sample is not in ``support``.
    """
    support = tuple(support)
    index = {s: k for k, s in enumerate(support)}
    tally = Counter(samples)
    counts = [0] * len(support)
    for s, n in tally.items():
        k = index.get(s)
        if k is None:
            raise UnknownCoordinate(f"sample {s!r} is not in the support")
        counts[k] += n
    return EmpiricalPmf(support, tuple(counts), sum(counts))


def chi2_sf(statistic: float, dof: int) -> float:
    """Upper tail of the chi-square law via the regularized incomplete gamma."""
    if dof <= 0:
        raise ValueError("degrees of freedom must be positive")
    return float(gammaincc(dof / 2.0, statistic / 2.0))


def _pool(expected: np.ndarray, *observed: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], int]:
    """Merge bins with expected count below the threshold, smallest first.

    Bins are visited in decreasing order of expected count; low bins are
    accumulated into a running pool which becomes a bin of its own once it
    reaches the threshold.  A leftover pool is folded into the last bin.
    """
    order = np.argsort(-expected, kind="stable")
    exp_bins: list[float] = []
    obs_bins: list[list[float]] = [[] for _ in observed]
    acc_e, acc_o = 0.0, [0.0] * len(observed)
    pooled = 0
    for k in order:
        if expected[k] >= POOL_THRESHOLD and acc_e == 0.0:
            exp_bins.append(float(expected[k]))
            for m, o in enumerate(observed):
                obs_bins[m].append(float(o[k]))
            continue
        pooled += 1
        acc_e += float(expected[k])
        for m, o in enumerate(observed):
            acc_o[m] += float(o[k])
        if acc_e >= POOL_THRESHOLD:
            exp_bins.append(acc_e)
            for m in range(len(observed)):
                obs_bins[m].append(acc_o[m])
            acc_e, acc_o = 0.0, [0.0] * len(observed)
    if acc_e > 0.0 or any(acc_o):
        if exp_bins:
            exp_bins[-1] += acc_e
            for m in range(len(observed)):
                obs_bins[m][-1] += acc_o[m]
        else:
            exp_bins.append(acc_e)
            for m in range(len(observed)):
                obs_bins[m].append(acc_o[m])
    return np.array(exp_bins), [np.array(b) for b in obs_bins], pooled


def chisq_gof(observed: EmpiricalPmf, expected: Sequence[float], min_total: int = MIN_TOTAL) -> GofReport:
    """Pearson one-sample test of ``observed`` against probabilities ``expected``.

    Bins whose expected count is below 5 are pooled first; the degrees of
    freedom are the number of bins after pooling minus one.  ``min_total``
    guards against running the asymptotic test on tiny samples.

    Raises
    ------
    DegenerateExpected
        If pooling leaves a single bin, which makes the test vacuous.
    """
    p = np.asarray(expected, dtype=float)
    if p.shape != (len(observed.counts),):
        raise SupportMismatch("expected vector does not match the observed support")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("expected probabilities must be nonnegative and sum to 1")
    n = observed.total
    if n < min_total:
        raise TooFewSamples(f"need at least {min_total} observations, got {n}")
    obs = np.asarray(observed.counts, dtype=float)
    exp_bins, (obs_bins,), pooled = _pool(p * n, obs)
    if len(exp_bins) < 2:
        raise DegenerateExpected("all expected mass falls in one pooled bin")
    stat = float(np.sum((obs_bins - exp_bins) ** 2 / exp_bins))
    dof = len(exp_bins) - 1
    return GofReport(stat, dof, chi2_sf(stat, dof), pooled)


def chisq_two_sample(a: EmpiricalPmf, b: EmpiricalPmf) -> GofReport:
    """Pearson homogeneity test of two samples over a common support.

    Expected counts come from the pooled frequencies with both sample sizes
    held fixed.  Pooling uses the smaller of the two expected counts per bin;
    the degrees of freedom are bins minus one.
    """
    if tuple(a.support) != tuple(b.support):
        raise SupportMismatch("samples are counted over different supports")
    if min(a.total, b.total) < MIN_TOTAL:
        raise TooFewSamples(f"need at least {MIN_TOTAL} observations per sample")
    oa = np.asarray(a.counts, dtype=float)
    ob = np.asarray(b.counts, dtype=float)
    na, nb = a.total, b.total
    pooled_p = (oa + ob) / (na + nb)
    weight = pooled_p * min(na, nb)
    exp_w, (ca, cb), pooled = _pool(weight, oa, ob)
    if len(exp_w) < 2:
        raise DegenerateExpected("all expected mass falls in one pooled bin")
    pp = (ca + cb) / (na + nb)
    ea, eb = pp * na, pp * nb
    stat = float(np.sum((ca - ea) ** 2 / ea) + np.sum((cb - eb) ** 2 / eb))
    dof = len(exp_w) - 1
    return GofReport(stat, dof, chi2_sf(stat, dof), pooled)


def tv_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """Total variation distance ``sum |p - q| / 2`` of two pmfs on one support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise SupportMismatch(f"supports differ in size ({p.size} vs {q.size})")
    for v in (p, q):
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("arguments must be probability vectors")
    return float(min(1.0, 0.5 * np.abs(p - q).sum()))


def mean_ci(samples: Sequence[float], confidence: float = 0.997) -> tuple[float, float]:
    """Sample mean and normal-approximation half width ``z s / sqrt(n)``."""
    z = Z_VALUES.get(confidence)
    if z is None:
        raise ValueError(f"confidence must be one of {sorted(Z_VALUES)}")
    x = np.asarray(samples, dtype=float)
    if x.size < MIN_CI_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_CI_SAMPLES} samples, got {x.size}")
    mean = float(x.mean())
    se = float(x.std(ddof=1)) / math.sqrt(x.size)
    return mean, z * se


def standard_error(samples: Sequence[float]) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise TooFewSamples("need at least two samples")
    return float(x.std(ddof=1)) / math.sqrt(x.size)
