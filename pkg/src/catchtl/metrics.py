"""Trend and accuracy metrics for comparing model output against truth.

The Mann-Kendall statistic is the rank-based trend measure used throughout:
S is the sign sum over all ordered pairs, V its null variance with the
tie-group correction, and U = S / sqrt(V) the standardized statistic
(U = 0 by convention when every value ties and V = 0). Applying it to each
posterior draw of an abundance trajectory (composition sampling) yields a
posterior distribution of trend statistics.

Also here: median absolute deviation of posterior means from truth,
equal-tailed credible intervals via interpolated empirical quantiles, and
empirical interval coverage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AbundanceSeries",
    "CredibleInterval",
    "empirical_coverage",
    "interval",
    "mad_from_truth",
    "mann_kendall_u",
    "mk_posterior",
]


@dataclass(frozen=True)
class AbundanceSeries:
    """A per-year abundance trajectory: positive values on strictly increasing years.

    Construction sorts by year, so two series built from the same pairs in any
    order compare equal. Duplicate years are rejected.
    """

    years: tuple[int, ...]
    values: tuple[float, ...]

    def __init__(self, years, values):
        years = [int(y) for y in years]
        values = [float(v) for v in values]
        if len(years) != len(values):
            raise ValueError("years and values must have equal length")
        if len(set(years)) != len(years):
            raise ValueError("years must be distinct")
        if any(v <= 0.0 for v in values):
            raise ValueError("abundance values must be positive")
        order = np.argsort(years)
        object.__setattr__(self, "years", tuple(years[i] for i in order))
        object.__setattr__(self, "values", tuple(values[i] for i in order))

    def __len__(self) -> int:
        return len(self.years)


@dataclass(frozen=True)
class CredibleInterval:
    level: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ValueError("interval level must lie in (0, 1)")
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order")

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _series_values(series) -> np.ndarray:
    if isinstance(series, AbundanceSeries):
        return np.asarray(series.values, dtype=float)
    return np.asarray(series, dtype=float)


def _mk_s_and_var(values: np.ndarray) -> tuple[int, float]:
    n = values.size
    s = 0
    for i in range(n - 1):
        s += int(np.sum(np.sign(values[i + 1 :] - values[i])))
    _, counts = np.unique(values, return_counts=True)
    tie_term = int(np.sum(counts * (counts - 1) * (2 * counts + 5)))
    var_num = n * (n - 1) * (2 * n + 5) - tie_term
    return s, var_num / 18.0


def mann_kendall_u(series) -> float:
    """Standardized Mann-Kendall trend statistic U = S / sqrt(V).

    S sums the signs of all pairwise forward differences; V is the null
    variance with the tie correction
    V = [n(n-1)(2n+5) - sum_g t_g(t_g-1)(2t_g+5)] / 18 over tie groups g.
    Returns 0 when V = 0 (all values tied). Requires length >= 3.
    """
    values = _series_values(series)
    if values.ndim != 1 or values.size < 3:
        raise ValueError("Mann-Kendall statistic requires a series of length >= 3")
    s, var = _mk_s_and_var(values)
    if var == 0.0:
        return 0.0
    return s / np.sqrt(var)


def mk_posterior(draws) -> np.ndarray:
    """Mann-Kendall U for every posterior draw of a trajectory.

    ``draws`` is an (n_draws, n_years) array or a sequence of equal-length
    series; the result has one U per draw (composition sampling).
    """
    if isinstance(draws, np.ndarray) and draws.ndim == 2:
        mat = np.asarray(draws, dtype=float)
    else:
        rows = [_series_values(d) for d in draws]
        if not rows:
            raise ValueError("mk_posterior needs at least one draw")
        if len({r.size for r in rows}) != 1:
            raise ValueError("all posterior draws must have the same length")
        mat = np.vstack(rows)
    if mat.shape[0] < 1:
        raise ValueError("mk_posterior needs at least one draw")
    n = mat.shape[1]
    if n < 3:
        raise ValueError("Mann-Kendall statistic requires a series of length >= 3")

    iu, ju = np.triu_indices(n, k=1)
    s = np.sum(np.sign(mat[:, ju] - mat[:, iu]), axis=1)

    var0 = n * (n - 1) * (2 * n + 5) / 18.0
    var = np.full(mat.shape[0], var0)
    # tie correction only where a draw actually contains ties
    sorted_rows = np.sort(mat, axis=1)
    has_ties = np.any(np.diff(sorted_rows, axis=1) == 0.0, axis=1)
    for i in np.nonzero(has_ties)[0]:
        _, var[i] = _mk_s_and_var(mat[i])

    out = np.zeros(mat.shape[0])
    nz = var > 0.0
    out[nz] = s[nz] / np.sqrt(var[nz])
    return out


def mad_from_truth(posterior_means: AbundanceSeries, truth: AbundanceSeries) -> float:
    """Median over years of |posterior mean - truth|; the series must share years."""
    if posterior_means.years != truth.years:
        raise ValueError("posterior-mean and truth series cover different years")
    diffs = np.abs(np.asarray(posterior_means.values) - np.asarray(truth.values))
    return float(np.median(diffs))


def interval(draws, level: float) -> CredibleInterval:
    """Equal-tailed credible interval from interpolated empirical quantiles."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 1 or draws.size < 2:
        raise ValueError("interval requires at least two draws")
    if not 0.0 < level < 1.0:
        raise ValueError("interval level must lie in (0, 1)")
    tail = 0.5 * (1.0 - level)
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], method="linear")
    return CredibleInterval(level, float(lo), float(hi))


def empirical_coverage(intervals, truths) -> float:
    """Fraction of truths falling inside their paired interval."""
    intervals = list(intervals)
    truths = np.asarray(truths, dtype=float)
    if len(intervals) != truths.size:
        raise ValueError("need exactly one interval per truth value")
    if not intervals:
        raise ValueError("empirical_coverage needs at least one pair")
    hits = sum(ci.contains(t) for ci, t in zip(intervals, truths))
    return hits / len(intervals)
