"""Summary statistics and log-log scaling fits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from ..core import InputError

MIN_FIT_POINTS = 3


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def fit_loglog(series) -> ScalingFit:
    """OLS of ln(mean regret) on ln T."""
    pts = [(float(t), float(y)) for t, y in series]
    if len(pts) < MIN_FIT_POINTS:
        raise InputError(f"a scaling fit needs at least {MIN_FIT_POINTS} points, got {len(pts)}")
    bad = [(t, y) for t, y in pts if not (t > 0 and y > 0)]
    if bad:
        raise InputError(f"log-log fit needs positive T and means; offending points: {bad}")
    x = np.log([t for t, _ in pts])
    y = np.log([v for _, v in pts])
    res = stats.linregress(x, y)
    return ScalingFit(float(res.slope), float(res.intercept), float(res.stderr),
                      float(res.intercept_stderr), len(pts))


def fit_scaling_exponent(series) -> tuple[float, float]:
    fit = fit_loglog(series)
    return fit.slope, fit.slope_stderr


def mean_std(values) -> tuple[float, float]:
    """Correctly rounded mean and sample standard deviation (0 for one value)."""
    values = [float(v) for v in values]
    k = len(values)
    mean = math.fsum(values) / k
    if k < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (k - 1)
    return mean, math.sqrt(var)
