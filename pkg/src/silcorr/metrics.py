"""Correlation metrics for aligned signal pairs.

Given a reference series M (track data) and a comparison series G
(simulation), this module computes the sample Pearson correlation
coefficient

    r = sum((m_i - mean_m) * (g_i - mean_g))
        / (sqrt(sum((m_i - mean_m)^2)) * sqrt(sum((g_i - mean_g)^2))),

its two-sided significance against the null hypothesis r = 0 (via the
Student-t statistic t = r * sqrt((n-2)/(1-r^2)) with n-2 degrees of
freedom, evaluated with a continued-fraction regularized incomplete beta
function), and the relative root-mean-square error

    RRMSE = RMSE / RMS = sqrt(sum((m_i - g_i)^2) / n) / sqrt(sum(m_i^2) / n).

Qualitative rating bands: correlation is high for r in [0.7, 1.0],
moderate in [0.5, 0.7), low in [0.3, 0.5), weak in [0.1, 0.3); accuracy is
excellent below 10% RRMSE, good in [10%, 20%), fair in [20%, 30%) and poor
from 30% up.  Band boundaries are assigned to the better band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import DegenerateSampleSize, ZeroRMS, ZeroVariance

SIGNIFICANCE_LEVEL = 0.05


class CorrelationBand(str, Enum):
    HIGH = "High"
    MODERATE = "Moderate"
    LOW = "Low"
    WEAK = "Weak"
    NOT_POSITIVE = "NotPositive"


class AccuracyBand(str, Enum):
    EXCELLENT = "Excellent"
    GOOD = "Good"
    FAIR = "Fair"
    POOR = "Poor"


@dataclass(frozen=True)
class MetricInput:
    """Paired series for one signal: m from the track, g from the simulation."""

    m: tuple[float, ...]
    g: tuple[float, ...]
    signal: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "m", tuple(float(v) for v in self.m))
        object.__setattr__(self, "g", tuple(float(v) for v in self.g))
        if len(self.m) != len(self.g):
            raise DegenerateSampleSize(f"|M|={len(self.m)} != |G|={len(self.g)}")
        if len(self.m) < 3:
            raise DegenerateSampleSize(f"need n >= 3, got {len(self.m)}")
        if not all(map(math.isfinite, self.m)) or not all(map(math.isfinite, self.g)):
            raise ValueError("series must be finite")

    @property
    def n(self) -> int:
        return len(self.m)


@dataclass(frozen=True)
class MetricResult:
    signal: str
    n: int
    r: float
    p_value: float
    rrmse: float
    r_band: CorrelationBand
    rrmse_band: AccuracyBand
    significant: bool


def pearson_r(m: Sequence[float], g: Sequence[float]) -> float:
    """Sample correlation coefficient, two-pass with compensated sums."""
    n = len(m)
    if n != len(g) or n < 2:
        raise DegenerateSampleSize(f"need matched series with n >= 2, got {n}/{len(g)}")
    mean_m = math.fsum(m) / n
    mean_g = math.fsum(g) / n
    cov = math.fsum((mi - mean_m) * (gi - mean_g) for mi, gi in zip(m, g))
    var_m = math.fsum((mi - mean_m) ** 2 for mi in m)
    var_g = math.fsum((gi - mean_g) ** 2 for gi in g)
    if var_m == 0.0 or var_g == 0.0:
        raise ZeroVariance("constant series: correlation coefficient undefined")
    return cov / (math.sqrt(var_m) * math.sqrt(var_g))


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    max_iter = 300
    eps = 3e-16
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by continued fraction, absolute error well below 1e-10."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def p_value(r: float, n: int) -> float:
    """Two-sided significance of r against the null hypothesis r = 0."""
    if n < 3:
        raise DegenerateSampleSize(f"need n >= 3, got {n}")
    if r == 0.0:
        return 1.0
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t_sq = r * r * df / (1.0 - r * r)
    # Two-sided tail of the t distribution as an incomplete beta.
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t_sq))


def rrmse(m: Sequence[float], g: Sequence[float]) -> float:
    """Root-mean-square error of g against m, normalized by the RMS of m."""
    n = len(m)
    if n != len(g) or n < 1:
        raise DegenerateSampleSize(f"need matched non-empty series, got {n}/{len(g)}")
    sq_err = math.fsum((mi - gi) ** 2 for mi, gi in zip(m, g))
    sq_ref = math.fsum(mi * mi for mi in m)
    if sq_ref == 0.0:
        raise ZeroRMS("reference series is identically zero")
    return math.sqrt(sq_err / n) / math.sqrt(sq_ref / n)


def rate(r: float, rrmse_value: float) -> tuple[CorrelationBand, AccuracyBand]:
    """Qualitative bands for a (r, RRMSE) pair; boundaries favor the better band."""
    if r >= 0.7:
        r_band = CorrelationBand.HIGH
    elif r >= 0.5:
        r_band = CorrelationBand.MODERATE
    elif r >= 0.3:
        r_band = CorrelationBand.LOW
    elif r >= 0.1:
        r_band = CorrelationBand.WEAK
    else:
        r_band = CorrelationBand.NOT_POSITIVE

    if rrmse_value < 0.10:
        a_band = AccuracyBand.EXCELLENT
    elif rrmse_value < 0.20:
        a_band = AccuracyBand.GOOD
    elif rrmse_value < 0.30:
        a_band = AccuracyBand.FAIR
    else:
        a_band = AccuracyBand.POOR
    return r_band, a_band


def evaluate(inp: MetricInput) -> MetricResult:
    """All metrics for one paired series."""
    r = pearson_r(inp.m, inp.g)
    p = p_value(r, inp.n)
    rr = rrmse(inp.m, inp.g)
    r_band, a_band = rate(r, rr)
    return MetricResult(
        signal=inp.signal,
        n=inp.n,
        r=r,
        p_value=p,
        rrmse=rr,
        r_band=r_band,
        rrmse_band=a_band,
        significant=p < SIGNIFICANCE_LEVEL,
    )
