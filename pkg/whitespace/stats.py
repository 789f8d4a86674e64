"""
Traffic Statistics
Mean, coefficient of variation and Hurst parameter of an IAT series, and the
regime classification that selects the MMPP(2) fitting branch.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sp_stats

from .exceptions import DegenerateSeries, TooFewSamples, WhitespaceError
from .rng import make_rng
from .trace_io import IatSeries

logger = logging.getLogger(__name__)

MIN_HURST_SAMPLES = 256
# Estimates from fewer samples than this are flagged low-confidence
RELIABLE_HURST_SAMPLES = 7000

PENG_MIN_BLOCK = 16
PENG_BLOCK_SIZES = 10
PERIODOGRAM_CUTOFF = 0.2
PERIODOGRAM_BOXES = 60

H_MIN = 0.01
H_MAX = 0.99

COXIAN_MIN_C = 1.0 / math.sqrt(2.0)


class FitBranch(str, Enum):
    HYPEREXPONENTIAL = 'Hyperexponential'
    COXIAN = 'Coxian'
    UNSUPPORTED = 'Unsupported'


@dataclass(frozen=True)
class TrafficStats:
    """(M1, C, H) summary of an IAT series. Times in milliseconds."""
    m1_ms: float
    sigma_ms: float
    c: float
    h: float
    n_samples: int
    low_confidence: bool = False

    def __post_init__(self):
        if not self.m1_ms > 0:
            raise ValueError(f"m1_ms must be positive, got {self.m1_ms}")
        if self.sigma_ms < 0:
            raise ValueError(f"sigma_ms must be non-negative, got {self.sigma_ms}")
        if not 0 < self.h < 1:
            raise ValueError(f"h must lie in (0, 1), got {self.h}")

    @property
    def self_similar(self) -> bool:
        return is_self_similar(self.h)

    def to_dict(self) -> Dict:
        return {
            'm1_ms': self.m1_ms,
            'sigma_ms': self.sigma_ms,
            'c': self.c,
            'h': self.h,
            'n_samples': self.n_samples,
            'low_confidence': self.low_confidence,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'TrafficStats':
        return cls(
            m1_ms=float(data['m1_ms']),
            sigma_ms=float(data['sigma_ms']),
            c=float(data['c']),
            h=float(data['h']),
            n_samples=int(data['n_samples']),
            low_confidence=bool(data.get('low_confidence', False)),
        )


def basic_stats(iats: IatSeries) -> Tuple[float, float, float]:
    """Returns (m1_ms, sigma_ms, c) using the population standard deviation."""
    if iats.count < 2:
        raise TooFewSamples(f"need at least 2 IATs, got {iats.count}", module='stats', operation='basic_stats')

    values = iats.as_ms()
    m1 = float(np.mean(values))
    sigma = float(np.std(values))
    return m1, sigma, sigma / m1


def _prepare_series(series: Sequence[float], operation: str) -> np.ndarray:
    values = np.asarray(series, dtype=float)
    if values.size < MIN_HURST_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_HURST_SAMPLES} samples, got {values.size}",
                            module='stats', operation=operation)
    if np.ptp(values) == 0:
        raise DegenerateSeries("series has zero variance", module='stats', operation=operation)
    return values


def _clamp(h: float) -> float:
    return float(np.clip(h, H_MIN, H_MAX))


def _log_log_slope(x: np.ndarray, y: np.ndarray, operation: str) -> float:
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        raise DegenerateSeries("not enough positive points for the log-log fit",
                               module='stats', operation=operation)
    return float(sp_stats.linregress(np.log(x[keep]), np.log(y[keep])).slope)


def hurst_peng(series: Sequence[float]) -> float:
    """
    Variance-of-residuals estimator.

    The integrated (mean-removed) series is cut into blocks of size m; a line is
    fitted in each block and the residual variance averaged over blocks. That
    average scales as m^(2H).
    """
    values = _prepare_series(series, 'hurst_peng')
    n = values.size
    profile = np.cumsum(values - values.mean())

    sizes = np.unique(np.floor(np.logspace(np.log10(PENG_MIN_BLOCK), np.log10(n / 4), PENG_BLOCK_SIZES)).astype(int))
    residual_variance = []
    for m in sizes:
        k = n // m
        blocks = profile[:k * m].reshape(k, m)
        t = np.arange(m, dtype=float)
        slope, intercept = np.polyfit(t, blocks.T, 1)
        trend = np.outer(slope, t) + intercept[:, None]
        residual_variance.append(np.mean((blocks - trend) ** 2))

    slope = _log_log_slope(sizes.astype(float), np.asarray(residual_variance), 'hurst_peng')
    return _clamp(slope / 2.0)


def _low_frequency_periodogram(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = values.size
    freqs = np.fft.rfftfreq(n)[1:]
    power = np.abs(np.fft.rfft(values - values.mean()))[1:] ** 2 / n
    count = max(int(PERIODOGRAM_CUTOFF * freqs.size), 2)
    return freqs[:count], power[:count]


def hurst_periodogram(series: Sequence[float]) -> float:
    """Slope of log periodogram vs log frequency over the lowest 20% of frequencies: H = (1 - slope) / 2."""
    values = _prepare_series(series, 'hurst_periodogram')
    freqs, power = _low_frequency_periodogram(values)
    slope = _log_log_slope(freqs, power, 'hurst_periodogram')
    return _clamp((1.0 - slope) / 2.0)


def hurst_boxed_periodogram(series: Sequence[float]) -> float:
    """Periodogram estimator on box means over logarithmically spaced frequency boxes."""
    values = _prepare_series(series, 'hurst_boxed_periodogram')
    freqs, power = _low_frequency_periodogram(values)

    edges = np.logspace(np.log10(freqs[0]), np.log10(freqs[-1]), PERIODOGRAM_BOXES + 1)
    edges[-1] = np.nextafter(edges[-1], np.inf)
    box_index = np.searchsorted(edges, freqs, side='right') - 1

    box_freqs, box_power = [], []
    for box in np.unique(box_index):
        members = box_index == box
        # Box position is the geometric centre of its ordinates
        box_freqs.append(np.exp(np.mean(np.log(freqs[members]))))
        box_power.append(np.mean(power[members]))

    slope = _log_log_slope(np.asarray(box_freqs), np.asarray(box_power), 'hurst_boxed_periodogram')
    return _clamp((1.0 - slope) / 2.0)


HURST_ESTIMATORS: Dict[str, Callable[[Sequence[float]], float]] = {
    'peng': hurst_peng,
    'periodogram': hurst_periodogram,
    'boxed_periodogram': hurst_boxed_periodogram,
}


def hurst_median(series: Sequence[float],
                 estimators: Optional[Dict[str, Callable[[Sequence[float]], float]]] = None) -> float:
    """Median of the Peng, periodogram and boxed-periodogram estimates."""
    estimators = estimators or HURST_ESTIMATORS
    estimates = []
    for name, estimator in estimators.items():
        try:
            estimates.append(estimator(series))
        except WhitespaceError as e:
            raise type(e)(f"{name} estimator failed: {e.message}", module='stats', operation='hurst_median') from e
    return float(np.median(estimates))


def is_self_similar(h: float) -> bool:
    return 0.5 < h < 1.0


def compute_traffic_stats(iats: IatSeries) -> TrafficStats:
    """Traffic characteristics extraction: basic moments plus median-of-three Hurst estimate."""
    m1, sigma, c = basic_stats(iats)
    h = hurst_median(iats.as_ms())

    low_confidence = iats.count < RELIABLE_HURST_SAMPLES
    if low_confidence:
        logger.warning(f"Hurst estimate from {iats.count} samples (< {RELIABLE_HURST_SAMPLES}) is low-confidence")
    if not is_self_similar(h):
        logger.info(f"H={h:.3f} is outside (0.5, 1): trace is not self-similar")

    return TrafficStats(m1_ms=m1, sigma_ms=sigma, c=c, h=h, n_samples=iats.count, low_confidence=low_confidence)


def classify_branch(stats: TrafficStats) -> FitBranch:
    """Hyperexponential iff 0.5 < H < 1 and C > 1; Coxian iff 1/sqrt(2) <= C <= 1."""
    if is_self_similar(stats.h) and stats.c > 1.0:
        return FitBranch.HYPEREXPONENTIAL
    if COXIAN_MIN_C <= stats.c <= 1.0:
        return FitBranch.COXIAN
    return FitBranch.UNSUPPORTED


def generate_fgn(n: int, h: float, seed: int) -> np.ndarray:
    """
    Fractional Gaussian noise of length n with Hurst parameter h.

    Exact spectral synthesis by circulant embedding of the fGn autocovariance.
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if not 0 < h < 1:
        raise ValueError(f"h must lie in (0, 1), got {h}")

    lags = np.arange(n + 1, dtype=float)
    autocov = 0.5 * (np.abs(lags + 1) ** (2 * h) - 2 * lags ** (2 * h) + np.abs(lags - 1) ** (2 * h))
    row = np.concatenate([autocov, autocov[-2:0:-1]])
    eigenvalues = np.fft.fft(row).real
    # Tiny negative values are round-off
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    m = row.size
    rng = make_rng(seed)
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    sample = np.fft.fft(np.sqrt(eigenvalues / m) * noise)
    return sample.real[:n]
