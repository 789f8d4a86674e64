"""
Baseline models
Pareto IAT traffic model (fixed scale, maximum-likelihood shape) and the
0.5-persistent random access predictor.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .exceptions import DegenerateFit, InsufficientTail
from .hmm import PredictedState
from .rng import STAGE_DIRECT, make_rng
from .trace_io import SYNTHETIC_CHANNEL, IatSeries, PacketTrace

logger = logging.getLogger(__name__)

# Maximum WSN packet duration
DEFAULT_SCALE_MS = 4.256
MIN_TAIL_SAMPLES = 100
RANDOM_ACCESS_PERSISTENCE = 0.5


@dataclass(frozen=True)
class ParetoParams:
    scale_ms: float
    shape: float
    n_used: int = 0
    n_excluded: int = 0

    def __post_init__(self):
        if not self.scale_ms > 0:
            raise ValueError(f"scale_ms must be positive, got {self.scale_ms}")
        if not (math.isfinite(self.shape) and self.shape > 0):
            raise ValueError(f"shape must be positive and finite, got {self.shape}")

    @property
    def mean_ms(self) -> float:
        """Infinite when shape <= 1."""
        if self.shape <= 1:
            return math.inf
        return self.scale_ms * self.shape / (self.shape - 1.0)

    def to_dict(self) -> Dict:
        return {'scale_ms': self.scale_ms, 'shape': self.shape, 'n_used': self.n_used, 'n_excluded': self.n_excluded}

    @classmethod
    def from_dict(cls, data: Dict) -> 'ParetoParams':
        return cls(float(data['scale_ms']), float(data['shape']),
                   int(data.get('n_used', 0)), int(data.get('n_excluded', 0)))


def fit_pareto(iats: IatSeries, scale_ms: float = DEFAULT_SCALE_MS) -> ParetoParams:
    """Shape = n / sum(ln(x / scale)) over the IATs at or above the scale."""
    if not scale_ms > 0:
        raise ValueError(f"scale_ms must be positive, got {scale_ms}")

    values = iats.as_ms()
    tail = values[values >= scale_ms]
    excluded = int(values.size - tail.size)
    if tail.size < MIN_TAIL_SAMPLES:
        raise InsufficientTail(f"only {tail.size} IATs >= {scale_ms} ms, need {MIN_TAIL_SAMPLES}",
                               module='baselines', operation='fit_pareto')
    if excluded:
        logger.info(f"Excluded {excluded} IAT(s) below the Pareto scale {scale_ms} ms")

    log_sum = float(np.sum(np.log(tail / scale_ms)))
    if log_sum <= 0:
        raise DegenerateFit("all tail IATs equal the scale; shape diverges",
                            module='baselines', operation='fit_pareto')
    return ParetoParams(scale_ms, tail.size / log_sum, n_used=int(tail.size), n_excluded=excluded)


def pareto_iats(params: ParetoParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. Pareto samples (ms) by inverse CDF."""
    # 1 - U lies in (0, 1], avoiding a zero base
    u = 1.0 - rng.random(n)
    return params.scale_ms * u ** (-1.0 / params.shape)


def generate_pareto_trace(params: ParetoParams, duration_ms: float, seed: int,
                          stage: int = STAGE_DIRECT) -> PacketTrace:
    """Arrivals separated by i.i.d. Pareto IATs over [0, duration_ms)."""
    if duration_ms <= 0:
        raise ValueError(f"duration_ms must be positive, got {duration_ms}")

    rng = make_rng(seed, stage)
    chunk = max(1024, int(2 * duration_ms / params.scale_ms))
    arrivals, t = [], 0.0
    while t < duration_ms:
        times = t + np.cumsum(pareto_iats(params, chunk, rng))
        arrivals.append(times[times < duration_ms])
        t = times[-1]
    timestamps_us = np.floor(np.concatenate(arrivals) * 1000.0).astype(np.int64)
    return PacketTrace.from_arrays(timestamps_us, np.full(timestamps_us.shape, SYNTHETIC_CHANNEL),
                                   source_channels={SYNTHETIC_CHANNEL}, assume_sorted=True)


def generate_pareto_iats(params: ParetoParams, n: int, seed: int, stage: int = STAGE_DIRECT) -> IatSeries:
    """n Pareto IATs rounded to whole microseconds."""
    values_us = np.rint(pareto_iats(params, n, make_rng(seed, stage)) * 1000.0).astype(np.int64)
    return IatSeries(np.maximum(values_us, 1))


def random_access_predict(n_slots: int, seed: int, stage: int = STAGE_DIRECT,
                          slot_starts_us=None) -> List[PredictedState]:
    """Each slot independently Free with probability 0.5; p_free records the drawn decision."""
    if n_slots < 1:
        raise ValueError(f"n_slots must be at least 1, got {n_slots}")
    if slot_starts_us is None:
        slot_starts_us = [0] * n_slots

    attempts = make_rng(seed, stage).random(n_slots) < RANDOM_ACCESS_PERSISTENCE
    return [
        PredictedState.from_p_free(1.0 if attempt else 0.0, start)
        for attempt, start in zip(attempts.tolist(), slot_starts_us)
    ]
