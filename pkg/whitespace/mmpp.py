"""
MMPP(2) Traffic Model
Fits a two-state Markov-modulated Poisson process to (M1, C, H) through a
second-order hyperexponential (or Coxian) phase fit, and generates synthetic
arrival traces from it.

All rates are per millisecond.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from .exceptions import NumericalFailure, UnsupportedRegime
from .rng import STAGE_DIRECT, make_rng
from .stats import FitBranch, TrafficStats, classify_branch
from .trace_io import SYNTHETIC_CHANNEL, IatSeries, PacketTrace

logger = logging.getLogger(__name__)

# Relative size under which a denominator counts as zero
ZERO_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PhaseParams:
    """Two-phase fit (p, mu1, mu2) of the IAT distribution."""
    p: float
    mu1_per_ms: float
    mu2_per_ms: float
    branch: FitBranch

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not (self.mu1_per_ms > 0 and self.mu2_per_ms > 0):
            raise ValueError("phase rates must be positive")

    @property
    def mean_ms(self) -> float:
        """Mean of the mixture: p / mu1 + (1 - p) / mu2."""
        return self.p / self.mu1_per_ms + (1.0 - self.p) / self.mu2_per_ms

    def to_dict(self) -> Dict:
        return {'p': self.p, 'mu1': self.mu1_per_ms, 'mu2': self.mu2_per_ms, 'branch': self.branch.value}


@dataclass(frozen=True)
class Mmpp2Params:
    """Rates of an MMPP(2): Poisson rate lambda_i in state i, leaving rate r_i out of state i."""
    lambda1_per_ms: float
    lambda2_per_ms: float
    r1_per_ms: float
    r2_per_ms: float
    beta: Optional[float] = None
    xi: Optional[float] = None
    branch: Optional[FitBranch] = None

    def __post_init__(self):
        for name in ('lambda1_per_ms', 'lambda2_per_ms', 'r1_per_ms', 'r2_per_ms'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @property
    def pi(self) -> np.ndarray:
        """Steady-state vector (r2, r1) / (r1 + r2)."""
        total = self.r1_per_ms + self.r2_per_ms
        return np.array([self.r2_per_ms / total, self.r1_per_ms / total])

    @property
    def rates(self) -> np.ndarray:
        return np.array([self.lambda1_per_ms, self.lambda2_per_ms])

    @property
    def switch_rates(self) -> np.ndarray:
        return np.array([self.r1_per_ms, self.r2_per_ms])

    def to_dict(self) -> Dict:
        return {
            'lambda1': self.lambda1_per_ms,
            'lambda2': self.lambda2_per_ms,
            'r1': self.r1_per_ms,
            'r2': self.r2_per_ms,
            'pi': self.pi.tolist(),
            'branch': self.branch.value if self.branch else None,
            'beta': self.beta,
            'xi': self.xi,
            'y_lb_ms': y_lower_bound(self),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Mmpp2Params':
        branch = data.get('branch')
        return cls(
            lambda1_per_ms=float(data['lambda1']),
            lambda2_per_ms=float(data['lambda2']),
            r1_per_ms=float(data['r1']),
            r2_per_ms=float(data['r2']),
            beta=data.get('beta'),
            xi=data.get('xi'),
            branch=FitBranch(branch) if branch else None,
        )


def hyperexponential_phase(m1_ms: float, c: float) -> PhaseParams:
    """Balanced-means H2 fit; matches M1 and C exactly."""
    p = 0.5 * (1.0 + math.sqrt((c * c - 1.0) / (c * c + 1.0)))
    return PhaseParams(p, 2.0 * p / m1_ms, 2.0 * (1.0 - p) / m1_ms, FitBranch.HYPEREXPONENTIAL)


def coxian_phase(m1_ms: float, c: float) -> PhaseParams:
    """Second-order Coxian fit for 1/sqrt(2) <= C <= 1."""
    p = 1.0 / (2.0 * c * c)
    return PhaseParams(p, (2.0 / m1_ms) * (p / (1.0 + p)), 2.0 / m1_ms, FitBranch.COXIAN)


def fit_phase(stats: TrafficStats) -> PhaseParams:
    branch = classify_branch(stats)
    if branch is FitBranch.HYPEREXPONENTIAL:
        return hyperexponential_phase(stats.m1_ms, stats.c)
    if branch is FitBranch.COXIAN:
        return coxian_phase(stats.m1_ms, stats.c)
    raise UnsupportedRegime(
        f"classify_branch returned Unsupported for C={stats.c:.4f}, H={stats.h:.4f} "
        f"(need 0.5 < H < 1 and C > 1, or 1/sqrt(2) <= C <= 1)",
        module='mmpp', operation='fit_phase',
    )


def _is_zero(value: float, scale: float) -> bool:
    return abs(value) <= ZERO_TOLERANCE * scale


def fit_mmpp2(phase: PhaseParams, h: float) -> Mmpp2Params:
    """
    Maps the phase triple and the Hurst parameter onto (lambda1, lambda2, r1, r2).

    The Coxian triple is used unchanged. Fails instead of clamping when the
    statistics leave the approximation's valid region.
    """
    if not 0 < h < 1:
        raise NumericalFailure(f"H must lie in (0, 1), got {h}", module='mmpp', operation='fit_mmpp2')

    p, mu1, mu2 = phase.p, phase.mu1_per_ms, phase.mu2_per_ms
    beta = 2.0 - 2.0 * h
    a = p * (1.0 - beta) * (mu1 - mu2) + beta * mu1 + mu2
    xi = a * a - 4.0 * beta * mu1 * mu2
    if xi < 0:
        raise NumericalFailure(f"discriminant xi={xi:.3e} is negative", module='mmpp', operation='fit_mmpp2')

    scale = max(mu1, mu2)
    lambda1 = 0.5 * (a + math.sqrt(xi))

    denominator = lambda1 * mu1 - lambda1 * p * (mu1 - mu2) - mu1 * mu2
    if _is_zero(denominator, scale * scale):
        raise NumericalFailure("lambda2 denominator is zero", module='mmpp', operation='fit_mmpp2')
    lambda2 = mu1 * mu2 * (lambda1 - p * (mu1 - mu2) - mu2) / denominator

    if _is_zero(lambda2 - lambda1, scale):
        raise NumericalFailure("lambda1 == lambda2, r1 denominator is zero", module='mmpp', operation='fit_mmpp2')
    r1 = (mu1 - lambda1) * (mu2 - lambda1) / (lambda2 - lambda1)

    if _is_zero(mu1 - lambda1, scale):
        raise NumericalFailure("mu1 == lambda1, r2 denominator is zero", module='mmpp', operation='fit_mmpp2')
    r2 = (lambda2 - mu1) * (lambda1 + r1 - mu1) / (mu1 - lambda1)

    rates = {'lambda1': lambda1, 'lambda2': lambda2, 'r1': r1, 'r2': r2}
    bad = {name: value for name, value in rates.items() if not (math.isfinite(value) and value > 0)}
    if bad:
        detail = ', '.join(f"{name}={value:.3e}" for name, value in bad.items())
        raise NumericalFailure(f"non-positive or non-finite rate(s): {detail}", module='mmpp', operation='fit_mmpp2')

    logger.debug(f"MMPP(2) fit ({phase.branch.value}): lambda=({lambda1:.4g}, {lambda2:.4g}) /ms, "
                 f"r=({r1:.4g}, {r2:.4g}) /ms")
    return Mmpp2Params(lambda1, lambda2, r1, r2, beta=beta, xi=xi, branch=phase.branch)


def fit_from_stats(stats: TrafficStats) -> Mmpp2Params:
    return fit_mmpp2(fit_phase(stats), stats.h)


def y_lower_bound(params: Mmpp2Params) -> float:
    """Expected time to visit both states once: 1/r1 + 1/r2 (ms)."""
    return 1.0 / params.r1_per_ms + 1.0 / params.r2_per_ms


def generator_matrix(params: Mmpp2Params) -> np.ndarray:
    r1, r2 = params.r1_per_ms, params.r2_per_ms
    return np.array([[-r1, r1], [r2, -r2]])


def mean_arrival_rate(params: Mmpp2Params) -> float:
    return float(params.pi @ params.rates)


def _simulate_arrivals_ms(params: Mmpp2Params, duration_ms: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted arrival times (ms) in [0, duration_ms) of one MMPP(2) path."""
    switch = params.switch_rates
    state = 0 if rng.random() < params.pi[0] else 1

    # Sojourns alternate between the two states
    starts, lengths, states = [], [], []
    t = 0.0
    half_cycle = 0.5 * y_lower_bound(params)
    while t < duration_ms:
        batch = int(min(max(64, 1.2 * (duration_ms - t) / half_cycle + 1), 1_000_000))
        batch_states = (state + np.arange(batch)) % 2
        sojourns = rng.exponential(1.0 / switch[batch_states])
        batch_starts = t + np.concatenate([[0.0], np.cumsum(sojourns)[:-1]])
        keep = batch_starts < duration_ms
        starts.append(batch_starts[keep])
        lengths.append(sojourns[keep])
        states.append(batch_states[keep])
        t = batch_starts[-1] + sojourns[-1]
        state = (batch_states[-1] + 1) % 2

    starts = np.concatenate(starts)
    states = np.concatenate(states)
    lengths = np.minimum(np.concatenate(lengths), duration_ms - starts)

    # Poisson arrivals within each sojourn are uniform order statistics
    counts = rng.poisson(params.rates[states] * lengths)
    arrivals = np.repeat(starts, counts) + rng.random(int(counts.sum())) * np.repeat(lengths, counts)
    arrivals.sort()
    return arrivals


def generate_trace(params: Mmpp2Params, duration_ms: float, seed: int, stage: int = STAGE_DIRECT) -> PacketTrace:
    """Simulates the modulating chain and its arrivals; deterministic per (seed, stage)."""
    if duration_ms <= 0:
        raise ValueError(f"duration_ms must be positive, got {duration_ms}")

    arrivals = _simulate_arrivals_ms(params, duration_ms, make_rng(seed, stage))
    timestamps_us = np.floor(arrivals * 1000.0).astype(np.int64)
    return PacketTrace.from_arrays(timestamps_us, np.full(timestamps_us.shape, SYNTHETIC_CHANNEL),
                                   source_channels={SYNTHETIC_CHANNEL}, assume_sorted=True)


def generate_segments(params: Mmpp2Params, segment_ms: float, min_iats: int, seed: int,
                      stage: int = STAGE_DIRECT, max_segments: int = 200_000) -> IatSeries:
    """
    IATs of independent y-length segments, each started from pi, concatenated
    until at least min_iats IATs are collected.
    """
    if segment_ms <= 0:
        raise ValueError(f"segment_ms must be positive, got {segment_ms}")

    rng = make_rng(seed, stage)
    collected, total = [], 0
    for _ in range(max_segments):
        timestamps_us = np.floor(_simulate_arrivals_ms(params, segment_ms, rng) * 1000.0).astype(np.int64)
        gaps = np.diff(timestamps_us)
        gaps = gaps[gaps > 0]
        collected.append(gaps)
        total += gaps.size
        if total >= min_iats:
            return IatSeries(np.concatenate(collected))
    raise NumericalFailure(f"{max_segments} segments of {segment_ms:.1f} ms yielded only {total} IATs",
                           module='mmpp', operation='generate_segments')
