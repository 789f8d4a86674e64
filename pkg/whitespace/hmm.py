"""
White-space HMM
Two hidden regimes (Free, Busy) observed through the mean IAT of a y-length
window sampled every T seconds, thresholded into IAT_small / IAT_large.
Trained with scaled Baum-Welch; predicts the next slot by forward filtering
followed by one transition step.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import EmptySpan, TooFewSamples
from .mmpp import Mmpp2Params
from .rng import STAGE_DIRECT, make_rng
from .trace_io import PacketTrace, trace_span

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_COUNT = 20
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 500
EMISSION_FLOOR = 1e-6
MIN_TRAINING_OBSERVATIONS = 10
STOCHASTIC_TOLERANCE = 1e-9

# Starting emissions when the supplied rows are identical; Free leans to IAT_large
SYMMETRY_BREAK_EMISSION = np.array([[0.4, 0.6], [0.6, 0.4]])


class Regime(IntEnum):
    FREE = 0
    BUSY = 1

    @property
    def label(self) -> str:
        return 'Free' if self is Regime.FREE else 'Busy'


class ObservationLabel(IntEnum):
    IAT_SMALL = 0
    IAT_LARGE = 1

    @property
    def label(self) -> str:
        return 'IAT_small' if self is ObservationLabel.IAT_SMALL else 'IAT_large'


class ThresholdKind(str, Enum):
    FIXED = 'FixedTrainingAverage'
    MOVING = 'MovingAverage'


@dataclass(frozen=True)
class ThresholdPolicy:
    """
    How a window's mean IAT is compared against a threshold.

    FIXED with value_ms=None uses the average over all window means of the
    labelled span. MOVING averages the last window_count non-empty window
    means before the current one; seed_ms is used until a non-empty window
    has been seen.
    """
    kind: ThresholdKind = ThresholdKind.FIXED
    value_ms: Optional[float] = None
    window_count: int = DEFAULT_WINDOW_COUNT
    seed_ms: Optional[float] = None

    def __post_init__(self):
        if self.window_count < 1:
            raise ValueError(f"window_count must be at least 1, got {self.window_count}")
        if self.value_ms is not None and not self.value_ms > 0:
            raise ValueError(f"value_ms must be positive, got {self.value_ms}")

    @classmethod
    def training_average(cls) -> 'ThresholdPolicy':
        return cls(ThresholdKind.FIXED)

    @classmethod
    def fixed(cls, value_ms: float) -> 'ThresholdPolicy':
        return cls(ThresholdKind.FIXED, value_ms=value_ms)

    @classmethod
    def moving(cls, window_count: int = DEFAULT_WINDOW_COUNT, seed_ms: Optional[float] = None) -> 'ThresholdPolicy':
        return cls(ThresholdKind.MOVING, window_count=window_count, seed_ms=seed_ms)


@dataclass(frozen=True)
class Observation:
    label: ObservationLabel
    window_mean_iat_ms: Optional[float]
    window_start_us: int
    threshold_ms: Optional[float] = None


@dataclass(frozen=True)
class PredictedState:
    state: Regime
    p_free: float
    slot_start_us: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_free <= 1.0:
            raise ValueError(f"p_free must lie in [0, 1], got {self.p_free}")
        if (self.state is Regime.FREE) != (self.p_free > 0.5):
            raise ValueError(f"state {self.state.label} inconsistent with p_free={self.p_free}")

    @classmethod
    def from_p_free(cls, p_free: float, slot_start_us: int = 0) -> 'PredictedState':
        p_free = float(min(max(p_free, 0.0), 1.0))
        # Ties go to Busy
        return cls(Regime.FREE if p_free > 0.5 else Regime.BUSY, p_free, int(slot_start_us))


def _check_stochastic(name: str, matrix: np.ndarray):
    if np.any(matrix < 0) or np.any(matrix > 1):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    if not np.allclose(matrix.sum(axis=-1), 1.0, atol=STOCHASTIC_TOLERANCE):
        raise ValueError(f"{name} rows must sum to 1")


@dataclass(frozen=True, eq=False)
class HmmModel:
    """States index (Free, Busy); emission columns index (IAT_small, IAT_large)."""
    initial: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    threshold_policy: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    threshold_value_ms: Optional[float] = None
    log_likelihoods: Tuple[float, ...] = ()
    converged: bool = False
    degenerate: bool = False

    def __post_init__(self):
        for name in ('initial', 'transition', 'emission'):
            array = np.array(getattr(self, name), dtype=float)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        if self.initial.shape != (2,) or self.transition.shape != (2, 2) or self.emission.shape != (2, 2):
            raise ValueError("HmmModel expects a 2-vector and two 2x2 matrices")
        _check_stochastic('initial', self.initial)
        _check_stochastic('transition', self.transition)
        _check_stochastic('emission', self.emission)

    @property
    def iterations(self) -> int:
        return len(self.log_likelihoods)

    def to_dict(self) -> Dict:
        data = {
            'initial': self.initial.tolist(),
            'A': self.transition.tolist(),
            'B': self.emission.tolist(),
            'threshold_policy': self.threshold_policy.kind.value,
            'log_likelihoods': list(self.log_likelihoods),
            'converged': self.converged,
            'degenerate': self.degenerate,
        }
        if self.threshold_policy.kind is ThresholdKind.FIXED:
            data['threshold_value_ms'] = self.threshold_value_ms
        else:
            data['window_count'] = self.threshold_policy.window_count
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'HmmModel':
        kind = ThresholdKind(data.get('threshold_policy', ThresholdKind.FIXED.value))
        value = data.get('threshold_value_ms')
        if kind is ThresholdKind.FIXED:
            policy = ThresholdPolicy(kind, value_ms=value)
        else:
            policy = ThresholdPolicy(kind, window_count=int(data.get('window_count', DEFAULT_WINDOW_COUNT)))
        return cls(
            initial=np.asarray(data['initial'], dtype=float),
            transition=np.asarray(data['A'], dtype=float),
            emission=np.asarray(data['B'], dtype=float),
            threshold_policy=policy,
            threshold_value_ms=value,
            log_likelihoods=tuple(data.get('log_likelihoods', ())),
            converged=bool(data.get('converged', False)),
            degenerate=bool(data.get('degenerate', False)),
        )


# --- Observations ---

def slot_starts(span_us: Tuple[int, int], y_ms: float, t_s: float) -> np.ndarray:
    """Slot start times: span_start + i*T for every slot whose y-window fits in the span."""
    if not y_ms > 0:
        raise ValueError(f"y_ms must be positive, got {y_ms}")
    if not t_s > 0:
        raise ValueError(f"t_s must be positive, got {t_s}")

    start, end = span_us
    y_us = y_ms * 1000.0
    t_us = t_s * 1e6
    length = end - start
    if length < y_us:
        raise EmptySpan(f"span of {length / 1000.0:.1f} ms is shorter than one {y_ms:.1f} ms window",
                        module='hmm', operation='extract_observations')
    n_slots = int(math.floor((length - y_us) / t_us)) + 1
    return start + np.rint(np.arange(n_slots) * t_us).astype(np.int64)


def window_means(trace: PacketTrace, y_ms: float, t_s: float,
                 span_us: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns (slot starts, mean IAT in ms per window). Windows with fewer than
    two distinct arrivals have mean NaN (empty).
    """
    if span_us is None:
        if trace.is_empty:
            raise EmptySpan("empty trace and no explicit span", module='hmm', operation='extract_observations')
        span_us = trace_span(trace)

    starts = slot_starts(span_us, y_ms, t_s)
    arrivals = np.unique(trace.timestamps_us)
    lo = np.searchsorted(arrivals, starts, side='left')
    hi = np.searchsorted(arrivals, starts + int(round(y_ms * 1000.0)), side='left')
    counts = hi - lo

    means = np.full(starts.shape, np.nan)
    busy = counts >= 2
    if arrivals.size:
        first = arrivals[lo[busy]]
        last = arrivals[hi[busy] - 1]
        means[busy] = (last - first) / (counts[busy] - 1) / 1000.0
    return starts, means


def resolve_thresholds(means: np.ndarray, policy: ThresholdPolicy) -> np.ndarray:
    """Threshold in force at each window (NaN where none is defined yet)."""
    n = means.size
    if policy.kind is ThresholdKind.FIXED:
        if policy.value_ms is not None:
            return np.full(n, policy.value_ms)
        value = float(np.nanmean(means)) if np.any(~np.isnan(means)) else np.nan
        return np.full(n, value)

    present = ~np.isnan(means)
    # seen[i] = number of non-empty windows among 0..i-1
    seen = np.cumsum(present) - present
    sums = np.concatenate([[0.0], np.cumsum(means[present])])
    lower = np.maximum(seen - policy.window_count, 0)
    with np.errstate(invalid='ignore', divide='ignore'):
        thresholds = (sums[seen] - sums[lower]) / (seen - lower)
    seed = np.nan if policy.seed_ms is None else policy.seed_ms
    return np.where(seen > 0, thresholds, seed)


def label_windows(means: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """IAT_small iff mean < threshold; empty windows and undefined thresholds give IAT_large."""
    with np.errstate(invalid='ignore'):
        small = means < thresholds
    return np.where(small, ObservationLabel.IAT_SMALL, ObservationLabel.IAT_LARGE).astype(int)


def extract_observations(trace: PacketTrace, y_ms: float, t_s: float,
                         threshold_policy: Optional[ThresholdPolicy] = None,
                         span_us: Optional[Tuple[int, int]] = None) -> List[Observation]:
    """One observation per T-second slot from the y-length window at the slot start."""
    policy = threshold_policy or ThresholdPolicy.training_average()
    starts, means = window_means(trace, y_ms, t_s, span_us)
    thresholds = resolve_thresholds(means, policy)
    labels = label_windows(means, thresholds)
    return [
        Observation(
            label=ObservationLabel(int(label)),
            window_mean_iat_ms=None if math.isnan(mean) else float(mean),
            window_start_us=int(start),
            threshold_ms=None if math.isnan(threshold) else float(threshold),
        )
        for start, mean, threshold, label in zip(starts.tolist(), means.tolist(), thresholds.tolist(),
                                                  labels.tolist())
    ]


def observation_indices(obs: Sequence) -> np.ndarray:
    """Accepts Observation objects or raw labels."""
    return np.array([int(o.label) if isinstance(o, Observation) else int(o) for o in obs], dtype=int)


def training_threshold(observations: Sequence[Observation]) -> Optional[float]:
    """Average over the non-empty window means."""
    values = [o.window_mean_iat_ms for o in observations if o.window_mean_iat_ms is not None]
    return float(np.mean(values)) if values else None


# --- Model ---

def init_model(mmpp: Mmpp2Params, threshold_policy: Optional[ThresholdPolicy] = None,
               threshold_value_ms: Optional[float] = None) -> HmmModel:
    """Initial vector from the MMPP steady state, higher-rate state mapped to Busy; uniform A and B."""
    pi = mmpp.pi
    if mmpp.lambda1_per_ms > mmpp.lambda2_per_ms:
        initial = np.array([pi[1], pi[0]])
    elif mmpp.lambda1_per_ms < mmpp.lambda2_per_ms:
        initial = np.array([pi[0], pi[1]])
    else:
        logger.warning("lambda1 == lambda2: mapping MMPP states to (Free, Busy) by index")
        initial = np.array([pi[0], pi[1]])

    uniform = np.full((2, 2), 0.5)
    return HmmModel(initial, uniform, uniform, threshold_policy or ThresholdPolicy.training_average(),
                    threshold_value_ms)


def _forward(initial: np.ndarray, transition: np.ndarray, emission: np.ndarray,
             obs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Scaled forward pass; returns (alpha normalised per step, scale factors)."""
    likelihood = emission[:, obs].T
    n = obs.size
    alpha = np.empty((n, 2))
    scale = np.empty(n)
    (a00, a01), (a10, a11) = transition.tolist()

    f0, f1 = (initial * likelihood[0]).tolist()
    rows = likelihood.tolist()
    p0 = p1 = 0.0
    for t in range(n):
        if t:
            b0, b1 = rows[t]
            f0 = (p0 * a00 + p1 * a10) * b0
            f1 = (p0 * a01 + p1 * a11) * b1
        c = f0 + f1
        p0, p1 = f0 / c, f1 / c
        scale[t] = c
        alpha[t, 0] = p0
        alpha[t, 1] = p1
    return alpha, scale


def _backward(transition: np.ndarray, emission: np.ndarray, obs: np.ndarray, scale: np.ndarray) -> np.ndarray:
    likelihood = emission[:, obs].T.tolist()
    n = obs.size
    beta = np.empty((n, 2))
    beta[-1] = 1.0
    (a00, a01), (a10, a11) = transition.tolist()
    g0, g1 = 1.0, 1.0
    for t in range(n - 2, -1, -1):
        b0, b1 = likelihood[t + 1]
        c = scale[t + 1]
        g0, g1 = (a00 * b0 * g0 + a01 * b1 * g1) / c, (a10 * b0 * g0 + a11 * b1 * g1) / c
        beta[t, 0] = g0
        beta[t, 1] = g1
    return beta


def forward_filter(model: HmmModel, obs: Sequence) -> np.ndarray:
    """State posteriors P(state_t | o_1..o_t); each row sums to 1."""
    indices = observation_indices(obs)
    if indices.size == 0:
        return np.empty((0, 2))
    alpha, _ = _forward(model.initial, model.transition, model.emission, indices)
    return alpha


def log_likelihood(model: HmmModel, obs: Sequence) -> float:
    indices = observation_indices(obs)
    _, scale = _forward(model.initial, model.transition, model.emission, indices)
    return float(np.sum(np.log(scale)))


def _floor_emission(emission: np.ndarray) -> np.ndarray:
    large = np.clip(emission[:, ObservationLabel.IAT_LARGE], EMISSION_FLOOR, 1.0 - EMISSION_FLOOR)
    return np.column_stack([1.0 - large, large])


def _relabel(model: HmmModel, swap_initial: bool) -> HmmModel:
    """Swaps the rows of A and B. The initial vector only moves when it was learned."""
    order = [1, 0]
    return replace(
        model,
        initial=model.initial[order] if swap_initial else model.initial,
        transition=model.transition[np.ix_(order, order)],
        emission=model.emission[order],
    )


def baum_welch(model: HmmModel, obs: Sequence, max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
               update_initial: bool = False) -> HmmModel:
    """
    Re-estimates A and B. The initial vector stays at the MMPP steady state
    unless update_initial is set. After training, A and B are oriented so that
    Free is the state more likely to emit IAT_large; a fixed initial vector
    keeps the (Free, Busy) order init_model gave it.
    """
    indices = observation_indices(obs)
    if indices.size < MIN_TRAINING_OBSERVATIONS:
        raise TooFewSamples(f"need at least {MIN_TRAINING_OBSERVATIONS} observations, got {indices.size}",
                            module='hmm', operation='baum_welch')

    if np.all(indices == indices[0]):
        symbol = ObservationLabel(int(indices[0]))
        logger.warning(f"All {indices.size} observations are {symbol.label}: emission matrix is degenerate")
        emission = np.zeros((2, 2))
        emission[:, symbol] = 1.0
        collapsed = replace(model, emission=_floor_emission(emission))
        return replace(collapsed, log_likelihoods=(log_likelihood(collapsed, indices),),
                       converged=True, degenerate=True)

    initial = model.initial.copy()
    transition = model.transition.copy()
    emission = model.emission.copy()
    if np.allclose(emission[0], emission[1]):
        emission = SYMMETRY_BREAK_EMISSION.copy()
    emission = _floor_emission(emission)

    history: List[float] = []
    converged = False
    is_large = indices == ObservationLabel.IAT_LARGE
    for _ in range(max_iters):
        alpha, scale = _forward(initial, transition, emission, indices)
        beta = _backward(transition, emission, indices, scale)
        history.append(float(np.sum(np.log(scale))))

        gamma = alpha * beta
        gamma /= gamma.sum(axis=1, keepdims=True)
        next_likelihood = emission[:, indices[1:]].T * beta[1:]
        xi = alpha[:-1, :, None] * transition[None, :, :] * (next_likelihood / scale[1:, None])[:, None, :]

        visits = gamma[:-1].sum(axis=0)
        new_transition = transition.copy()
        for state in range(2):
            if visits[state] > 0:
                new_transition[state] = xi[:, state, :].sum(axis=0) / visits[state]
        new_transition /= new_transition.sum(axis=1, keepdims=True)

        occupancy = gamma.sum(axis=0)
        new_emission = emission.copy()
        for state in range(2):
            if occupancy[state] > 0:
                large = gamma[is_large, state].sum() / occupancy[state]
                new_emission[state] = [1.0 - large, large]
        transition = new_transition
        emission = _floor_emission(new_emission)
        if update_initial:
            initial = gamma[0]

        if len(history) > 1 and abs(history[-1] - history[-2]) < tol:
            converged = True
            break

    trained = replace(model, initial=initial, transition=transition, emission=emission,
                      log_likelihoods=tuple(history), converged=converged, degenerate=False)
    if not converged:
        logger.warning(f"Baum-Welch stopped after {max_iters} iterations without converging")

    if trained.emission[Regime.FREE, ObservationLabel.IAT_LARGE] < trained.emission[Regime.BUSY, ObservationLabel.IAT_LARGE]:
        logger.warning("Relabeling trained states so that Free favours IAT_large")
        trained = _relabel(trained, swap_initial=update_initial)
    return trained


# --- Prediction ---

def predict_next(model: HmmModel, obs_so_far: Sequence, slot_start_us: int = 0) -> PredictedState:
    """Forward-filter the history, then take one transition step. Empty history uses the initial vector."""
    indices = observation_indices(obs_so_far)
    if indices.size == 0:
        return PredictedState.from_p_free(float(model.initial[Regime.FREE]), slot_start_us)
    alpha = forward_filter(model, indices)[-1]
    return PredictedState.from_p_free(float((alpha @ model.transition)[Regime.FREE]), slot_start_us)


def predict_sequence(model: HmmModel, observations: Sequence, history: Sequence = (),
                     slot_starts_us: Optional[Sequence[int]] = None) -> List[PredictedState]:
    """
    Prediction for each observation's slot made before that observation is
    seen. Equals predict_next(model, history + observations[:i]) for every i.
    """
    history_indices = observation_indices(history)
    indices = observation_indices(observations)
    if slot_starts_us is None:
        slot_starts_us = [o.window_start_us if isinstance(o, Observation) else 0 for o in observations]

    combined = np.concatenate([history_indices, indices]).astype(int)
    alpha = forward_filter(model, combined)
    # Predictive distributions: initial for the very first slot, alpha_{t-1} A afterwards
    predictive = np.vstack([model.initial[None, :], alpha[:-1] @ model.transition]) if combined.size else np.empty((0, 2))
    offset = history_indices.size
    return [
        PredictedState.from_p_free(float(predictive[offset + i, Regime.FREE]), start)
        for i, start in enumerate(slot_starts_us)
    ]


def viterbi(model: HmmModel, obs: Sequence) -> np.ndarray:
    """Most likely state path (diagnostic only)."""
    indices = observation_indices(obs)
    n = indices.size
    if n == 0:
        return np.empty(0, dtype=int)

    with np.errstate(divide='ignore'):
        log_a = np.log(model.transition)
        log_b = np.log(model.emission)
        delta = np.log(model.initial) + log_b[:, indices[0]]
    back = np.zeros((n, 2), dtype=int)
    for t in range(1, n):
        candidates = delta[:, None] + log_a
        back[t] = np.argmax(candidates, axis=0)
        delta = candidates[back[t], [0, 1]] + log_b[:, indices[t]]

    path = np.empty(n, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path


def sample_hmm(model: HmmModel, n: int, seed: int, stage: int = STAGE_DIRECT) -> Tuple[np.ndarray, np.ndarray]:
    """Draws (states, observations) of length n from the model."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = make_rng(seed, stage)
    state_draws = rng.random(n)
    obs_draws = rng.random(n)

    states = np.empty(n, dtype=int)
    state = int(state_draws[0] >= model.initial[0])
    states[0] = state
    stay_free = model.transition[:, 0].tolist()
    for t in range(1, n):
        state = 0 if state_draws[t] < stay_free[state] else 1
        states[t] = state
    observations = (obs_draws >= model.emission[states, 0]).astype(int)
    return states, observations
