"""
Evaluation
Quantile RMSE between IAT distributions, confusion-matrix metrics for slot
predictors, ground-truth labelling, the x / z calibration sweeps and the end
to end pipeline.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.metrics import confusion_matrix

from .baselines import DEFAULT_SCALE_MS, ParetoParams, fit_pareto, generate_pareto_iats, random_access_predict
from .exceptions import (DegenerateFit, InsufficientTail, LengthMismatch, NumericalFailure, TooFewSamples,
                         TraceTooShort, WhitespaceError)
from .hmm import (DEFAULT_MAX_ITERS, DEFAULT_TOL, DEFAULT_WINDOW_COUNT, HmmModel, Observation, ObservationLabel,
                  PredictedState, Regime, ThresholdPolicy, baum_welch, extract_observations, init_model,
                  predict_sequence, training_threshold)
from .mmpp import Mmpp2Params, fit_from_stats, generate_segments, y_lower_bound
from .rng import STAGE_CALIBRATION, STAGE_MMPP, STAGE_PARETO, STAGE_RANDOM_ACCESS
from .stats import TrafficStats, classify_branch, compute_traffic_stats
from .trace_io import IatSeries, PacketTrace, extract_iats, merge_traces, trace_span, window_trace

logger = logging.getLogger(__name__)

MIN_RMSE_SAMPLES = 200
QUANTILE_GRID = np.linspace(0.005, 0.995, 100)

DEFAULT_X_GRID = (60.0, 120.0, 240.0, 480.0, 960.0, 1920.0, 2400.0)
DEFAULT_Z_GRID = (60.0, 120.0, 300.0, 600.0, 960.0)
DEFAULT_HOLDOUT_S = 300.0

SLOT_COLUMNS = ('slot_start_us', 'window_mean_iat_ms', 'threshold_ms', 'observation', 'p_free', 'prediction',
                'random_access', 'truth')

GROUND_TRUTH_POLICY = ('slot is Busy iff its window mean IAT is below the threshold in force '
                       '(same rule as the IAT_small observation); empty windows are Free')


@dataclass(frozen=True)
class ConfusionMatrix:
    """Positive class is Free: TP = actually Free and predicted Free."""
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> Dict:
        return {'tp': self.tp, 'fp': self.fp, 'fn': self.fn, 'tn': self.tn}


def _ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator else None


@dataclass(frozen=True)
class EvalReport:
    """Undefined metrics (zero denominators) are None."""
    confusion: ConfusionMatrix
    hit_rate: Optional[float]
    fdr: Optional[float]
    precision: Optional[float]
    f1: Optional[float]
    rmse_ms: Optional[float] = None
    rmse_pct: Optional[float] = None
    config: Dict = field(default_factory=dict)

    @classmethod
    def from_confusion(cls, confusion: ConfusionMatrix) -> 'EvalReport':
        hit_rate = _ratio(confusion.tp, confusion.tp + confusion.fn)
        fdr = _ratio(confusion.fp, confusion.tp + confusion.fp)
        precision = None if fdr is None else 1.0 - fdr
        f1 = None
        if hit_rate is not None and precision is not None:
            f1 = _ratio(2.0 * precision * hit_rate, precision + hit_rate)
        return cls(confusion, hit_rate, fdr, precision, f1)

    def with_rmse(self, rmse: Tuple[float, float]) -> 'EvalReport':
        return replace(self, rmse_ms=rmse[0], rmse_pct=rmse[1])

    def with_config(self, **config) -> 'EvalReport':
        return replace(self, config={**self.config, **config})

    def to_dict(self) -> Dict:
        return {
            'confusion': self.confusion.to_dict(),
            'hit_rate': self.hit_rate,
            'fdr': self.fdr,
            'precision': self.precision,
            'f1': self.f1,
            'rmse_ms': self.rmse_ms,
            'rmse_pct': self.rmse_pct,
            'config': dict(self.config),
        }


# --- Traffic model scoring ---

def quantile_rmse(model_iats: IatSeries, test_iats: IatSeries) -> Tuple[float, float]:
    """
    RMSE between the two quantile functions on q = 0.005, 0.015, ..., 0.995.
    Returns (rmse_ms, rmse_pct) where the percentage is relative to the test mean.
    """
    for name, series in (('model', model_iats), ('test', test_iats)):
        if series.count < MIN_RMSE_SAMPLES:
            raise TooFewSamples(f"{name} series has {series.count} IATs, need {MIN_RMSE_SAMPLES}",
                                module='evaluation', operation='quantile_rmse')

    test_ms = test_iats.as_ms()
    difference = np.quantile(model_iats.as_ms(), QUANTILE_GRID) - np.quantile(test_ms, QUANTILE_GRID)
    rmse_ms = float(np.sqrt(np.mean(difference ** 2)))
    return rmse_ms, 100.0 * rmse_ms / float(np.mean(test_ms))


# --- Predictor scoring ---

def truth_from_observations(observations: Sequence[Observation]) -> List[Regime]:
    return [Regime.BUSY if o.label is ObservationLabel.IAT_SMALL else Regime.FREE for o in observations]


def label_ground_truth(trace: PacketTrace, y_ms: float, t_s: float,
                       threshold_policy: Optional[ThresholdPolicy] = None,
                       span_us: Optional[Tuple[int, int]] = None) -> List[Regime]:
    """Busy iff the slot's window mean IAT is below the threshold; empty windows are Free."""
    return truth_from_observations(extract_observations(trace, y_ms, t_s, threshold_policy, span_us))


def _regime_index(value) -> int:
    if isinstance(value, PredictedState):
        return int(value.state)
    if isinstance(value, str):
        return int(Regime.FREE if value.lower() == 'free' else Regime.BUSY)
    return int(value)


def score(predictions: Sequence, truth: Sequence) -> EvalReport:
    """Confusion matrix (positive = Free) and hit rate, FDR, precision, F1."""
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truth)} truth labels",
                             module='evaluation', operation='score')
    if len(predictions) == 0:
        raise LengthMismatch("nothing to score", module='evaluation', operation='score')

    y_pred = [_regime_index(p) for p in predictions]
    y_true = [_regime_index(t) for t in truth]
    (tp, fn), (fp, tn) = confusion_matrix(y_true, y_pred, labels=[Regime.FREE, Regime.BUSY]).tolist()
    return EvalReport.from_confusion(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))


def score_counts(tp: int, fp: int, fn: int, tn: int) -> EvalReport:
    return EvalReport.from_confusion(ConfusionMatrix(tp=tp, fp=fp, fn=fn, tn=tn))


# --- Calibration ---

@dataclass(frozen=True)
class CalibrationTable:
    parameter: str
    rows: Tuple[Dict, ...]
    best: Optional[float]

    def to_dict(self) -> Dict:
        return {'parameter': self.parameter, 'best': self.best, 'rows': [dict(row) for row in self.rows]}


def _calibrate_x_point(trace: PacketTrace, start_us: int, x_s: float, k: float, holdout: IatSeries,
                       seed: int, y_override_ms: Optional[float]) -> Dict:
    row = {'x_s': x_s, 'y_ms': None, 'rmse_ms': None, 'rmse_pct': None, 'error': None}
    try:
        training = extract_iats(window_trace(trace, start_us, int(round(x_s * 1e6))))
        mmpp = fit_from_stats(compute_traffic_stats(training))
        y_ms = y_override_ms or k * y_lower_bound(mmpp)
        modeled = generate_segments(mmpp, y_ms, holdout.count, seed, STAGE_CALIBRATION)
        row['y_ms'] = y_ms
        row['rmse_ms'], row['rmse_pct'] = quantile_rmse(modeled, holdout)
    except WhitespaceError as e:
        row['error'] = str(e)
    return row


def calibrate_x(trace: PacketTrace, candidate_x: Sequence[float] = DEFAULT_X_GRID, k: float = 1.0,
                holdout_s: float = DEFAULT_HOLDOUT_S, seed: int = 0, n_jobs: int = 1,
                y_override_ms: Optional[float] = None) -> CalibrationTable:
    """
    For each x: fit MMPP(2) on the leading x seconds, generate y = k * y_lb of
    traffic and score it against a holdout placed after the largest feasible x.
    """
    start, end = trace_span(trace)
    span_s = (end - start) / 1e6
    feasible = sorted(x for x in candidate_x if x + holdout_s <= span_s)
    dropped = sorted(set(candidate_x) - set(feasible))
    if dropped:
        logger.warning(f"Dropping x values {dropped}: trace spans only {span_s:.1f} s with a {holdout_s:.0f} s holdout")
    if not feasible:
        raise TraceTooShort(f"trace spans {span_s:.1f} s, need at least {min(candidate_x) + holdout_s:.1f} s",
                            module='evaluation', operation='calibrate_x')

    holdout_start = start + int(round(feasible[-1] * 1e6))
    holdout = extract_iats(window_trace(trace, holdout_start, int(round(holdout_s * 1e6))))

    rows = Parallel(n_jobs=n_jobs)(
        delayed(_calibrate_x_point)(trace, start, x, k, holdout, seed, y_override_ms) for x in feasible
    )
    scored = [row for row in rows if row['rmse_ms'] is not None]
    if not scored:
        raise NumericalFailure(f"no x value produced a fit: {rows[-1]['error']}",
                              module='evaluation', operation='calibrate_x')
    best = min(scored, key=lambda row: row['rmse_ms'])['x_s']
    return CalibrationTable('x_s', tuple(rows), best)


def _f1_key(row: Dict) -> float:
    return -1.0 if row['f1'] is None else row['f1']


def _calibrate_z_point(trace: PacketTrace, start_us: int, scoring_span: Tuple[int, int], z_s: float,
                       mmpp: Mmpp2Params, y_ms: float, t_s: float, window_count: int,
                       max_iters: int, tol: float) -> Dict:
    row = {'z_s': z_s, 'hit_rate': None, 'precision': None, 'fdr': None, 'f1': None, 'n_train': None,
           'n_scored': None, 'error': None}
    training_span = (start_us, start_us + int(round(z_s * 1e6)))
    try:
        training_obs = extract_observations(trace, y_ms, t_s, ThresholdPolicy.training_average(), training_span)
        row['n_train'] = len(training_obs)
        threshold = training_threshold(training_obs)
        model = baum_welch(init_model(mmpp, ThresholdPolicy.training_average(), threshold), training_obs,
                           max_iters=max_iters, tol=tol)

        scoring_obs = extract_observations(trace, y_ms, t_s, ThresholdPolicy.moving(window_count, threshold),
                                           scoring_span)
        report = score(predict_sequence(model, scoring_obs), truth_from_observations(scoring_obs))
    except WhitespaceError as e:
        row['error'] = str(e)
        return row

    row.update(hit_rate=report.hit_rate, precision=report.precision, fdr=report.fdr, f1=report.f1,
               n_scored=len(scoring_obs))
    return row


def calibrate_z(trace: PacketTrace, candidate_z: Sequence[float], mmpp: Mmpp2Params, y_ms: float,
                t_s: float, window_count: int = DEFAULT_WINDOW_COUNT, n_jobs: int = 1,
                max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL) -> CalibrationTable:
    """
    For each z: train the HMM on the first z seconds, score it on the span after
    the largest z. The selected z maximises F1.
    """
    start, end = trace_span(trace)
    max_z = max(candidate_z)
    scoring_start = start + int(round(max_z * 1e6))
    if end - scoring_start < y_ms * 1000.0:
        raise TraceTooShort(f"trace spans {(end - start) / 1e6:.1f} s, too short for z={max_z:.0f} s "
                            f"plus one {y_ms:.1f} ms scoring window", module='evaluation', operation='calibrate_z')

    rows = Parallel(n_jobs=n_jobs)(
        delayed(_calibrate_z_point)(trace, start, (scoring_start, end), z, mmpp, y_ms, t_s, window_count,
                                    max_iters, tol)
        for z in sorted(candidate_z)
    )
    for row in rows:
        if row['error']:
            logger.warning(f"z = {row['z_s']:g} s skipped: {row['error']}")
    best = max(rows, key=_f1_key)
    return CalibrationTable('z_s', tuple(rows), best['z_s'] if best['f1'] is not None else None)


def calibrate_z_channels(traces: Sequence[PacketTrace], candidate_z: Sequence[float], mmpp: Mmpp2Params,
                         y_ms: float, t_s: float, **kwargs) -> CalibrationTable:
    """Runs calibrate_z per channel and averages hit rate and precision across channels for each z."""
    tables = [calibrate_z(trace, candidate_z, mmpp, y_ms, t_s, **kwargs) for trace in traces]

    rows = []
    for index, z in enumerate(sorted(candidate_z)):
        per_channel = [table.rows[index] for table in tables]
        row = {'z_s': z, 'channels': len(per_channel)}
        for metric in ('hit_rate', 'precision'):
            values = [r[metric] for r in per_channel if r[metric] is not None]
            row[metric] = float(np.mean(values)) if values else None
        row['fdr'] = None if row['precision'] is None else 1.0 - row['precision']
        if row['hit_rate'] is not None and row['precision'] is not None and row['hit_rate'] + row['precision'] > 0:
            row['f1'] = 2.0 * row['hit_rate'] * row['precision'] / (row['hit_rate'] + row['precision'])
        else:
            row['f1'] = None
        rows.append(row)

    best = max(rows, key=_f1_key)
    return CalibrationTable('z_s', tuple(rows), best['z_s'] if best['f1'] is not None else None)


# --- Pipeline ---

@dataclass(frozen=True)
class PipelineConfig:
    """Durations in seconds except y (milliseconds)."""
    x_s: float = 300.0
    k: float = 1.0
    z_s: float = 300.0
    t_s: float = 5.0
    y_override_ms: Optional[float] = None
    seed: int = 0
    pareto_scale_ms: float = DEFAULT_SCALE_MS
    window_count: int = DEFAULT_WINDOW_COUNT
    bw_tol: float = DEFAULT_TOL
    bw_max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if not self.t_s > 0:
            raise ValueError(f"t_s must be positive, got {self.t_s}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if not (self.x_s > 0 and self.z_s > 0):
            raise ValueError("x_s and z_s must be positive")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True, eq=False)
class PipelineResult:
    config: PipelineConfig
    y_ms: float
    stats: TrafficStats
    mmpp: Mmpp2Params
    pareto: Optional[ParetoParams]
    model: HmmModel
    hmm_report: EvalReport
    random_report: EvalReport
    mmpp_rmse: Tuple[float, float]
    pareto_rmse: Optional[Tuple[float, float]]
    observations: Tuple[Observation, ...]
    predictions: Tuple[PredictedState, ...]
    random_predictions: Tuple[PredictedState, ...]
    truth: Tuple[Regime, ...]

    def to_dict(self) -> Dict:
        report = self.hmm_report.to_dict()
        report.update({
            'ground_truth_policy': GROUND_TRUTH_POLICY,
            'traffic': {**self.stats.to_dict(), 'branch': classify_branch(self.stats).value},
            'models': {
                'mmpp': self.mmpp.to_dict(),
                'pareto': self.pareto.to_dict() if self.pareto else None,
                'hmm': self.model.to_dict(),
            },
            'rmse': {
                'mmpp': {'rmse_ms': self.mmpp_rmse[0], 'rmse_pct': self.mmpp_rmse[1]},
                'pareto': ({'rmse_ms': self.pareto_rmse[0], 'rmse_pct': self.pareto_rmse[1]}
                           if self.pareto_rmse else None),
            },
            'predictors': {
                'hmm': self.hmm_report.to_dict(),
                'random_access': self.random_report.to_dict(),
            },
        })
        return report

    def slot_rows(self) -> List[Dict]:
        """Per-slot table for plotting."""
        return slot_rows(self.observations, self.predictions, self.random_predictions, self.truth)


def slot_rows(observations: Sequence[Observation], predictions: Sequence[PredictedState],
              random_predictions: Sequence[PredictedState], truth: Sequence[Regime]) -> List[Dict]:
    """One dict per slot, keyed by SLOT_COLUMNS."""
    return [
        {
            'slot_start_us': obs.window_start_us,
            'window_mean_iat_ms': obs.window_mean_iat_ms,
            'threshold_ms': obs.threshold_ms,
            'observation': obs.label.label,
            'p_free': prediction.p_free,
            'prediction': prediction.state.label,
            'random_access': random_prediction.state.label,
            'truth': label.label,
        }
        for obs, prediction, random_prediction, label in zip(observations, predictions, random_predictions, truth)
    ]


def _pareto_baseline(training: IatSeries, holdout: IatSeries, config: PipelineConfig):
    try:
        pareto = fit_pareto(training, config.pareto_scale_ms)
    except (InsufficientTail, DegenerateFit) as e:
        logger.warning(f"Pareto baseline skipped: {e}")
        return None, None
    modeled = generate_pareto_iats(pareto, holdout.count, config.seed, STAGE_PARETO)
    return pareto, quantile_rmse(modeled, holdout)


def run_pipeline(traces: Sequence[PacketTrace], config: PipelineConfig) -> PipelineResult:
    """
    merge -> stats -> fit -> generate -> train -> predict -> score.

    The trace is cut into consecutive segments: the first x seconds fit the
    traffic models, the next z seconds train the HMM and the remainder is
    predicted, labelled and used as the RMSE holdout.
    """
    merged = merge_traces(traces)
    start, end = trace_span(merged)
    x_end = start + int(round(config.x_s * 1e6))
    z_end = x_end + int(round(config.z_s * 1e6))
    if z_end >= end:
        raise TraceTooShort(f"trace spans {(end - start) / 1e6:.1f} s, need more than x + z = "
                            f"{config.x_s + config.z_s:.1f} s", module='evaluation', operation='run_pipeline')

    training_iats = extract_iats(window_trace(merged, start, x_end - start))
    stats = compute_traffic_stats(training_iats)
    mmpp = fit_from_stats(stats)
    y_ms = config.y_override_ms or config.k * y_lower_bound(mmpp)
    logger.info(f"Fitted {mmpp.branch.value} MMPP(2); y = {y_ms:.3f} ms")

    training_obs = extract_observations(merged, y_ms, config.t_s, ThresholdPolicy.training_average(), (x_end, z_end))
    threshold = training_threshold(training_obs)
    model = baum_welch(init_model(mmpp, ThresholdPolicy.training_average(), threshold), training_obs,
                       max_iters=config.bw_max_iters, tol=config.bw_tol)

    observations = extract_observations(merged, y_ms, config.t_s,
                                        ThresholdPolicy.moving(config.window_count, threshold), (z_end, end))
    predictions = predict_sequence(model, observations, history=training_obs)
    truth = truth_from_observations(observations)
    logger.info(f"Ground truth: {GROUND_TRUTH_POLICY}")

    slot_starts = [o.window_start_us for o in observations]
    random_predictions = random_access_predict(len(observations), config.seed, STAGE_RANDOM_ACCESS, slot_starts)

    holdout = extract_iats(window_trace(merged, z_end, end - z_end))
    modeled = generate_segments(mmpp, y_ms, holdout.count, config.seed, STAGE_MMPP)
    mmpp_rmse = quantile_rmse(modeled, holdout)
    pareto, pareto_rmse = _pareto_baseline(training_iats, holdout, config)

    echo = {'x_s': config.x_s, 'k': config.k, 'y_ms': y_ms, 'z_s': config.z_s, 't_s': config.t_s,
            'seed': config.seed}
    hmm_report = score(predictions, truth).with_rmse(mmpp_rmse).with_config(**echo)
    random_report = score(random_predictions, truth).with_config(**echo)

    return PipelineResult(
        config=config, y_ms=y_ms, stats=stats, mmpp=mmpp, pareto=pareto, model=model,
        hmm_report=hmm_report, random_report=random_report, mmpp_rmse=mmpp_rmse, pareto_rmse=pareto_rmse,
        observations=tuple(observations), predictions=tuple(predictions),
        random_predictions=tuple(random_predictions), truth=tuple(truth),
    )
