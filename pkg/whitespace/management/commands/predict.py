import logging

from whitespace.baselines import random_access_predict
from whitespace.evaluation import SLOT_COLUMNS, slot_rows, truth_from_observations
from whitespace.hmm import HmmModel, ThresholdPolicy, extract_observations, predict_sequence
from whitespace.reports import read_json, write_rows_csv
from whitespace.rng import STAGE_RANDOM_ACCESS
from whitespace.trace_io import trace_span

from ._base import WhitespaceCommand

logger = logging.getLogger(__name__)


class Command(WhitespaceCommand):
    help = 'Predict Free/Busy for every T-second slot and label the ground truth'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--hmm', required=True, metavar='PATH', help='JSON written by train-hmm')
        self.add_slot_arguments(parser)
        parser.add_argument('--start', type=float, default=0.0, dest='start_s',
                            help='Prediction span offset from the trace start, seconds')
        parser.add_argument('--window-count', type=int, default=None, dest='window_count',
                            help='Moving-average threshold length in windows')
        parser.add_argument('--no-history', action='store_true', dest='no_history',
                            help='Start from the initial vector instead of the filtered training span')
        self.add_seed_argument(parser)
        self.add_output_argument(parser, required=True)

    def training_history(self, trace, hmm_data, span_start: int) -> list:
        """Training observations recorded by train-hmm, replayed when they precede the prediction span."""
        training_span = hmm_data.get('training_span_us')
        if not training_span or not hmm_data.get('y_ms'):
            return []
        training_span = (int(training_span[0]), int(training_span[1]))
        if training_span[1] > span_start:
            logger.warning('Training span overlaps the prediction span: predicting without history')
            return []
        return extract_observations(trace, hmm_data['y_ms'], hmm_data.get('t_s') or self.slot_period({}),
                                    ThresholdPolicy.training_average(), training_span)

    def handle(self, *args, **options):
        trace = self.load_merged(options['traces'])
        hmm_data = read_json(options['hmm'])
        model = HmmModel.from_dict(hmm_data)
        if options['y_ms'] is None and hmm_data.get('y_ms'):
            options['y_ms'] = hmm_data['y_ms']
        y_ms = self.window_length(options)
        t_s = self.slot_period(options)

        start, end = trace_span(trace)
        span_start = start + int(round(options['start_s'] * 1e6))
        policy = ThresholdPolicy.moving(self.setting(options, 'window_count', 'WINDOW_COUNT'),
                                        model.threshold_value_ms)
        observations = extract_observations(trace, y_ms, t_s, policy, (span_start, end))
        history = [] if options['no_history'] else self.training_history(trace, hmm_data, span_start)
        predictions = predict_sequence(model, observations, history=history)
        truth = truth_from_observations(observations)
        baseline = random_access_predict(len(observations), self.seed(options), STAGE_RANDOM_ACCESS,
                                         [o.window_start_us for o in observations])

        rows = slot_rows(observations, predictions, baseline, truth)
        write_rows_csv(rows, options['output'], SLOT_COLUMNS)
        self.stdout.write(f"{len(rows)} slots predicted")
