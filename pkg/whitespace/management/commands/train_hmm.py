from whitespace.hmm import ThresholdPolicy, baum_welch, extract_observations, init_model, training_threshold
from whitespace.mmpp import Mmpp2Params
from whitespace.reports import read_json
from whitespace.trace_io import trace_span

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Train the Free/Busy HMM with Baum-Welch on windowed mean-IAT observations'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--mmpp', required=True, metavar='PATH', help='JSON written by fit-mmpp')
        self.add_slot_arguments(parser)
        parser.add_argument('--start', type=float, default=0.0, dest='start_s',
                            help='Training span offset from the trace start, seconds')
        parser.add_argument('--z', type=float, default=None, dest='z_s', help='Training span length, seconds')
        parser.add_argument('--max-iters', type=int, default=None, dest='max_iters')
        parser.add_argument('--tol', type=float, default=None)
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        trace = self.load_merged(options['traces'])
        mmpp = Mmpp2Params.from_dict(read_json(options['mmpp']))
        y_ms = self.window_length(options, mmpp)
        t_s = self.slot_period(options)

        start, end = trace_span(trace)
        span_start = start + int(round(options['start_s'] * 1e6))
        z_s = self.setting(options, 'z_s', 'Z_S')
        span = (span_start, min(end, span_start + int(round(z_s * 1e6))))

        observations = extract_observations(trace, y_ms, t_s, ThresholdPolicy.training_average(), span)
        threshold = training_threshold(observations)
        model = baum_welch(
            init_model(mmpp, ThresholdPolicy.training_average(), threshold),
            observations,
            max_iters=self.setting(options, 'max_iters', 'BW_MAX_ITERS'),
            tol=self.setting(options, 'tol', 'BW_TOL'),
        )
        self.emit_json({**model.to_dict(), 'y_ms': y_ms, 't_s': t_s, 'n_observations': len(observations),
                        'training_span_us': list(span)}, options['output'])
