from whitespace.baselines import ParetoParams, generate_pareto_iats, generate_pareto_trace
from whitespace.mmpp import Mmpp2Params, generate_segments, generate_trace, y_lower_bound
from whitespace.reports import read_json
from whitespace.rng import STAGE_MMPP, STAGE_PARETO
from whitespace.trace_io import trace_from_iats, write_trace

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Generate a synthetic trace from fitted MMPP(2) or Pareto parameters'

    def add_arguments(self, parser):
        parser.add_argument('--model', choices=['mmpp', 'pareto'], default='mmpp')
        parser.add_argument('--params', required=True, metavar='PATH',
                            help='JSON written by fit-mmpp or fit-pareto')
        parser.add_argument('--duration', type=float, default=None, help='Trace length in seconds')
        parser.add_argument('--iats', type=int, default=None,
                            help='Generate at least this many IATs instead of a fixed duration')
        parser.add_argument('--segment-ms', type=float, default=None, dest='segment_ms',
                            help='MMPP(2) segment length for --iats (default y_lb)')
        self.add_seed_argument(parser)
        self.add_output_argument(parser, required=True)

    def handle(self, *args, **options):
        if (options['duration'] is None) == (options['iats'] is None):
            raise ValueError('exactly one of --duration or --iats is required')
        params = read_json(options['params'])
        seed = self.seed(options)

        if options['iats'] is not None:
            if options['iats'] < 1:
                raise ValueError(f"--iats must be at least 1, got {options['iats']}")
            if options['model'] == 'mmpp':
                mmpp = Mmpp2Params.from_dict(params)
                segment_ms = options['segment_ms'] or y_lower_bound(mmpp)
                iats = generate_segments(mmpp, segment_ms, options['iats'], seed, STAGE_MMPP)
            else:
                iats = generate_pareto_iats(ParetoParams.from_dict(params), options['iats'], seed, STAGE_PARETO)
            trace = trace_from_iats(iats)
            write_trace(trace, options['output'])
            self.stdout.write(f"{iats.count} IATs generated")
            return

        if options['duration'] <= 0:
            raise ValueError(f"--duration must be positive, got {options['duration']}")
        duration_ms = options['duration'] * 1000.0
        if options['model'] == 'mmpp':
            trace = generate_trace(Mmpp2Params.from_dict(params), duration_ms, seed, STAGE_MMPP)
        else:
            trace = generate_pareto_trace(ParetoParams.from_dict(params), duration_ms, seed, STAGE_PARETO)
        write_trace(trace, options['output'])
        self.stdout.write(f"{len(trace)} arrivals in {options['duration']:g} s")
