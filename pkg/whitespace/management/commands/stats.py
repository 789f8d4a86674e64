from whitespace.stats import classify_branch, compute_traffic_stats
from whitespace.trace_io import extract_iats, trace_span, window_trace

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Compute (M1, C, H) of the merged trace and the MMPP(2) fitting branch'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--x', type=float, default=None, dest='x_s',
                            help='Use only the leading x seconds (whole trace when omitted)')
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        trace = self.load_merged(options['traces'])
        if options['x_s'] is not None:
            start, _ = trace_span(trace)
            trace = window_trace(trace, start, int(round(options['x_s'] * 1e6)))

        iats = extract_iats(trace)
        stats = compute_traffic_stats(iats)
        self.emit_json({
            **stats.to_dict(),
            'branch': classify_branch(stats).value,
            'self_similar': stats.self_similar,
            'merged_zero_count': iats.merged_zero_count,
        }, options['output'])
