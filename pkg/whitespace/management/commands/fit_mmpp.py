from django.core.management.base import CommandError

from whitespace.mmpp import fit_mmpp2, fit_phase
from whitespace.reports import read_json
from whitespace.stats import TrafficStats, compute_traffic_stats
from whitespace.trace_io import extract_iats

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Fit MMPP(2) rates from traffic statistics (or directly from traces)'

    def add_arguments(self, parser):
        parser.add_argument('--stats', metavar='PATH', help='Statistics JSON written by the stats command')
        self.add_traces_argument(parser, required=False)
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        if options['stats']:
            stats = TrafficStats.from_dict(read_json(options['stats']))
        elif options['traces']:
            stats = compute_traffic_stats(extract_iats(self.load_merged(options['traces'])))
        else:
            raise CommandError('one of --stats or --traces is required', returncode=2)

        phase = fit_phase(stats)
        mmpp = fit_mmpp2(phase, stats.h)
        self.emit_json({**mmpp.to_dict(), 'phase': phase.to_dict()}, options['output'])
