from whitespace.baselines import fit_pareto
from whitespace.trace_io import extract_iats

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Fit the fixed-scale Pareto IAT baseline'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--scale-ms', type=float, default=None, dest='scale_ms',
                            help='Pareto scale (minimum IAT) in ms')
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        iats = extract_iats(self.load_merged(options['traces']))
        params = fit_pareto(iats, self.setting(options, 'scale_ms', 'PARETO_SCALE_MS'))
        self.emit_json(params.to_dict(), options['output'])
