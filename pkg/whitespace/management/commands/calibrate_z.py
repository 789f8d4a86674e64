from whitespace.evaluation import calibrate_z, calibrate_z_channels
from whitespace.mmpp import Mmpp2Params
from whitespace.reports import read_json

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Sweep the HMM training duration z and report hit rate and precision per z'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--mmpp', required=True, metavar='PATH', help='JSON written by fit-mmpp')
        parser.add_argument('--z-grid', type=float, nargs='+', default=None, dest='z_grid', metavar='SECONDS')
        parser.add_argument('--per-channel', action='store_true', dest='per_channel',
                            help='Calibrate each trace separately and average over channels')
        self.add_slot_arguments(parser)
        parser.add_argument('--window-count', type=int, default=None, dest='window_count')
        parser.add_argument('--n-jobs', type=int, default=None, dest='n_jobs')
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        mmpp = Mmpp2Params.from_dict(read_json(options['mmpp']))
        kwargs = {
            'window_count': self.setting(options, 'window_count', 'WINDOW_COUNT'),
            'n_jobs': self.setting(options, 'n_jobs', 'N_JOBS'),
            'max_iters': self.setting(options, 'max_iters', 'BW_MAX_ITERS'),
            'tol': self.setting(options, 'tol', 'BW_TOL'),
        }
        z_grid = self.setting(options, 'z_grid', 'Z_GRID')
        y_ms = self.window_length(options, mmpp)
        t_s = self.slot_period(options)

        if options['per_channel']:
            table = calibrate_z_channels(self.load_traces(options['traces']), z_grid, mmpp, y_ms, t_s, **kwargs)
        else:
            table = calibrate_z(self.load_merged(options['traces']), z_grid, mmpp, y_ms, t_s, **kwargs)
        self.emit_json(table.to_dict(), options['output'])
