from whitespace.evaluation import calibrate_x

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Sweep the MMPP(2) training duration x and report the quantile RMSE per x'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--x-grid', type=float, nargs='+', default=None, dest='x_grid', metavar='SECONDS')
        parser.add_argument('--holdout', type=float, default=None, dest='holdout_s', help='Holdout seconds')
        parser.add_argument('--k', type=int, default=None)
        parser.add_argument('--y-ms', type=float, default=None, dest='y_ms')
        parser.add_argument('--n-jobs', type=int, default=None, dest='n_jobs')
        self.add_seed_argument(parser)
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        table = calibrate_x(
            self.load_merged(options['traces']),
            candidate_x=self.setting(options, 'x_grid', 'X_GRID'),
            k=self.multiplier(options),
            holdout_s=self.setting(options, 'holdout_s', 'HOLDOUT_S'),
            seed=self.seed(options),
            n_jobs=self.setting(options, 'n_jobs', 'N_JOBS'),
            y_override_ms=options['y_ms'],
        )
        self.emit_json(table.to_dict(), options['output'])
