from whitespace.evaluation import SLOT_COLUMNS, PipelineConfig, run_pipeline
from whitespace.reports import write_rows_csv

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Run merge, stats, fit, generate, train, predict and score end to end'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        parser.add_argument('--x', type=float, default=None, dest='x_s', help='MMPP(2) training seconds')
        parser.add_argument('--z', type=float, default=None, dest='z_s', help='HMM training seconds')
        self.add_slot_arguments(parser)
        self.add_environment_argument(parser)
        parser.add_argument('--window-count', type=int, default=None, dest='window_count')
        self.add_seed_argument(parser)
        parser.add_argument('--format', choices=['json', 'csv'], default='json',
                            help='json writes the report, csv the per-slot table')
        parser.add_argument('--slots-csv', metavar='PATH', dest='slots_csv',
                            help='Also write the per-slot table here')
        self.add_output_argument(parser)

    def handle(self, *args, **options):
        if options['y_ms'] is not None and not options['y_ms'] > 0:
            raise ValueError(f"--y-ms must be positive, got {options['y_ms']}")
        config = PipelineConfig(
            x_s=self.setting(options, 'x_s', 'X_S'),
            k=self.multiplier(options),
            z_s=self.setting(options, 'z_s', 'Z_S'),
            t_s=self.slot_period(options),
            y_override_ms=options['y_ms'],
            seed=self.seed(options),
            pareto_scale_ms=self.setting(options, 'pareto_scale_ms', 'PARETO_SCALE_MS'),
            window_count=self.setting(options, 'window_count', 'WINDOW_COUNT'),
            bw_tol=self.setting(options, 'bw_tol', 'BW_TOL'),
            bw_max_iters=self.setting(options, 'bw_max_iters', 'BW_MAX_ITERS'),
        )
        result = run_pipeline(self.load_traces(options['traces']), config)

        if options['slots_csv']:
            write_rows_csv(result.slot_rows(), options['slots_csv'], SLOT_COLUMNS)
        if options['format'] == 'csv':
            if options['output']:
                write_rows_csv(result.slot_rows(), options['output'], SLOT_COLUMNS)
            else:
                raise ValueError('--format csv needs -o')
        else:
            self.emit_json(result.to_dict(), options['output'])
