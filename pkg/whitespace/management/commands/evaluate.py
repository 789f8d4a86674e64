import csv

from whitespace.evaluation import quantile_rmse, score
from whitespace.trace_io import extract_iats, load_trace, trace_span, window_trace

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Score per-slot predictions (and optionally a modeled trace against a test trace)'

    def add_arguments(self, parser):
        parser.add_argument('--slots', required=True, metavar='PATH', help='Per-slot CSV written by predict')
        parser.add_argument('--predictor', default='prediction', choices=['prediction', 'random_access'],
                            help='Which prediction column to score')
        parser.add_argument('--model-trace', metavar='PATH', dest='model_trace')
        parser.add_argument('--test-trace', metavar='PATH', dest='test_trace')
        parser.add_argument('--test-start', type=float, default=0.0, dest='test_start_s',
                            help='Score only test-trace IATs from this offset (seconds) onwards')
        self.add_output_argument(parser)

    def holdout_iats(self, options):
        trace = load_trace(options['test_trace'])
        if options['test_start_s']:
            start, end = trace_span(trace)
            holdout_start = start + int(round(options['test_start_s'] * 1e6))
            if holdout_start >= end:
                raise ValueError(f"--test-start {options['test_start_s']:g} s is past the end of the test trace")
            trace = window_trace(trace, holdout_start, end - holdout_start)
        return extract_iats(trace)

    def handle(self, *args, **options):
        with open(options['slots'], encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
        report = score([row[options['predictor']] for row in rows], [row['truth'] for row in rows])

        if options['model_trace'] and options['test_trace']:
            report = report.with_rmse(quantile_rmse(extract_iats(load_trace(options['model_trace'])),
                                                    self.holdout_iats(options)))
        self.emit_json(report.to_dict(), options['output'])
