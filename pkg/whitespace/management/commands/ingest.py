from whitespace.reports import to_jsonable
from whitespace.trace_io import TraceParser, write_trace

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Load one trace file, validate it and write the canonical sorted CSV'

    def add_arguments(self, parser):
        parser.add_argument('--trace', required=True, metavar='PATH')
        parser.add_argument('--format', default='csv', choices=['csv'])
        self.add_output_argument(parser, required=True)
        parser.add_argument('--diagnostics', metavar='PATH', help='Write load diagnostics JSON here')

    def handle(self, *args, **options):
        with open(options['trace'], encoding='utf-8') as f:
            trace = TraceParser().parse(f.read(), options['format'])
        write_trace(trace, options['output'])

        diagnostics = to_jsonable(trace.diagnostics.to_dict()) if trace.diagnostics else {}
        diagnostics['records'] = len(trace)
        diagnostics['channels'] = sorted(trace.source_channels)
        self.emit_json(diagnostics, options['diagnostics'])
