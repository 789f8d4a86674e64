from whitespace.trace_io import write_trace

from ._base import WhitespaceCommand


class Command(WhitespaceCommand):
    help = 'Merge per-channel traces into one aggregated interference trace'

    def add_arguments(self, parser):
        self.add_traces_argument(parser)
        self.add_output_argument(parser, required=True)

    def handle(self, *args, **options):
        merged = self.load_merged(options['traces'])
        write_trace(merged, options['output'])
        self.stdout.write(f"{len(merged)} records from channels {sorted(merged.source_channels)}")
