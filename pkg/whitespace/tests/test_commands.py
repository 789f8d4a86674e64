import csv
import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from whitespace.trace_io import extract_iats, load_trace, trace_span, window_trace, write_trace

from .factories import jittered_trace, two_regime_trace, write_channel_split


class CommandTestCase(SimpleTestCase):
    """Runs commands against a 900 s two-regime trace split over channels 1 and 6."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls._tmp = tempfile.TemporaryDirectory()
        cls.dir = Path(cls._tmp.name)
        cls.trace = two_regime_trace(900, seed=7)
        cls.channel_paths = write_channel_split(cls.trace, cls.dir)

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()
        super().tearDownClass()

    def path(self, name) -> str:
        return str(self.dir / name)

    def call(self, *args) -> str:
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue()

    def read_json(self, name):
        return json.loads(Path(self.path(name)).read_text(encoding='utf-8'))


class PipelineCommandTests(CommandTestCase):

    def run_pipeline(self, output):
        self.call('pipeline', '--traces', *self.channel_paths, '--x', '300', '--k', '1', '--z', '300',
                  '--t', '5', '--seed', '7', '-o', self.path(output))

    def test_report_and_reproducibility(self):
        self.run_pipeline('first.json')
        self.run_pipeline('second.json')

        report = self.read_json('first.json')
        for key in ('confusion', 'hit_rate', 'fdr', 'precision', 'f1', 'rmse_ms', 'rmse_pct', 'config'):
            self.assertIn(key, report)
        self.assertEqual(set(report['confusion']), {'tp', 'fp', 'fn', 'tn'})
        self.assertEqual(report['config']['seed'], 7)
        self.assertEqual(Path(self.path('first.json')).read_bytes(), Path(self.path('second.json')).read_bytes())

    def test_slot_csv(self):
        self.call('pipeline', '--traces', *self.channel_paths, '--x', '300', '--z', '300', '--format', 'csv',
                  '-o', self.path('slots.csv'))
        with open(self.path('slots.csv'), encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
        self.assertTrue(rows)
        self.assertIn(rows[0]['prediction'], ('Free', 'Busy'))
        self.assertIn(rows[0]['truth'], ('Free', 'Busy'))

    def test_pipeline_matches_chained_commands(self):
        self.call('pipeline', '--traces', *self.channel_paths, '--x', '300', '--z', '300', '--t', '5',
                  '--seed', '7', '--format', 'csv', '-o', self.path('pipeline_slots.csv'))
        self.run_pipeline('pipeline_report.json')

        self.call('merge', '--traces', *self.channel_paths, '-o', self.path('chain_merged.csv'))
        self.call('stats', '--traces', *self.channel_paths, '--x', '300', '-o', self.path('chain_stats.json'))
        self.call('fit_mmpp', '--stats', self.path('chain_stats.json'), '-o', self.path('chain_mmpp.json'))
        self.call('train_hmm', '--traces', *self.channel_paths, '--mmpp', self.path('chain_mmpp.json'),
                  '--start', '300', '--z', '300', '--t', '5', '-o', self.path('chain_hmm.json'))
        self.call('predict', '--traces', *self.channel_paths, '--hmm', self.path('chain_hmm.json'),
                  '--start', '600', '--t', '5', '--seed', '7', '-o', self.path('chain_slots.csv'))
        self.assertEqual(Path(self.path('chain_slots.csv')).read_bytes(),
                         Path(self.path('pipeline_slots.csv')).read_bytes())

        merged = load_trace(self.path('chain_merged.csv'))
        start, end = trace_span(merged)
        holdout_start = start + 600 * 10 ** 6
        holdout = extract_iats(window_trace(merged, holdout_start, end - holdout_start))
        self.call('generate', '--model', 'mmpp', '--params', self.path('chain_mmpp.json'),
                  '--iats', str(holdout.count), '--seed', '7', '-o', self.path('chain_modeled.csv'))
        chained = json.loads(self.call('evaluate', '--slots', self.path('chain_slots.csv'),
                                       '--model-trace', self.path('chain_modeled.csv'),
                                       '--test-trace', self.path('chain_merged.csv'), '--test-start', '600'))

        report = self.read_json('pipeline_report.json')
        self.assertEqual(chained['confusion'], report['confusion'])
        self.assertAlmostEqual(chained['rmse_ms'], report['rmse_ms'], places=9)

    def test_environment_preset_needs_long_trace(self):
        # home preset: x = 500 s, z = 960 s
        with self.assertRaises(CommandError) as ctx:
            self.call('pipeline', '--traces', *self.channel_paths, '--environment', 'home')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_unsupported_regime(self):
        path = self.path('periodic.csv')
        write_trace(jittered_trace(10.0, 1.0, 30, seed=1), path)
        with self.assertRaises(CommandError) as ctx:
            self.call('pipeline', '--traces', path, '--x', '10', '--z', '10')
        self.assertEqual(ctx.exception.returncode, 3)
        self.assertIn('classify_branch', str(ctx.exception))

    def test_missing_trace(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('pipeline', '--traces', self.path('absent.csv'))
        self.assertEqual(ctx.exception.returncode, 2)

    def test_bad_slot_period(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('pipeline', '--traces', *self.channel_paths, '--t', '0')
        self.assertEqual(ctx.exception.returncode, 2)


class StepCommandTests(CommandTestCase):
    """Each stage run on its own, feeding the next stage's files."""

    def test_ingest(self):
        raw = self.path('raw.csv')
        Path(raw).write_text("ts_us,channel,len_bytes\n200,1,60\n100,1,60\n300,6,\n", encoding='utf-8')
        self.call('ingest', '--trace', raw, '-o', self.path('clean.csv'), '--diagnostics', self.path('diag.json'))

        self.assertEqual(load_trace(self.path('clean.csv')).timestamps_us.tolist(), [100, 200, 300])
        diagnostics = self.read_json('diag.json')
        self.assertEqual(diagnostics['records'], 3)
        self.assertEqual(diagnostics['channels'], [1, 6])

    def test_ingest_malformed(self):
        raw = self.path('bad.csv')
        Path(raw).write_text("abc,1\n", encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            self.call('ingest', '--trace', raw, '-o', self.path('never.csv'))
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('row 1', str(ctx.exception))

    def test_merge(self):
        self.call('merge', '--traces', *self.channel_paths, '-o', self.path('merged.csv'))
        merged = load_trace(self.path('merged.csv'))
        self.assertEqual(len(merged), len(self.trace))
        self.assertEqual(merged.source_channels, frozenset({1, 6}))

    def test_stats_fit_generate_chain(self):
        self.call('stats', '--traces', *self.channel_paths, '-o', self.path('stats.json'))
        stats = self.read_json('stats.json')
        self.assertIn(stats['branch'], ('Hyperexponential', 'Coxian'))

        self.call('fit_mmpp', '--stats', self.path('stats.json'), '-o', self.path('mmpp.json'))
        mmpp = self.read_json('mmpp.json')
        for key in ('lambda1', 'lambda2', 'r1', 'r2', 'pi', 'y_lb_ms', 'phase'):
            self.assertIn(key, mmpp)
        self.assertAlmostEqual(sum(mmpp['pi']), 1.0)

        message = self.call('generate', '--model', 'mmpp', '--params', self.path('mmpp.json'), '--duration', '60',
                            '--seed', '1', '-o', self.path('generated.csv'))
        self.assertIn('arrivals', message)
        self.assertGreater(len(load_trace(self.path('generated.csv'))), 100)

    def test_stats_to_stdout(self):
        stats = json.loads(self.call('stats', '--traces', *self.channel_paths, '--x', '300'))
        self.assertGreater(stats['m1_ms'], 0)

    def test_fit_mmpp_needs_input(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('fit_mmpp')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_fit_pareto_and_generate(self):
        self.call('fit_pareto', '--traces', *self.channel_paths, '-o', self.path('pareto.json'))
        pareto = self.read_json('pareto.json')
        self.assertEqual(pareto['scale_ms'], 4.256)
        self.assertGreater(pareto['shape'], 0)

        self.call('generate', '--model', 'pareto', '--params', self.path('pareto.json'), '--duration', '10',
                  '-o', self.path('pareto.csv'))
        self.assertFalse(load_trace(self.path('pareto.csv')).is_empty)

    def test_train_predict_evaluate(self):
        self.call('fit_mmpp', '--traces', *self.channel_paths, '-o', self.path('mmpp_full.json'))
        self.call('train_hmm', '--traces', *self.channel_paths, '--mmpp', self.path('mmpp_full.json'),
                  '--y-ms', '1000', '--t', '5', '--z', '300', '-o', self.path('hmm.json'))
        hmm = self.read_json('hmm.json')
        self.assertEqual(hmm['n_observations'], 60)
        self.assertEqual(hmm['y_ms'], 1000.0)

        self.call('predict', '--traces', *self.channel_paths, '--hmm', self.path('hmm.json'), '--start', '300',
                  '-o', self.path('predicted.csv'))
        with open(self.path('predicted.csv'), encoding='utf-8', newline='') as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 120)

        report = json.loads(self.call('evaluate', '--slots', self.path('predicted.csv')))
        self.assertEqual(sum(report['confusion'].values()), 120)
        baseline = json.loads(self.call('evaluate', '--slots', self.path('predicted.csv'),
                                        '--predictor', 'random_access'))
        self.assertEqual(sum(baseline['confusion'].values()), 120)

    def test_calibrate_x(self):
        self.call('calibrate_x', '--traces', *self.channel_paths, '--x-grid', '300', '450', '--holdout', '300',
                  '-o', self.path('x.json'))
        table = self.read_json('x.json')
        self.assertEqual(table['parameter'], 'x_s')
        self.assertEqual(len(table['rows']), 2)

    def test_calibrate_z(self):
        self.call('fit_mmpp', '--traces', *self.channel_paths, '-o', self.path('mmpp_z.json'))
        self.call('calibrate_z', '--traces', *self.channel_paths, '--mmpp', self.path('mmpp_z.json'),
                  '--z-grid', '60', '120', '--y-ms', '1000', '--per-channel', '-o', self.path('z.json'))
        table = self.read_json('z.json')
        self.assertEqual([row['z_s'] for row in table['rows']], [60.0, 120.0])
        self.assertEqual(table['rows'][0]['channels'], 2)
