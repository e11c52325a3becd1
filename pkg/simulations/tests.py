import csv
import os
import tempfile
from io import StringIO

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from core.exceptions import InvalidParameter
from evolution.services import cfl_limit
from utils.utils import format_number
from .config import DEFAULTS, load_config, manifest_text, parse_config_text, parse_overrides, validate_config
from .models import InitKind
from .services import build_generator, initial_state


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


def column(path, name):
    return np.array([float(row[name]) for row in read_rows(path)])


def read_manifest(directory):
    with open(os.path.join(directory, 'manifest.cfg'), encoding='utf-8') as handle:
        return parse_config_text(handle.read())


class ConfigParsingTests(SimpleTestCase):
    def test_comments_and_blank_lines(self):
        values = parse_config_text("# header\n\nkernel.family = uniform  # trailing\n  seed=7\n")
        self.assertEqual(values, {'kernel.family': 'uniform', 'seed': '7'})

    def test_malformed_line(self):
        with self.assertRaisesMessage(InvalidParameter, 'line 2'):
            parse_config_text("seed = 1\nkernel.family triangle\n")

    def test_duplicate_key(self):
        with self.assertRaisesMessage(InvalidParameter, "duplicate key 'seed'"):
            parse_config_text("seed = 1\nseed = 2\n")

    def test_overrides(self):
        self.assertEqual(parse_overrides(['grid.n_local=50', 'time.dt = auto']),
                         {'grid.n_local': '50', 'time.dt': 'auto'})
        with self.assertRaises(InvalidParameter):
            parse_overrides(['grid.n_local'])

    def test_defaults_validate(self):
        config = validate_config({})
        self.assertEqual(config.kernel_family, 'triangle')
        self.assertEqual(config.time_dt, 'auto')
        self.assertEqual(config.grid_n_nonlocal, 200)
        self.assertEqual(config.init_kind, InitKind.GAUSSIAN)

    def test_shipped_default_config(self):
        config = load_config(settings.SIMULATION_DEFAULT_CONFIG)
        self.assertEqual(config.time_dt, 1e-3)
        self.assertEqual(config.output_dir, '')
        self.assertEqual((config.grid_n_local, config.grid_n_nonlocal), (200, 200))

    def test_unknown_key(self):
        with self.assertRaisesMessage(InvalidParameter, "unknown key 'kernel.colour'"):
            validate_config({'kernel.colour': 'red'})

    def test_manifest_reparses_to_the_same_config(self):
        config = validate_config({'time.dt': '0.00123', 'kernel.family': 'epanechnikov', 'seed': '11'})
        again = validate_config(parse_config_text(manifest_text(config)))
        self.assertEqual(again, config)

    def test_manifest_substitutes_resolved_values(self):
        config = validate_config({})
        text = manifest_text(config, time_dt=0.1 + 0.2)
        self.assertIn(f"time.dt = {format_number(0.1 + 0.2)}", text)
        self.assertEqual(float(parse_config_text(text)['time.dt']), 0.1 + 0.2)

    def test_every_key_is_in_the_manifest(self):
        keys = parse_config_text(manifest_text(validate_config({}))).keys()
        self.assertEqual(list(keys), list(DEFAULTS))


class SimConfigFormTests(SimpleTestCase):
    def assertRejects(self, raw, key):
        with self.assertRaises(InvalidParameter) as caught:
            validate_config(raw)
        self.assertIn(key, str(caught.exception))

    def test_field_errors_name_the_key(self):
        self.assertRejects({'kernel.family': 'gaussian'}, 'kernel.family')
        self.assertRejects({'kernel.radius': '-1'}, 'kernel.radius')
        self.assertRejects({'kernel.epsilon': '0'}, 'kernel.epsilon')
        self.assertRejects({'grid.n_local': '3'}, 'grid.n_local')
        self.assertRejects({'time.horizon': 'soon'}, 'time.horizon')
        self.assertRejects({'time.dt': '-1e-3'}, 'time.dt')
        self.assertRejects({'time.scheme': 'rk4'}, 'time.scheme')
        self.assertRejects({'init.width': '0'}, 'init.width')

    def test_under_resolved_kernel(self):
        self.assertRejects({'kernel.epsilon': '0.05', 'grid.n_nonlocal': '40'}, 'grid.n_nonlocal')
        config = validate_config({'kernel.epsilon': '0.05', 'grid.n_nonlocal': '80'})
        self.assertEqual(config.grid_n_nonlocal, 80)

    def test_explicit_dt_above_cfl(self):
        raw = {'time.scheme': 'explicit', 'grid.n_local': '20', 'grid.n_nonlocal': '20'}
        limit = cfl_limit(build_generator(validate_config(raw)))
        self.assertRejects({**raw, 'time.dt': repr(2 * limit)}, 'time.dt')
        self.assertEqual(validate_config({**raw, 'time.dt': repr(limit)}).time_dt, limit)

    def test_picard_window_bound(self):
        self.assertRejects({'picard.window': '0.5'}, 'picard.window')
        self.assertEqual(validate_config({'picard.window': '0.01'}).picard_window, 0.01)

    def test_picard_dt_must_divide_the_window(self):
        self.assertRejects({'time.scheme': 'picard', 'picard.window': '0.01', 'time.dt': '0.003'}, 'time.dt')
        config = validate_config({'time.scheme': 'picard', 'picard.window': '0.01', 'time.dt': '0.0025'})
        self.assertEqual(config.time_dt, 0.0025)

    def test_file_init_needs_a_path(self):
        self.assertRejects({'init.kind': 'file'}, 'init.path')
        self.assertRejects({'init.kind': 'file', 'init.path': '/nonexistent/w0.csv'}, 'init.path')


class InitialStateTests(SimpleTestCase):
    def test_step(self):
        config = validate_config({'init.kind': 'step', 'grid.n_local': '10', 'grid.n_nonlocal': '10'})
        w = initial_state(config, build_generator(config).grid)
        np.testing.assert_array_equal(w.u, 1.0)
        np.testing.assert_array_equal(w.v, 0.0)

    def test_cosine(self):
        config = validate_config({'init.kind': 'cosine', 'init.mode': '2', 'grid.n_local': '10', 'grid.n_nonlocal': '10'})
        w = initial_state(config, build_generator(config).grid)
        self.assertAlmostEqual(w.values[0], 1.0)
        self.assertAlmostEqual(w.interface_value, -1.0)


class CommandTestCase(SimpleTestCase):
    base = {
        'grid.n_local': '40',
        'grid.n_nonlocal': '40',
        'time.dt': '1e-3',
        'time.horizon': '1',
    }

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name
        self.addCleanup(self._tmp.cleanup)

    def write_config(self, **values):
        values = {**self.base, **{key.replace('__', '.'): value for key, value in values.items()}}
        path = os.path.join(self.tmp, 'run.cfg')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(''.join(f"{key} = {value}\n" for key, value in values.items()))
        return path

    def out(self, name='out'):
        return os.path.join(self.tmp, name)

    def run_command(self, name, *args, **options):
        stdout = StringIO()
        call_command(name, *args, stdout=stdout, stderr=StringIO(), no_color=True, **options)
        return stdout.getvalue()

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as caught:
            self.run_command(name, **options)
        self.assertEqual(caught.exception.returncode, code, msg=str(caught.exception))
        return caught.exception


class SimulateCommandTests(CommandTestCase):
    def test_constant_start_stays_at_its_mean(self):
        config = self.write_config(init__kind='constant', init__value='0.3')
        self.run_command('simulate', config=config, out=self.out())
        dist = column(os.path.join(self.out(), 'timeseries.csv'), 'dist_to_mean')
        self.assertLessEqual(dist.max(), 1e-12)
        self.assertFalse(os.path.exists(os.path.join(self.out(), 'decay.csv')))

    def test_step_start_keeps_its_mass(self):
        config = self.write_config(init__kind='step', time__horizon='5')
        self.run_command('simulate', config=config, out=self.out())
        masses = column(os.path.join(self.out(), 'timeseries.csv'), 'mass')
        self.assertLessEqual(np.abs(masses - 1.0).max(), 1e-11)

    def test_artifacts(self):
        config = self.write_config(time__snapshot_stride='250')
        output = self.run_command('simulate', config=config, out=self.out(), svg=True)
        out = self.out()
        header = read_rows(os.path.join(out, 'timeseries.csv'))[0].keys()
        self.assertEqual(list(header), ['t', 'mass', 'energy_total', 'energy_local', 'energy_nonlocal',
                                        'energy_coupling', 'dist_to_mean'])
        self.assertEqual(len(read_rows(os.path.join(out, 'timeseries.csv'))), 1001)
        index = read_rows(os.path.join(out, 'snapshots', 'index.csv'))
        np.testing.assert_allclose([float(row['t']) for row in index], [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-12)
        snapshot = read_rows(os.path.join(out, 'snapshots', 'snapshot_0000.csv'))
        self.assertEqual(len(snapshot), 81)
        self.assertEqual(snapshot[40]['region'], 'local')
        self.assertEqual(snapshot[41]['region'], 'nonlocal')
        decay = read_rows(os.path.join(out, 'decay.csv'))
        self.assertEqual(list(decay[0]), ['fitted_rate', 'beta1', 'lambda2', 'r_squared', 'bound_satisfied'])
        self.assertTrue(os.path.exists(os.path.join(out, 'decay.svg')))
        self.assertIn('timeseries.csv', output)

    def test_auto_dt_is_recorded_for_explicit_runs(self):
        config_path = self.write_config(time__scheme='explicit', time__dt='auto', time__horizon='0.05')
        self.run_command('simulate', config=config_path, out=self.out())
        manifest = read_manifest(self.out())
        limit = cfl_limit(build_generator(load_config(config_path)))
        self.assertEqual(manifest['time.dt'], format_number(limit))
        self.assertEqual(float(manifest['time.dt']), limit)

    def test_manifest_reproduces_the_run(self):
        config = self.write_config(time__scheme='explicit', time__dt='auto', time__horizon='0.2')
        self.run_command('simulate', config=config, out=self.out('first'))
        manifest = os.path.join(self.out('first'), 'manifest.cfg')
        self.run_command('simulate', config=manifest, out=self.out('second'))
        for name in ('timeseries.csv', 'snapshots/snapshot_0000.csv'):
            with open(os.path.join(self.out('first'), name), 'rb') as a, open(os.path.join(self.out('second'), name), 'rb') as b:
                self.assertEqual(a.read(), b.read(), msg=name)

    def test_picard_run(self):
        config = self.write_config(time__scheme='picard', time__dt='auto', time__horizon='0.1')
        self.run_command('simulate', config=config, out=self.out())
        manifest = read_manifest(self.out())
        self.assertAlmostEqual(float(manifest['time.dt']) * 32, float(manifest['picard.window']))

    def test_set_overrides_the_file(self):
        config = self.write_config()
        self.run_command('simulate', config=config, out=self.out(), overrides=['init.kind=constant'])
        dist = column(os.path.join(self.out(), 'timeseries.csv'), 'dist_to_mean')
        self.assertLessEqual(dist.max(), 1e-12)

    def test_file_start(self):
        config = self.write_config(time__horizon='0.01')
        self.run_command('simulate', config=config, out=self.out('first'))
        final = os.path.join(self.out('first'), 'snapshots', 'snapshot_0000.csv')
        config = self.write_config(init__kind='file', init__path=final, time__horizon='0.01')
        self.run_command('simulate', config=config, out=self.out('second'))
        first = column(final, 'w')
        masses = column(os.path.join(self.out('second'), 'timeseries.csv'), 'mass')
        self.assertAlmostEqual(masses[0], float(np.dot(build_generator(load_config(config)).grid.weights, first)))

    def test_config_errors_exit_2(self):
        error = self.assertExitCode(2, 'simulate', config=self.write_config(kernel__shape='round'), out=self.out())
        self.assertIn('kernel.shape', str(error))
        self.assertExitCode(2, 'simulate', config=os.path.join(self.tmp, 'missing.cfg'), out=self.out())
        error = self.assertExitCode(
            2, 'simulate', config=self.write_config(time__scheme='explicit', time__dt='1'), out=self.out(),
        )
        self.assertIn('time.dt', str(error))

    def test_runtime_errors_exit_3(self):
        config = self.write_config(time__scheme='picard', time__dt='auto', picard__max_iters='1', time__horizon='0.1')
        error = self.assertExitCode(3, 'simulate', config=config, out=self.out())
        self.assertIn('did not converge', str(error))


class SpectrumCommandTests(CommandTestCase):
    def test_gap_is_positive(self):
        self.run_command('spectrum', config=self.write_config(spectrum__n_samples='50'), out=self.out())
        row = read_rows(os.path.join(self.out(), 'spectrum.csv'))[0]
        self.assertEqual(list(row), ['n_local', 'n_nonlocal', 'epsilon', 'beta1', 'lambda2', 'residual', 'k_estimate'])
        self.assertGreater(float(row['beta1']), 0.01)
        self.assertEqual(float(row['lambda2']), 2 * float(row['beta1']))
        self.assertGreater(float(row['k_estimate']), 0.0)

    def test_same_seed_same_estimate(self):
        config = self.write_config(spectrum__n_samples='50', seed='5')
        self.run_command('spectrum', config=config, out=self.out('a'))
        self.run_command('spectrum', config=config, out=self.out('b'))
        a = read_rows(os.path.join(self.out('a'), 'spectrum.csv'))[0]
        b = read_rows(os.path.join(self.out('b'), 'spectrum.csv'))[0]
        self.assertEqual(a['k_estimate'], b['k_estimate'])

    def test_pure_heat(self):
        config = self.write_config(grid__n_local='400')
        self.run_command('spectrum', config=config, out=self.out(), pure_heat=True, svg=True)
        row = read_rows(os.path.join(self.out(), 'spectrum.csv'))[0]
        self.assertAlmostEqual(float(row['beta1']), np.pi**2 / 8, delta=0.02 * np.pi**2 / 8)
        self.assertEqual(row['k_estimate'], '')
        self.assertTrue(os.path.exists(os.path.join(self.out(), 'spectrum.svg')))


class SweepCommandTests(CommandTestCase):
    def test_error_decreases(self):
        config = self.write_config(
            grid__n_local='100', grid__n_nonlocal='200', time__dt='5e-4', time__horizon='0.5',
            time__snapshot_stride='10', init__width='0.2',
        )
        self.run_command('sweep_epsilon', config=config, out=self.out(), eps='0.4,0.2,0.1,0.05', svg=True)
        path = os.path.join(self.out(), 'sweep.csv')
        self.assertEqual(list(read_rows(path)[0]), ['epsilon', 'n_nonlocal', 'dt', 'sup_error_l2', 'beta1_eps'])
        errors = column(path, 'sup_error_l2')
        self.assertTrue(all(b < a for a, b in zip(errors, errors[1:])), msg=f"errors {errors}")
        self.assertTrue(os.path.exists(os.path.join(self.out(), 'sweep.svg')))

    def test_constant_start(self):
        config = self.write_config(init__kind='constant', time__horizon='0.1', grid__n_local='20', grid__n_nonlocal='20')
        self.run_command('sweep_epsilon', config=config, out=self.out(), eps='0.4,0.2')
        self.assertLessEqual(column(os.path.join(self.out(), 'sweep.csv'), 'sup_error_l2').max(), 1e-10)

    def test_epsilons_must_decrease(self):
        self.assertExitCode(2, 'sweep_epsilon', config=self.write_config(), out=self.out(), eps='0.1,0.2')
        self.assertExitCode(2, 'sweep_epsilon', config=self.write_config(), out=self.out(), eps='0.4,small')


class VerifyCommandTests(CommandTestCase):
    base = {**CommandTestCase.base, 'time.horizon': '10'}

    def test_all_checks_pass(self):
        output = self.run_command('verify', config=self.write_config(), out=self.out())
        self.assertIn('all', output)
        self.assertNotIn('FAIL', output)
        statuses = {row['check']: row['status'] for row in read_rows(os.path.join(self.out(), 'verify.csv'))}
        self.assertEqual(set(statuses.values()), {'PASS'})
        self.assertIn('mass conservation', statuses)

    def test_corrupted_coupling_is_caught(self):
        error = self.assertExitCode(1, 'verify', config=self.write_config(), out=self.out(), corrupt_coupling=True)
        self.assertIn('mass conservation', str(error))
        statuses = {row['check']: row['status'] for row in read_rows(os.path.join(self.out(), 'verify.csv'))}
        self.assertEqual(statuses['mass conservation'], 'FAIL')

    def test_invalid_config_exits_2(self):
        config = self.write_config(time__scheme='explicit', time__dt='1')
        self.assertExitCode(2, 'verify', config=config, out=self.out())
