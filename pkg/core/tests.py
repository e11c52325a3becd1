import os
import tempfile

import numpy as np
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from utils.utils import format_number, is_strictly_decreasing, make_rng, parse_float_list
from .decorators import CONFIG_ERROR, RUNTIME_ERROR, exit_codes, one_line
from .exceptions import CflViolation, ConvergenceFailure, InvalidParameter, NonFiniteState
from .storage import ArtifactStorage


class ArtifactStorageTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.storage = ArtifactStorage(location=self._tmp.name)

    def test_writes_into_subdirectories(self):
        name = self.storage.write_text('snapshots/a.csv', 'x,w\n')
        self.assertEqual(name, 'snapshots/a.csv')
        with open(self.storage.path(name), encoding='utf-8') as handle:
            self.assertEqual(handle.read(), 'x,w\n')

    def test_same_name_overwrites(self):
        self.storage.write_text('timeseries.csv', 'old')
        name = self.storage.write_text('timeseries.csv', 'new')
        self.assertEqual(name, 'timeseries.csv')
        with open(self.storage.path(name), encoding='utf-8') as handle:
            self.assertEqual(handle.read(), 'new')
        self.assertEqual(os.listdir(self._tmp.name), ['timeseries.csv'])

    def test_bytes(self):
        self.storage.write_bytes('plot.svg', b'<svg/>')
        with open(self.storage.path('plot.svg'), 'rb') as handle:
            self.assertEqual(handle.read(), b'<svg/>')


class FakeCommand:
    @exit_codes
    def handle(self, error=None):
        if error:
            raise error
        return 'done'


class ExitCodeTests(SimpleTestCase):
    def test_success_passes_through(self):
        self.assertEqual(FakeCommand().handle(), 'done')

    def test_invalid_parameters_exit_2(self):
        for error in (InvalidParameter('kernel.radius: must be positive'), CflViolation('dt too large')):
            with self.assertRaises(CommandError) as caught:
                FakeCommand().handle(error)
            self.assertEqual(caught.exception.returncode, CONFIG_ERROR)
            self.assertTrue(str(caught.exception).startswith('config error:'))

    def test_runtime_failures_exit_3(self):
        for error in (NonFiniteState(12, 0.5), ConvergenceFailure('window 3 stalled', last_norm=1e-3, kappa=0.2)):
            with self.assertLogs('core.decorators', level='ERROR'):
                with self.assertRaises(CommandError) as caught:
                    FakeCommand().handle(error)
            self.assertEqual(caught.exception.returncode, RUNTIME_ERROR)

    def test_one_line(self):
        self.assertEqual(one_line(InvalidParameter('a\n  b')), 'a b')
        self.assertEqual(one_line(NonFiniteState(3, 0.25)), 'non-finite state at step 3 (t=0.25)')


class UtilsTests(SimpleTestCase):
    def test_format_number(self):
        self.assertEqual(format_number(0.1), '0.10000000000000001')
        self.assertEqual(float(format_number(np.pi)), np.pi)
        self.assertEqual(format_number(np.int64(7)), '7')
        self.assertEqual(format_number(np.bool_(True)), 'true')
        self.assertEqual(format_number(False), 'false')

    def test_parse_float_list(self):
        self.assertEqual(parse_float_list('0.4, 0.2,0.1,'), [0.4, 0.2, 0.1])
        with self.assertRaises(ValueError):
            parse_float_list('0.4,x')

    def test_rng_is_seeded(self):
        np.testing.assert_array_equal(make_rng(3).standard_normal(4), make_rng(3).standard_normal(4))

    def test_strictly_decreasing(self):
        self.assertTrue(is_strictly_decreasing([0.4, 0.2, 0.1]))
        self.assertFalse(is_strictly_decreasing([0.4, 0.4]))
