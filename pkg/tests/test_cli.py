import json
import math
import os
import tempfile
import unittest

from click.testing import CliRunner

from noncoercive.cli import EXIT_ERROR, EXIT_PASS, cli, parse_case_args
from noncoercive.errors import ConfigError
from noncoercive.storage import FileSystemStorage
from noncoercive.utils import read_csv


CURR_DIR = os.path.dirname(os.path.abspath(__file__))
CONFIG_PATH = os.path.join(CURR_DIR, '../resources/tests/configs')


def config_file(name):
    return os.path.join(CONFIG_PATH, name)


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.runner = CliRunner()
        self.temp_dir = tempfile.TemporaryDirectory()
        self.output = self.temp_dir.name

    def tearDown(self):
        self.temp_dir.cleanup()

    def invoke(self, *args):
        return self.runner.invoke(cli, list(args))

    def stored(self):
        return FileSystemStorage(self.output).retrieve_report_metas()


class TestVerify(CliTestCase):
    def test_dist_radial(self):
        result = self.invoke('verify', 'dist_radial', '-o', self.output, '--B', '0.5')
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        self.assertIn('distance', result.output)
        self.assertIn(': pass', result.output)
        metas = self.stored()
        self.assertEqual([meta.name for meta in metas], ['dist_radial'])
        record = FileSystemStorage(self.output).retrieve_report(metas[0])
        self.assertEqual(record.parameters['B'], 0.5)
        self.assertTrue(os.path.isfile(os.path.join(self.output, record.artifacts['distribution'])))

    def test_concentration(self):
        result = self.invoke('verify', 'concentration', '-o', self.output, '--n-list', '[1, 2]', '--cells=4096')
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)

    def test_errors(self):
        self.assertEqual(self.invoke('verify', 'nowhere', '-o', self.output).exit_code, EXIT_ERROR)
        result = self.invoke('verify', 'dist_radial', '-o', self.output, '--bogus', '1')
        self.assertEqual(result.exit_code, EXIT_ERROR)
        self.assertIn('invalid parameters', result.output)
        self.assertEqual(self.invoke('verify', 'dist_radial', '-o', self.output, '--cells').exit_code, EXIT_ERROR)
        self.assertEqual(self.stored(), [])

    def test_parse_case_args(self):
        self.assertEqual(parse_case_args(['--n-list', '[1, 2]', '--N=3', '--name', 'x']),
                         {'n_list': [1, 2], 'N': 3, 'name': 'x'})
        with self.assertRaises(ConfigError):
            parse_case_args(['cells'])


class TestSolve(CliTestCase):
    def test_solve(self):
        result = self.invoke('solve', config_file('lower_order.json'), '-o', self.output)
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        metas = self.stored()
        self.assertEqual([meta.name for meta in metas], ['lower-order'])
        report = FileSystemStorage(self.output).retrieve_report(metas[0])
        self.assertTrue(report.converged)
        self.assertEqual(report.truncation_level, 1)
        solution = os.path.join(self.output, FileSystemStorage.CURVE_DIR, metas[0].to_string(), 'solution.csv')
        header, data = read_csv(solution)
        self.assertEqual(header, ['r', 'u'])
        self.assertEqual(data.shape, (17, 2))
        self.assertEqual(data[-1, 1], 0.0)

    def test_zero_rhs(self):
        result = self.invoke('solve', config_file('lower_order.json'), '-o', self.output, '--name', 'zero',
                             '--set', 'problem.rhs={"kind": "zero"}')
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        meta = self.stored()[0]
        _, data = read_csv(os.path.join(self.output, FileSystemStorage.CURVE_DIR, meta.to_string(), 'solution.csv'))
        self.assertTrue((data[:, 1] == 0).all())

    def test_distance_too_large(self):
        result = self.invoke('solve', config_file('lower_order.json'), '-o', self.output,
                             '--set', 'problem.field.b={"kind": "inverse_radius", "amplitude": 1.0}',
                             '--set', 'problem.mesh={"kind": "radial", "grading": "geometric", "N": 3, "cells": 256}')
        self.assertEqual(result.exit_code, EXIT_ERROR)
        self.assertIn('DistanceTooLarge', result.output)
        self.assertEqual(self.stored(), [])

    def test_config_error(self):
        result = self.invoke('solve', config_file('broken.json'), '-o', self.output)
        self.assertEqual(result.exit_code, EXIT_ERROR)
        self.assertIn('line 3', result.output)
        result = self.invoke('solve', config_file('lower_order.json'), '-o', self.output,
                             '--set', 'solver.max_picard=0')
        self.assertEqual(result.exit_code, EXIT_ERROR)
        self.assertIn('solver.max_picard', result.output)

    def test_obstacle(self):
        result = self.invoke('obstacle', config_file('obstacle.json'), '-o', self.output)
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        report = FileSystemStorage(self.output).retrieve('constant-obstacle')
        self.assertTrue(report.converged)
        self.assertGreater(len(report.diagnostics['contact_nodes']), 0)
        self.assertIn('complementarity', report.diagnostics)

    def test_sweep(self):
        result = self.invoke('sweep', config_file('sweep.json'), '-o', self.output)
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        self.assertEqual(sorted(meta.name for meta in self.stored()),
                         ['load-sweep-000', 'load-sweep-001', 'load-sweep-002'])
        self.assertEqual(result.output.count('problem.rhs.f = '), 3)
        missing = self.invoke('sweep', config_file('lower_order.json'), '-o', self.output)
        self.assertEqual(missing.exit_code, EXIT_ERROR)
        self.assertIn('sweep.parameter', missing.output)


class TestLorentz(CliTestCase):
    def value(self, output, key):
        for line in output.splitlines():
            if line.startswith(key + ' = '):
                return line.split(' = ', 1)[1]
        raise AssertionError('{} not in {!r}'.format(key, output))

    def test_dist(self):
        result = self.invoke('lorentz', 'dist', '--profile', '{"kind": "inverse_radius"}', '--N', '2')
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        self.assertAlmostEqual(float(self.value(result.output, 'dist')), math.sqrt(math.pi), delta=1e-3)

    def test_distribution(self):
        path = os.path.join(self.output, 'distribution.csv')
        result = self.invoke('lorentz', 'distribution', '--profile', '{"kind": "inverse_radius"}', '--N', '2',
                             '--cells', '64', '--out', path)
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        header, data = read_csv(path)
        self.assertEqual(header, ['t', 'lambda', 't_lambda_1_p'])
        self.assertGreater(len(data), 0)

    def test_sobolev(self):
        result = self.invoke('lorentz', 'sobolev', '--N', '3', '--p', '2', '--override', '1.5')
        self.assertEqual(result.exit_code, EXIT_PASS, result.output)
        self.assertEqual(float(self.value(result.output, 'S')), 1.5)
        self.assertEqual(self.value(result.output, 'provenance'), 'user_override')

    def test_needs_one_source(self):
        self.assertEqual(self.invoke('lorentz', 'quasinorm').exit_code, EXIT_ERROR)


class TestConfigCommands(CliTestCase):
    def test_set_get_unset(self):
        path = os.path.join(self.output, 'run.json')
        self.assertEqual(self.invoke('config', 'set', '-f', path, 'problem.mesh.cells', '32').exit_code, EXIT_PASS)
        self.assertEqual(self.invoke('config', 'set', '-f', path, 'problem.mesh.kind', 'radial').exit_code, EXIT_PASS)
        with open(path) as f:
            self.assertEqual(json.load(f), {'problem': {'mesh': {'cells': 32, 'kind': 'radial'}}})

        result = self.invoke('config', 'get', '-f', path, 'problem.mesh.cells')
        self.assertEqual(result.output.strip(), 'problem.mesh.cells = 32')
        result = self.invoke('config', 'list', '-f', path)
        self.assertEqual(result.output.splitlines(), ['problem.mesh.cells = 32', 'problem.mesh.kind = radial'])

        self.invoke('config', 'unset', '-f', path, 'problem.mesh.cells')
        self.assertEqual(self.invoke('config', 'get', '-f', path, 'problem.mesh.cells').exit_code, EXIT_ERROR)
        self.assertEqual(self.invoke('config', 'list', '-f', os.path.join(self.output, 'none.json')).exit_code,
                         EXIT_ERROR)


class TestListShow(CliTestCase):
    def test_list_and_show(self):
        self.assertIn('No reports found.', self.invoke('list', '-o', self.output).output)
        self.invoke('verify', 'dist_radial', '-o', self.output)
        meta = self.stored()[0]
        listing = self.invoke('list', '-o', self.output)
        self.assertEqual(listing.output.strip(), meta.checksum + '  dist_radial')
        shown = self.invoke('show', meta.checksum[:8], '-o', self.output)
        self.assertEqual(shown.exit_code, EXIT_PASS)
        self.assertEqual(json.loads(shown.output)['case'], 'dist_radial')
        self.assertEqual(self.invoke('show', 'nothing', '-o', self.output).exit_code, EXIT_ERROR)
