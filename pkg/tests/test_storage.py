import os
import tempfile
import unittest

from noncoercive.cases import CaseResult
from noncoercive.report import SolveReport
from noncoercive.storage import FileSystemStorage, NoUniqueMatchError, ReportMeta
from noncoercive.utils import read_csv, text_checksum


def make_result(value=1.0):
    result = CaseResult('demo', {'cells': 8})
    result.compare('value', value, 1.0, 'closed form', rtol=1e-3)
    result.add_curve('errors', ['h', 'error'], [[0.5, 0.25], [1e-2, 2.5e-3]])
    return result


class TestReportMeta(unittest.TestCase):
    def test_string(self):
        meta = ReportMeta('obstacle_radial', '0123abcd')
        self.assertEqual(meta.to_string(), 'obstacle_radial_0123abcd')
        self.assertEqual(ReportMeta.from_string(meta.to_string()), meta)


class TestFileSystemStorage(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.storage = FileSystemStorage(self.temp_dir.name)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_store(self):
        result = make_result()
        checksum = text_checksum(result.to_json())
        meta = self.storage.store('demo', result)
        self.assertEqual(meta.checksum, checksum)
        self.assertTrue(self.storage.has_report(meta))

        relative = os.path.join(FileSystemStorage.CURVE_DIR, meta.to_string(), 'errors.csv')
        self.assertEqual(result.artifacts, {'errors': relative})
        header, data = read_csv(os.path.join(self.temp_dir.name, relative))
        self.assertEqual(header, ['h', 'error'])
        self.assertEqual(data.shape, (2, 2))

        stored = self.storage.retrieve_report(meta)
        self.assertIsInstance(stored, CaseResult)
        self.assertEqual(stored.artifacts, result.artifacts)
        self.assertEqual(stored.computed, result.computed)

    def test_same_computation_same_file(self):
        first = self.storage.store('demo', make_result())
        second = self.storage.store('demo', make_result())
        self.assertEqual(first, second)
        self.assertEqual(len(self.storage.retrieve_report_metas()), 1)

    def test_retrieve(self):
        meta = self.storage.store('demo', make_result())
        self.storage.store('other', make_result(2.0))
        self.assertEqual(self.storage.retrieve(meta.checksum[:6]).computed['value'], 1.0)
        self.assertEqual(self.storage.retrieve('other').computed['value'], 2.0)
        with self.assertRaises(FileNotFoundError):
            self.storage.retrieve('missing')

        self.storage.store('demo', make_result(1.0001))
        with self.assertRaises(NoUniqueMatchError):
            self.storage.retrieve('demo')

    def test_solve_report(self):
        report = SolveReport(truncation_level=4)
        report.flag('converged')
        meta = self.storage.store('solve', report, {'history': report.history_columns()})
        stored = self.storage.retrieve(meta.checksum)
        self.assertIsInstance(stored, SolveReport)
        self.assertTrue(stored.converged)
        self.assertEqual(stored.truncation_level, 4)

    def test_invalid_name(self):
        with self.assertRaises(ValueError):
            self.storage.store('', make_result())
        with self.assertRaises(ValueError):
            self.storage.store(os.path.join('a', 'b'), make_result())

    def test_empty_storage(self):
        self.assertEqual(self.storage.retrieve_report_metas(), [])
        with self.assertRaises(FileNotFoundError):
            self.storage.retrieve_report(ReportMeta('demo', 'abc'))
