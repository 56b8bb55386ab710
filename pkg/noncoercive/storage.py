from abc import ABC, abstractmethod
import json
import logging
import os

from .cases import CaseResult
from .report import SolveReport
from .utils import text_checksum, write_csv


logger = logging.getLogger(__name__)


class ReportMeta:
    """
    Identifies a stored document by its name and the xxh64 checksum of its JSON text.
    """
    SEPARATOR = '_'

    def __init__(self, name, checksum):
        self.name = name
        self.checksum = checksum

    def to_string(self):
        return self.name + self.SEPARATOR + self.checksum

    @staticmethod
    def from_string(string):
        name, checksum = string.rsplit(ReportMeta.SEPARATOR, 1)
        return ReportMeta(name, checksum)

    def __eq__(self, other):
        return isinstance(other, ReportMeta) and self.to_string() == other.to_string()

    def __repr__(self):
        return 'ReportMeta({!r}, {!r})'.format(self.name, self.checksum)


def record_from_json(text):
    """
    Reads a stored document back as a :class:`~noncoercive.cases.CaseResult` or a
    :class:`~noncoercive.report.SolveReport`.
    """
    d = json.loads(text)
    if 'case' in d:
        return CaseResult.from_dict(d)
    return SolveReport.from_dict(d)


class Storage(ABC):
    @abstractmethod
    def has_report(self, meta):
        pass

    @abstractmethod
    def store_report(self, meta, text):
        pass

    @abstractmethod
    def store_curves(self, meta, curves):
        pass

    @abstractmethod
    def retrieve_report_metas(self):
        pass

    @abstractmethod
    def retrieve_report(self, meta):
        pass

    def store(self, name, record, curves=None):
        """
        Stores ``record`` (anything with ``to_json``) and its curves.

        The checksum is taken over the JSON text before artifact paths are filled in, so the
        same computation always lands in the same file.

        :param curves: ``{name: (header, columns)}``; defaults to ``record.curves``.
        :returns: the :class:`ReportMeta` of the stored document.
        """
        if not name or os.sep in name:
            raise ValueError('invalid report name: {!r}'.format(name))
        if curves is None:
            curves = getattr(record, 'curves', {})
        meta = ReportMeta(name, text_checksum(record.to_json()))
        if self.has_report(meta):
            logger.info('report %s already stored', meta.to_string())
        paths = self.store_curves(meta, curves)
        if hasattr(record, 'artifacts'):
            record.artifacts.update(paths)
        self.store_report(meta, record.to_json())
        return meta

    def _unique(self, identifier, matches):
        if len(matches) == 0:
            raise FileNotFoundError(identifier)
        elif len(matches) == 1:
            return self.retrieve_report(matches[0])
        raise NoUniqueMatchError(identifier)

    def retrieve_by_checksum(self, checksum):
        return self._unique(checksum, [meta for meta in self.retrieve_report_metas()
                                       if meta.checksum[:len(checksum)] == checksum])

    def retrieve_by_name(self, name):
        return self._unique(name, [meta for meta in self.retrieve_report_metas() if meta.name == name])

    def retrieve(self, identifier):
        """
        Looks ``identifier`` up as a checksum prefix first, then as a name.

        :raises FileNotFoundError: if nothing matches.
        :raises NoUniqueMatchError: if several documents match.
        """
        try:
            return self.retrieve_by_checksum(identifier)
        except FileNotFoundError:
            return self.retrieve_by_name(identifier)


class FileSystemStorage(Storage):
    """
    Documents live in ``<path>/reports/<name>_<checksum>.json`` and their curves in
    ``<path>/curves/<name>_<checksum>/<curve>.csv``.
    """
    REPORT_DIR = 'reports'
    CURVE_DIR = 'curves'
    REPORT_FILE_EXT = '.json'
    CURVE_FILE_EXT = '.csv'

    def __init__(self, path):
        self.path = path
        self.report_path = os.path.join(path, self.REPORT_DIR)

    def _report_file(self, meta):
        return os.path.join(self.report_path, meta.to_string() + self.REPORT_FILE_EXT)

    def has_report(self, meta):
        return os.path.isfile(self._report_file(meta))

    def store_report(self, meta, text):
        report_file_path = self._report_file(meta)
        if not os.path.exists(os.path.dirname(report_file_path)):
            os.makedirs(os.path.dirname(report_file_path))
        with open(report_file_path, 'w') as f:
            f.write(text)

    def store_curves(self, meta, curves):
        """
        :returns: ``{curve name: path relative to the storage root}``.
        """
        paths = {}
        for curve, (header, columns) in sorted(curves.items()):
            relative = os.path.join(self.CURVE_DIR, meta.to_string(), curve + self.CURVE_FILE_EXT)
            write_csv(os.path.join(self.path, relative), header, columns)
            paths[curve] = relative
        return paths

    def retrieve_report_metas(self):
        if not os.path.isdir(self.report_path):
            return []
        return sorted((ReportMeta.from_string(report_file[:-len(self.REPORT_FILE_EXT)])
                       for report_file in os.listdir(self.report_path)
                       if report_file[-len(self.REPORT_FILE_EXT):] == self.REPORT_FILE_EXT),
                      key=ReportMeta.to_string)

    def retrieve_report(self, meta):
        report_file_path = self._report_file(meta)
        if not os.path.isfile(report_file_path):
            raise FileNotFoundError(meta.to_string())
        with open(report_file_path, 'r') as f:
            return record_from_json(f.read())


class NoUniqueMatchError(LookupError):
    pass
