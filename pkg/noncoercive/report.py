"""
Solve reports.

Every record converts to and from plain dicts so that a report can be stored as JSON and
read back; keys are sorted on output so identical runs produce identical files.
"""
from dataclasses import dataclass, field
import json
import math

import numpy as np

from .utils import write_csv


def _plain(value):
    """
    Converts numpy scalars and arrays into JSON-compatible Python values.
    """
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class MonitorEntry:
    """
    One level of the boundedness monitor ``||grad u||^p <= C (1 + ||u||^p)`` on the
    sublevel set ``{|u| <= sigma}``.
    """
    sigma: float
    lhs: float
    rhs: float
    c_est: float
    at_risk: bool = False

    def to_dict(self):
        return _plain(dict(self.__dict__))

    @staticmethod
    def from_dict(d):
        return MonitorEntry(d['sigma'], d['lhs'], d['rhs'], d['c_est'], d.get('at_risk', False))


@dataclass
class StageRecord:
    """
    One continuation stage ``u = t F(u)``; ``t = 1`` for the plain fixed-point iteration.
    """
    t: float
    method: str = 'picard'
    newton_iterations: list = field(default_factory=list)
    newton_residuals: list = field(default_factory=list)
    picard_history: list = field(default_factory=list)
    norm_history: list = field(default_factory=list)
    converged: bool = False

    def to_dict(self):
        return _plain(dict(self.__dict__))

    @staticmethod
    def from_dict(d):
        return StageRecord(**d)


@dataclass
class LevelRecord:
    """
    Outcome of the fixed-point iteration for one truncation level ``n`` (``None`` when no
    truncation is applied).
    """
    level: object = None
    stages: list = field(default_factory=list)
    norm: float = None
    difference: float = None
    gamma_diagnostic: float = None
    monitor: list = field(default_factory=list)

    def to_dict(self):
        d = _plain({k: v for k, v in self.__dict__.items() if k not in ('stages', 'monitor')})
        d['stages'] = [s.to_dict() for s in self.stages]
        d['monitor'] = [m.to_dict() for m in self.monitor]
        return d

    @staticmethod
    def from_dict(d):
        d = dict(d)
        stages = [StageRecord.from_dict(s) for s in d.pop('stages', [])]
        monitor = [MonitorEntry.from_dict(m) for m in d.pop('monitor', [])]
        return LevelRecord(stages=stages, monitor=monitor, **d)


FLAGS = ('converged', 'stagnated', 'blowup_suspected', 'continuation_used', 'bound_growth_ok', 'boundedness_at_risk')


@dataclass
class SolveReport:
    truncation_level: int = None
    sobolev: dict = None
    levels: list = field(default_factory=list)
    flags: dict = field(default_factory=lambda: {name: False for name in FLAGS})
    uniform_bound: float = None
    bound_growth: float = None
    diagnostics: dict = field(default_factory=dict)

    def new_level(self, level=None):
        record = LevelRecord(level)
        self.levels.append(record)
        return record

    def flag(self, name, value=True):
        if name not in FLAGS:
            raise KeyError(name)
        self.flags[name] = bool(value)

    @property
    def converged(self):
        return self.flags['converged']

    @property
    def level_differences(self):
        return [level.difference for level in self.levels if level.difference is not None]

    def to_dict(self):
        return {
            'truncation_level': _plain(self.truncation_level),
            'sobolev': _plain(self.sobolev),
            'levels': [level.to_dict() for level in self.levels],
            'flags': dict(self.flags),
            'uniform_bound': _plain(self.uniform_bound),
            'bound_growth': _plain(self.bound_growth),
            'diagnostics': _plain(self.diagnostics),
        }

    @staticmethod
    def from_dict(d):
        report = SolveReport(d.get('truncation_level'), d.get('sobolev'),
                             [LevelRecord.from_dict(level) for level in d.get('levels', [])])
        report.flags.update(d.get('flags', {}))
        report.uniform_bound = d.get('uniform_bound')
        report.bound_growth = d.get('bound_growth')
        report.diagnostics = d.get('diagnostics', {})
        return report

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_json(s):
        return SolveReport.from_dict(json.loads(s))

    def history_columns(self):
        """
        One row per fixed-point iteration: level, t, iteration, ``||u_(k+1) - u_k||``,
        ``||u_k||``.

        :returns: ``(header, columns)``.
        """
        rows = []
        for level in self.levels:
            for stage in level.stages:
                for k, (difference, norm) in enumerate(zip(stage.picard_history, stage.norm_history)):
                    rows.append((math.nan if level.level is None else level.level, stage.t, k, difference, norm))
        columns = list(zip(*rows)) if rows else [[] for _ in range(5)]
        return ['level', 't', 'iteration', 'difference', 'norm'], columns

    def history_csv(self, path):
        write_csv(path, *self.history_columns())
