"""
Exception hierarchy shared by every module of the package.

Check functions never raise on a violated inequality: those are report entries.
The classes below signal that a computation could not produce its result.
"""


class NoncoerciveError(Exception):
    pass


class ConstructionError(NoncoerciveError, ValueError):
    """
    An object was built from inconsistent data (mismatched lengths, negative weights, ...).
    """
    pass


class NonFiniteNorm(NoncoerciveError, ArithmeticError):
    pass


class ScheduleExhausted(NoncoerciveError, ArithmeticError):
    """
    A monotone schedule reached its cap before the tracked quantity stabilized.

    :param last_value: the last value computed on the schedule.
    :param last_parameter: the schedule parameter at which it was computed.
    """
    def __init__(self, message, last_value=None, last_parameter=None):
        super().__init__(message)
        self.last_value = last_value
        self.last_parameter = last_parameter


class MissingOverride(NoncoerciveError, LookupError):
    pass


class NonSPDMatrix(NoncoerciveError, ValueError):
    pass


class DistanceTooLarge(NoncoerciveError, ValueError):
    """
    The distance of the coefficient ``b`` to bounded functions in the weak Lebesgue
    space is not small enough for the truncation scheme to be coercive.

    :param distance: the measured distance (or the last residual norm on the schedule).
    :param threshold: ``alpha**(1/p) / S`` for the Sobolev constant in use.
    :param sobolev: the :class:`~noncoercive.lorentz.SobolevConstant` used.
    """
    def __init__(self, distance, threshold, sobolev=None, message=None):
        if message is None:
            message = 'distance condition violated: dist(b, L^inf) in L^(N,inf) = {:.6g} ' \
                      'is not below alpha^(1/p)/S = {:.6g}'.format(distance, threshold)
            if sobolev is not None:
                message += ' (S = {:.6g}, {})'.format(sobolev.value, sobolev.provenance.value)
        super().__init__(message)
        self.distance = distance
        self.threshold = threshold
        self.sobolev = sobolev


class MeshMismatch(NoncoerciveError, ValueError):
    pass


class SingularLinearization(NoncoerciveError, ArithmeticError):
    pass


class SolverError(NoncoerciveError, RuntimeError):
    """
    Base class of the iterative solver failures. ``report`` holds whatever history was
    recorded up to the failure.
    """
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NewtonStalled(SolverError):
    pass


class PicardDiverged(SolverError):
    pass


class Stagnated(SolverError):
    pass


class SchemeNotCauchy(SolverError):
    pass


class ProjectionStalled(SolverError):
    pass


class NotAdmissible(NoncoerciveError, ValueError):
    pass


class OutOfRange(NoncoerciveError, ValueError):
    pass


class ConfigError(NoncoerciveError, ValueError):
    """
    Invalid run configuration.

    :param key: dotted key of the offending entry, if known.
    :param line: line of a JSON decode failure.
    :param column: column of a JSON decode failure.
    """
    def __init__(self, message, key=None, line=None, column=None):
        self.reason = message
        location = []
        if key is not None:
            location.append('key ' + key)
        if line is not None:
            location.append('line {} column {}'.format(line, column))
        if location:
            message = '{}: {}'.format(', '.join(location), message)
        super().__init__(message)
        self.key = key
        self.line = line
        self.column = column
