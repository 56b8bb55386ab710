import math
import os

import numpy as np
import xxhash
from scipy.special import gamma as gamma_function


CSV_FORMAT = '%.17g'


def unit_ball_measure(N):
    """
    Measure of the unit ball of ``R^N``.
    """
    return math.pi ** (N / 2) / gamma_function(N / 2 + 1)


def sobolev_exponent(N, p):
    if not 1 < p < N:
        raise ValueError('Sobolev exponent needs 1 < p < N, got p={} N={}'.format(p, N))
    return N * p / (N - p)


def conjugate_exponent(p):
    return math.inf if p == 1 else p / (p - 1)


def array_checksum(*arrays):
    """
    Provides an xxh64 hex digest of the raw bytes of the given arrays.

    Arrays are made contiguous first so that views and copies hash alike.
    """
    h = xxhash.xxh64()
    for array in arrays:
        array = np.ascontiguousarray(array)
        h.update(str(array.dtype).encode())
        h.update(str(array.shape).encode())
        h.update(array.tobytes())
    return h.hexdigest()


def text_checksum(text):
    return xxhash.xxh64(text.encode('utf-8')).hexdigest()


def write_csv(path, header, columns):
    """
    Writes equally long columns to ``path`` with a one line header.

    Numbers are written with 17 significant digits so that a rerun with the same input
    produces a byte-identical file.

    :param header: sequence of column names.
    :param columns: sequence of 1d arrays, one per header entry.
    """
    columns = [np.asarray(c, dtype=float).ravel() for c in columns]
    if len(columns) != len(header):
        raise ValueError('header has {} names for {} columns'.format(len(header), len(columns)))
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)
    data = np.column_stack(columns) if columns else np.empty((0, 0))
    np.savetxt(path, data, fmt=CSV_FORMAT, delimiter=',', header=','.join(header), comments='')


def read_csv(path):
    """
    Reads a file written by :func:`write_csv`.

    :returns: tuple ``(header, data)`` with ``data`` of shape ``(rows, len(header))``.
    """
    with open(path, 'r') as f:
        header = f.readline().strip().split(',')
    data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.empty((0, len(header)))
    if data.shape[1] != len(header):
        raise ValueError('{}: header names {} columns but rows have {}'.format(path, len(header), data.shape[1]))
    return header, data


def observed_orders(sizes, errors):
    """
    Observed convergence orders ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})`` between successive
    refinements.
    """
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.log(errors[:-1] / errors[1:]) / np.log(sizes[:-1] / sizes[1:])


def growth_factors(values):
    values = np.asarray(values, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return values[1:] / values[:-1]
