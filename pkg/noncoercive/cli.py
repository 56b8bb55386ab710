from concurrent.futures import ProcessPoolExecutor
import inspect
import json
import logging
import os
import sys

import click

from .__version__ import __version__
from .cases import CASES, Status, run_case
from .config import RunConfig, parse_value
from .errors import ConfigError, NoncoerciveError, SolverError
from .lorentz import (INFINITY, LorentzIndex, SampledScalarField, dist_to_bounded, distribution_curve,
                      is_in_closure, lorentz_quasinorm, sobolev_constant)
from .mesh import RadialMesh
from .obstacle import add_back, vi_truncation_scheme
from .profiles import profile_from_dict
from .solver import truncation_continuation
from .storage import FileSystemStorage, NoUniqueMatchError
from .utils import CSV_FORMAT, write_csv


logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_RECORD = 2

RECORD_FLAGS = ('blowup_suspected', 'boundedness_at_risk', 'stagnated')


class CliGroup(click.Group):
    """
    Reports usage errors with exit status 1; click's own status 2 means record-only here.
    """
    def main(self, *args, **kwargs):
        kwargs.pop('standalone_mode', None)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_ERROR)
        except click.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(EXIT_ERROR)


@click.group(cls=CliGroup, context_settings=dict(help_option_names=['-h', '--help']))
@click.option('--verbose', '-v', count=True, help='-v for progress, -vv for iterations.')
@click.version_option(version=__version__)
def cli(verbose):
    """
    Truncation schemes for noncoercive quasilinear Dirichlet and obstacle problems.

    Exit status is 0 when everything passed, 2 when only record-only deviations were found
    and 1 on errors or failed checks.
    """
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(format='%(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(level)


def load_config(path, overrides):
    config = RunConfig.load(path) if path is not None else RunConfig()
    config.apply_overrides(overrides)
    return config


def fail(message):
    click.echo(message, err=True)
    sys.exit(EXIT_ERROR)


def solution_curve(u):
    mesh = u.mesh
    if isinstance(mesh, RadialMesh):
        return ['r', 'u'], [mesh.radii, u.coefficients]
    header = ['x{}'.format(i) for i in range(mesh.dimension)] + ['u']
    return header, list(mesh.nodes.T) + [u.coefficients]


def solve_problem(config, with_obstacle=False):
    """
    Builds the configured problem and runs the truncation scheme.

    :returns: ``(u, report)``.
    """
    mesh = config.mesh()
    field = config.field(mesh)
    rhs = config.rhs(mesh)
    solve_config = config.solve_config()
    sobolev = config.sobolev(field, mesh)
    if not with_obstacle:
        return truncation_continuation(field, rhs, solve_config, sobolev)
    field, obstacle = config.obstacle(field, mesh)
    if 'problem.obstacle' not in config:
        logger.warning('no obstacle configured, solving the unconstrained problem')
    u, report = vi_truncation_scheme(field, rhs, obstacle, solve_config, sobolev)
    report.diagnostics['contact_nodes'] = obstacle.contact_nodes(u).tolist()
    return add_back(u, obstacle), report


def report_status(report):
    if not report.converged:
        return EXIT_ERROR
    if any(report.flags[name] for name in RECORD_FLAGS):
        return EXIT_RECORD
    return EXIT_PASS


def store_solution(output, name, u, report):
    storage = FileSystemStorage(output)
    curves = {'solution': solution_curve(u), 'history': report.history_columns()}
    return storage.store(name, report, curves)


def run_and_store(config, name, output, with_obstacle):
    """
    Solves and stores one configuration.

    :returns: ``(exit status, message)``.
    """
    try:
        u, report = solve_problem(config, with_obstacle)
    except SolverError as e:
        if e.report is not None:
            FileSystemStorage(output).store(name + '-failed', e.report, {'history': e.report.history_columns()})
        return EXIT_ERROR, '{}: {}'.format(type(e).__name__, e)
    except NoncoerciveError as e:
        return EXIT_ERROR, '{}: {}'.format(type(e).__name__, e)
    meta = store_solution(output, name, u, report)
    flags = ', '.join(flag for flag, value in sorted(report.flags.items()) if value)
    message = '{}  level={}  bound={:.6g}  [{}]'.format(meta.to_string(), report.truncation_level,
                                                        report.uniform_bound, flags)
    return report_status(report), message


def _solve_command(config_path, overrides, output, name, with_obstacle):
    try:
        config = load_config(config_path, overrides)
        output = config.output_dir(output)
    except ConfigError as e:
        fail('ConfigError: {}'.format(e))
    name = name or config.get('name') or ('obstacle' if with_obstacle else 'solve')
    status, message = run_and_store(config, name, output, with_obstacle)
    click.echo(message, err=status == EXIT_ERROR)
    sys.exit(status)


@cli.command('solve')
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override a config key.')
@click.option('--output', '-o', default=None, help='Output root.')
@click.option('--name', '-n', default=None, help='Name of the stored report.')
def cli_solve(config_path, overrides, output, name):
    """
    Solve the Dirichlet problem of a run config.
    """
    _solve_command(config_path, overrides, output, name, False)


@cli.command('obstacle')
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override a config key.')
@click.option('--output', '-o', default=None, help='Output root.')
@click.option('--name', '-n', default=None, help='Name of the stored report.')
def cli_obstacle(config_path, overrides, output, name):
    """
    Solve the obstacle problem of a run config.
    """
    _solve_command(config_path, overrides, output, name, True)


def parse_case_args(args):
    """
    Reads ``--key value`` and ``--key=value`` pairs; values are parsed as JSON.
    """
    params = {}
    i = 0
    while i < len(args):
        token = args[i]
        if not token.startswith('--'):
            raise ConfigError('unexpected argument: ' + token)
        key = token[2:]
        if '=' in key:
            key, text = key.split('=', 1)
        elif i + 1 < len(args):
            i += 1
            text = args[i]
        else:
            raise ConfigError('missing value for ' + token)
        params[key.replace('-', '_')] = parse_value(text)
        i += 1
    return params


@cli.command('verify', context_settings=dict(ignore_unknown_options=True, allow_extra_args=True))
@click.argument('case', type=click.Choice(sorted(CASES)))
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Run config with case parameters under "cases.<case>".')
@click.option('--output', '-o', default=None, help='Output root.')
@click.pass_context
def cli_verify(ctx, case, config_path, output):
    """
    Run a verification case. Case parameters follow as --name value.
    """
    try:
        config = load_config(config_path, [])
        output = config.output_dir(output)
        params = dict(config.get('cases.' + case, {}))
        params.update(parse_case_args(ctx.args))
        if 'config' in inspect.signature(CASES[case]).parameters and 'solver' in config:
            params['config'] = config.solve_config()
    except ConfigError as e:
        fail('ConfigError: {}'.format(e))

    try:
        result = run_case(case, **params)
    except TypeError as e:
        fail('invalid parameters for {}: {}'.format(case, e))
    except NoncoerciveError as e:
        fail('{}: {}'.format(type(e).__name__, e))

    meta = FileSystemStorage(output).store(case, result)
    for check, passed in sorted(result.checks.items()):
        click.echo('{:<40} {}'.format(check, 'pass' if passed else 'FAIL'))
    for key in sorted(result.record_only):
        click.echo('{:<40} record'.format(key))
    click.echo('{}: {}'.format(meta.to_string(), result.status.value))
    sys.exit({Status.PASS: EXIT_PASS, Status.RECORD: EXIT_RECORD, Status.FAIL: EXIT_ERROR}[result.status])


def _sweep_task(document, path, parameter, value, name, output, with_obstacle):
    config = RunConfig(document, path)
    config[parameter] = value
    return run_and_store(config, name, output, with_obstacle)


@cli.command('sweep')
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override a config key.')
@click.option('--output', '-o', default=None, help='Output root.')
def cli_sweep(config_path, overrides, output):
    """
    Solve a run config once for every value of "sweep.values" assigned to the key
    "sweep.parameter", on "sweep.workers" processes.
    """
    try:
        config = load_config(config_path, overrides)
        output = config.output_dir(output)
        parameter = config['sweep.parameter']
        values = config['sweep.values']
    except KeyError as e:
        fail('ConfigError: key {}: missing'.format(e.args[0]))
    except ConfigError as e:
        fail('ConfigError: {}'.format(e))
    workers = int(config.get('sweep.workers', 1))
    with_obstacle = bool(config.get('sweep.obstacle', 'problem.obstacle' in config))
    name = config.get('name', 'sweep')
    document = config.copy().config
    del document['sweep']
    tasks = [(document, config.path, parameter, value, '{}-{:03d}'.format(name, i), output, with_obstacle)
             for i, value in enumerate(values)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_sweep_task, *zip(*tasks)))
    else:
        outcomes = [_sweep_task(*task) for task in tasks]

    for value, (status, message) in zip(values, outcomes):
        click.echo('{} = {!r}: {}'.format(parameter, value, message))
    statuses = [status for status, _ in outcomes]
    sys.exit(EXIT_ERROR if EXIT_ERROR in statuses else EXIT_RECORD if EXIT_RECORD in statuses else EXIT_PASS)


def _lorentz_index(p, q):
    if q is None:
        return LorentzIndex(p)
    return LorentzIndex(p, INFINITY if q in ('inf', 'infinity') else float(q))


def _echo_columns(header, columns):
    click.echo(','.join(header))
    for row in zip(*columns):
        click.echo(','.join(CSV_FORMAT % value for value in row))


@cli.command('lorentz')
@click.argument('op', type=click.Choice(['distribution', 'quasinorm', 'dist', 'closure', 'sobolev']))
@click.option('--csv', 'csv_path', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Sampled field with columns x..., value, weight.')
@click.option('--profile', default=None, help='Radial profile as JSON, e.g. {"kind": "inverse_radius"}.')
@click.option('--N', 'N', type=int, default=2, show_default=True)
@click.option('--p', 'p', type=float, default=None, help='Lorentz exponent; N for profiles by default.')
@click.option('--q', 'q', default=None, help='Second index, a number or inf; p by default.')
@click.option('--cells', type=int, default=1024, show_default=True)
@click.option('--radius', type=float, default=1.0, show_default=True)
@click.option('--r-min', 'r_min', type=float, default=1e-9, show_default=True)
@click.option('--tol', type=float, default=None, help='Tolerance of dist and closure.')
@click.option('--method', type=click.Choice(['exact', 'quadrature']), default='exact', show_default=True)
@click.option('--override', type=float, default=None, help='Sobolev constant override.')
@click.option('--out', 'out_path', default=None, help='Write the curve to this CSV file.')
def cli_lorentz(op, csv_path, profile, N, p, q, cells, radius, r_min, tol, method, override, out_path):
    """
    Lorentz-space quantities of a sampled field or of a radial profile on a geometric radial mesh.
    """
    try:
        if op == 'sobolev':
            p = p if p is not None else 2.0
            mesh = RadialMesh.uniform(N, radius, cells) if override is None else None
            constant = sobolev_constant(N, p, mesh, override=override,
                                        q=None if q is None else _lorentz_index(p, q).q)
            click.echo('S = ' + CSV_FORMAT % constant.value)
            click.echo('provenance = ' + constant.provenance.value)
            return
        if (csv_path is None) == (profile is None):
            fail('give exactly one of --csv and --profile')
        if csv_path is not None:
            f = SampledScalarField.from_csv(csv_path)
        else:
            f = RadialMesh.geometric(N, radius, cells, r_min).lorentz_sample(profile_from_dict(parse_value(profile)))
        p = p if p is not None else float(N)

        if op == 'distribution':
            t, measures, scaled = distribution_curve(f, p)
            header, columns = ['t', 'lambda', 't_lambda_1_p'], [t, measures, scaled]
            if out_path is not None:
                write_csv(out_path, header, columns)
            else:
                _echo_columns(header, columns)
        elif op == 'quasinorm':
            click.echo('norm = ' + CSV_FORMAT % lorentz_quasinorm(f, _lorentz_index(p, q), method=method))
        elif op == 'dist':
            click.echo('dist = ' + CSV_FORMAT % dist_to_bounded(f, p, tol=tol if tol is not None else 1e-6))
        else:
            result = is_in_closure(f, p, tol=tol if tol is not None else 1e-3)
            click.echo('in_closure = ' + str(result.in_closure).lower())
            click.echo('inconclusive = ' + str(result.inconclusive).lower())
            if result.plateau is not None:
                click.echo('plateau = ' + CSV_FORMAT % result.plateau)
            if out_path is not None:
                result.to_csv(out_path)
    except (NoncoerciveError, ValueError) as e:
        fail('{}: {}'.format(type(e).__name__, e))


@cli.group('config')
def cli_config():
    """
    Read and edit run configs.
    """
    pass


def _open_config(path, create=False):
    if create and not os.path.exists(path):
        return RunConfig(path=path)
    try:
        return RunConfig.load(path)
    except FileNotFoundError:
        fail('No such config: ' + path)
    except ConfigError as e:
        fail('ConfigError: {}'.format(e))


def _format(value):
    return value if isinstance(value, str) else json.dumps(value, sort_keys=True)


@cli_config.command('list')
@click.option('--file', '-f', 'path', required=True)
def cli_config_list(path):
    items = list(_open_config(path).items())
    items.sort()
    for key, value in items:
        click.echo(key + ' = ' + _format(value))


@cli_config.command('set')
@click.option('--file', '-f', 'path', required=True)
@click.argument('key')
@click.argument('value')
def cli_config_set(path, key, value):
    config = _open_config(path, create=True)
    try:
        config[key] = parse_value(value)
    except ConfigError as e:
        fail('ConfigError: {}'.format(e))
    config.save()


@cli_config.command('get')
@click.option('--file', '-f', 'path', required=True)
@click.argument('key')
def cli_config_get(path, key):
    config = _open_config(path)
    if key not in config:
        fail('Config does not contain key: ' + key)
    click.echo(key + ' = ' + _format(config[key]))


@cli_config.command('unset')
@click.option('--file', '-f', 'path', required=True)
@click.argument('key')
def cli_config_unset(path, key):
    config = _open_config(path)
    if key in config:
        del config[key]
        config.save()
    else:
        click.echo('Config does not contain key: ' + key)


@cli.command('list')
@click.option('--output', '-o', default=None, help='Output root.')
def cli_list(output):
    """
    List the stored reports.
    """
    storage = FileSystemStorage(RunConfig().output_dir(output))
    metas = storage.retrieve_report_metas()
    if not metas:
        click.echo('No reports found.')
    for meta in metas:
        click.echo(meta.checksum + '  ' + meta.name)


@cli.command('show')
@click.argument('identifier')
@click.option('--output', '-o', default=None, help='Output root.')
def cli_show(identifier, output):
    """
    Print a stored report, looked up by checksum prefix or name.
    """
    storage = FileSystemStorage(RunConfig().output_dir(output))
    try:
        record = storage.retrieve(identifier)
    except FileNotFoundError:
        fail('No reports matching identifier: ' + identifier)
    except NoUniqueMatchError:
        fail('Multiple reports matching identifier: ' + identifier)
    click.echo(record.to_json())
