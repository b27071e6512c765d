"""Command line entry point.

Exit status: 0 success, 1 I/O, parse or usage errors, 2 unrealizable
system, 3 integration failure.
"""

import argparse
import asyncio
import json
import logging
import math
import os
import sys
from typing import Any, Callable, Dict, List, Mapping, NoReturn, Optional, Sequence, TextIO

from . import CRNClockError, IntegrationError, ParseError, PolyODE, RealizabilityError
from .compiler import compile_ode
from .crn import format_crn
from .integrator import (IntegrationSpec, Trajectory, integrate, integrate_many,
                         measure_period, period_report)
from .log import log
from .oscillator import (BUILTIN_SYSTEMS, Builtin, CounterParams, OscillatorParams,
                         Schedule, build_builtin, check_counter_monotone,
                         check_quasi_steady, split_params, verify_clock_pair)
from .periodest import estimate_period

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNREALIZABLE = 2
EXIT_INTEGRATION = 3

DEFAULT_T_END = 200.0


class _Parser(argparse.ArgumentParser):

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, '{}: error: {}\n'.format(self.prog, message))


def _load_json(path: str) -> Any:
    with open(path, encoding='utf-8') as fp:
        try:
            return json.load(fp)
        except json.JSONDecodeError as exc:
            raise ParseError('{}: {}'.format(path, exc.msg), line=exc.lineno,
                             expected='JSON') from exc


def _load_params(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    data = _load_json(path)
    if not isinstance(data, dict):
        raise ParseError('{}: params must be a JSON object'.format(path),
                         expected='{"name": number, ...}')
    return data


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == '-':
        sys.stdout.write(text)
        return
    with open(path, 'w', encoding='utf-8') as fp:
        fp.write(text)


def _dump(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def cmd_compile(args: argparse.Namespace) -> int:
    sys_ = PolyODE.from_json(_load_json(args.input))
    try:
        crn = compile_ode(sys_)
    except RealizabilityError as exc:
        for v in exc.violations:
            print('d{}/dt: term {!r} * {} lacks {}'.format(
                v.species, v.coefficient, v.monomial, v.species), file=sys.stderr)
        raise
    _write(args.out, format_crn(crn))
    log.info("Compiled %d reactions", len(crn))
    return EXIT_OK


def _initial(text: Optional[str], system: PolyODE,
             default: Optional[List[float]]) -> List[float]:
    if text is None:
        if default is None:
            raise ParseError('--initial is required for systems read from JSON',
                             expected='JSON list or object of concentrations')
        return default
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError('--initial: {}'.format(exc.msg),
                         expected='JSON list or object') from exc
    if isinstance(data, dict):
        unknown = sorted(set(data) - set(system.species))
        if unknown:
            raise ParseError('--initial names unknown species {}'.format(unknown))
        base = default or [0.0] * len(system.species)
        try:
            return [float(data.get(name, base[i]))
                    for i, name in enumerate(system.species)]
        except (TypeError, ValueError) as exc:
            raise ParseError('--initial: {}'.format(exc), expected='numbers') from exc
    if isinstance(data, list):
        try:
            return [float(value) for value in data]
        except (TypeError, ValueError) as exc:
            raise ParseError('--initial: {}'.format(exc), expected='numbers') from exc
    raise ParseError('--initial must be a list or an object',
                     expected='JSON list or object')


def _resolve(source: str, params: Mapping[str, Any],
             initial: Optional[str]) -> Builtin:
    oscillator, counter = split_params(params)
    if source in BUILTIN_SYSTEMS:
        built = build_builtin(source, oscillator, counter)
        return built._replace(initial=_initial(initial, built.system, built.initial))
    system = PolyODE.from_json(_load_json(source))
    return Builtin(system, _initial(initial, system, None), [])


def _spec(args: argparse.Namespace) -> IntegrationSpec:
    return IntegrationSpec(t_end=args.t_end, rel_tol=args.rel_tol, abs_tol=args.abs_tol,
                           dense_output_interval=args.sample_dt,
                           method=args.method).check()


def _summary(source: str, traj: Trajectory, clocks: Sequence[str],
             level: float) -> Dict[str, Any]:
    periods = period_report(traj, clocks, level)
    summary: Dict[str, Any] = {'periods': periods}
    if len(clocks) == 2:
        first, second = (periods[name]['mean'] for name in clocks)
        summary['ratio'] = first / second if first and second else None
    if source == 'counter3':
        summary['final'] = traj.final()
    return summary


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _load_params(args.params)
    spec = _spec(args)
    if args.sweep is not None:
        return _simulate_sweep(args, params, spec)
    built = _resolve(args.system, params, args.initial)
    clocks = args.species or built.clocks
    level = OscillatorParams.from_mapping(params).p if args.level is None else args.level
    traj = integrate(built.system, built.initial, spec)
    if args.out:
        _write(args.out, traj.to_csv_string())
    _write(None, _dump(_summary(args.system, traj, clocks, level)))
    return EXIT_OK


def _simulate_sweep(args: argparse.Namespace, params: Mapping[str, Any],
                    spec: IntegrationSpec) -> int:
    overrides = _load_json(args.sweep)
    if not isinstance(overrides, list) or not all(isinstance(o, dict) for o in overrides):
        raise ParseError('{}: sweep must be a list of params objects'.format(args.sweep),
                         expected='[{"name": number, ...}, ...]')
    runs = [{**params, **override} for override in overrides]
    built = [_resolve(args.system, run, args.initial) for run in runs]
    trajectories = asyncio.run(integrate_many(
        [(b.system, b.initial, spec) for b in built]))
    results = []
    for i, (run, b, traj) in enumerate(zip(runs, built, trajectories)):
        level = OscillatorParams.from_mapping(run).p if args.level is None else args.level
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _write(os.path.join(args.out, 'run{}.csv'.format(i)), traj.to_csv_string())
        summary = _summary(args.system, traj, args.species or b.clocks, level)
        summary['params'] = run
        results.append(summary)
    _write(None, _dump(results))
    return EXIT_OK


def cmd_schedule(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    if args.source is not None:
        schedule = Schedule.from_json(_load_json(args.source))
    else:
        if args.m is None or args.m < 2:
            parser.error('m must be an integer >= 2, got {}'.format(args.m))
        oscillator, counter = split_params(_load_params(args.params))
        schedule = Schedule.build(args.m, oscillator, counter)
    os.makedirs(args.out, exist_ok=True)
    system = schedule.system()
    crn = compile_ode(system)
    outputs = {
        'system.json': _dump(system.to_json()),
        'network.crn': format_crn(crn),
        'assignment.json': _dump(schedule.assignment.to_json()),
        'schedule.json': _dump(schedule.to_json()),
    }
    for name, text in outputs.items():
        _write(os.path.join(args.out, name), text)
    log.info("Wrote schedule with %d species and %d reactions to %s",
             len(system), len(crn), args.out)
    return EXIT_OK


_Check = Callable[[Trajectory, Mapping[str, Any]], Dict[str, Any]]


def _check_symmetric_pair(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    max_transition = float(check.get('max_transition', 0.05))
    report = verify_clock_pair(
        traj, check['u'], check['v'], low=float(check.get('low', 0.01)),
        high=float(check.get('high', 0.5)), transient=float(check.get('transient', 40)),
        max_transition=max_transition)
    return {'measured': report.transition_fraction, 'bound': max_transition,
            'details': report._asdict(), 'passed': report.symmetric}


def _check_period(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    expected = float(check['expected'])
    rel_tol = float(check.get('rel_tol', 0.01))
    found = measure_period(traj, check['species'], float(check.get('level', 2.0)),
                           transient=check.get('transient'))
    return {'measured': found.mean, 'bound': [expected, rel_tol],
            'passed': abs(found.mean - expected) <= rel_tol * abs(expected)}


def _check_period_ratio(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    expected = float(check.get('expected', 2.0))
    rel_tol = float(check.get('rel_tol', 0.01))
    level = float(check.get('level', 2.0))
    transient = check.get('transient')
    ratio = (measure_period(traj, check['numerator'], level, transient=transient).mean /
             measure_period(traj, check['denominator'], level, transient=transient).mean)
    return {'measured': ratio, 'bound': [expected, rel_tol],
            'passed': abs(ratio - expected) <= rel_tol * abs(expected)}


def _check_final_value(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    low = float(check.get('min', -math.inf))
    high = float(check.get('max', math.inf))
    fraction = float(check.get('final_fraction', 0.0))
    start = traj.times[-1] - fraction * (traj.times[-1] - traj.times[0])
    values = traj.window(start).column(check['species'])
    return {'measured': [float(values.min()), float(values.max())],
            'bound': [low, high],
            'passed': bool(low <= values.min() and values.max() <= high)}


def _check_quasi_steady(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    params = OscillatorParams.from_mapping(check.get('params', {}))
    min_fraction = float(check.get('min_fraction', 0.99))
    report = check_quasi_steady(traj, params, check.get('suffix', ''),
                                transient=float(check.get('transient', 40)),
                                zeta=float(check.get('zeta', 10)))
    measured = min(report.difference_fraction, report.product_fraction)
    return {'measured': measured, 'bound': min_fraction, 'details': report._asdict(),
            'passed': measured >= min_fraction}


def _check_counter_monotone(traj: Trajectory, check: Mapping[str, Any]) -> Dict[str, Any]:
    cparams = CounterParams.from_mapping(check.get('params', {}))
    tolerance = float(check.get('tolerance', 0.02))
    report = check_counter_monotone(traj, cparams, check.get('species', 'y'),
                                    tolerance=tolerance)
    return {'measured': report.max_drop, 'bound': tolerance,
            'details': report._asdict(), 'passed': report.monotone}


CHECKS: Dict[str, _Check] = {
    'symmetric_pair': _check_symmetric_pair,
    'period': _check_period,
    'period_ratio': _check_period_ratio,
    'final_value': _check_final_value,
    'quasi_steady': _check_quasi_steady,
    'counter_monotone': _check_counter_monotone,
}


def run_checks(traj: Trajectory, checks: Sequence[Mapping[str, Any]]) -> Dict[str, Any]:
    """Run ``checks`` against ``traj``; a failed measurement fails its check."""
    results = []
    for i, check in enumerate(checks, 1):
        if not isinstance(check, dict) or check.get('kind') not in CHECKS:
            raise ParseError('check {}: unknown kind {!r}'.format(
                i, check.get('kind') if isinstance(check, dict) else check),
                expected='one of {}'.format(sorted(CHECKS)))
        try:
            result = CHECKS[check['kind']](traj, check)
        except KeyError as exc:
            raise ParseError('check {}: missing field {}'.format(i, exc)) from exc
        except CRNClockError as exc:
            if isinstance(exc, ParseError):
                raise
            result = {'measured': None, 'bound': None, 'passed': False,
                      'error': str(exc)}
        except (TypeError, ValueError) as exc:
            raise ParseError('check {}: {}'.format(i, exc)) from exc
        results.append({'kind': check['kind'], **result})
    return {'passed': all(r['passed'] for r in results), 'checks': results}


def cmd_verify(args: argparse.Namespace) -> int:
    with open(args.trajectory, encoding='utf-8') as fp:
        traj = Trajectory.from_csv(fp)
    checks = _load_json(args.checks)
    if isinstance(checks, dict):
        checks = [checks]
    if not isinstance(checks, list):
        raise ParseError('{}: checks must be a list'.format(args.checks))
    report = run_checks(traj, checks)
    _write(None, _dump(report))
    return EXIT_OK if report['passed'] else EXIT_ERROR


def cmd_period(args: argparse.Namespace) -> int:
    found = estimate_period(args.eta1, args.rho, args.tol)
    _write(None, _dump(found._asdict()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    defaults = OscillatorParams()
    parser = _Parser(prog='crnclock',
                     description='Relaxation-oscillator clocks for reaction networks.')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    commands = parser.add_subparsers(dest='command', required=True)

    compile_ = commands.add_parser('compile', help='compile a PolyODE JSON into a CRN')
    compile_.add_argument('input')
    compile_.add_argument('--out', help='CRN text output, stdout by default')

    simulate = commands.add_parser('simulate', help='integrate a system to CSV')
    simulate.add_argument('system', help='{} or a PolyODE JSON path'.format(
        '|'.join(BUILTIN_SYSTEMS)))
    simulate.add_argument('--params', help='flat JSON map of parameters')
    simulate.add_argument('--t-end', type=float, default=DEFAULT_T_END)
    integration = IntegrationSpec._field_defaults
    simulate.add_argument('--rel-tol', type=float, default=integration['rel_tol'])
    simulate.add_argument('--abs-tol', type=float, default=integration['abs_tol'])
    simulate.add_argument('--sample-dt', type=float,
                          default=integration['dense_output_interval'])
    simulate.add_argument('--method', default='Radau')
    simulate.add_argument('--initial', help='JSON list or object of concentrations')
    simulate.add_argument('--species', nargs='*', help='species whose periods to report')
    simulate.add_argument('--level', type=float,
                          help='crossing level for periods, p by default')
    simulate.add_argument('--sweep', help='JSON list of params overrides, run concurrently')
    simulate.add_argument('--out', help='trajectory CSV (a directory with --sweep)')

    schedule = commands.add_parser('schedule', help='build m oscillators plus counter')
    schedule.add_argument('m', type=int, nargs='?')
    schedule.add_argument('--params')
    schedule.add_argument('--from', dest='source', help='schedule description JSON')
    schedule.add_argument('--out', default='.', help='output directory')

    verify = commands.add_parser('verify', help='check a trajectory CSV')
    verify.add_argument('trajectory')
    verify.add_argument('checks')

    period = commands.add_parser('period', help='slow-flow period estimate')
    period.add_argument('--eta1', type=float, default=defaults.eta1)
    period.add_argument('--rho', type=float, default=defaults.rho)
    period.add_argument('--tol', type=float, default=1e-10)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
        format='%(levelname)s %(name)s: %(message)s')
    handlers: Dict[str, Callable[[argparse.Namespace], int]] = {
        'compile': cmd_compile,
        'simulate': cmd_simulate,
        'schedule': lambda a: cmd_schedule(a, parser),
        'verify': cmd_verify,
        'period': cmd_period,
    }
    try:
        return handlers[args.command](args)
    except RealizabilityError as exc:
        _error(sys.stderr, exc)
        return EXIT_UNREALIZABLE
    except IntegrationError as exc:
        _error(sys.stderr, exc)
        return EXIT_INTEGRATION
    except (CRNClockError, OSError) as exc:
        _error(sys.stderr, exc)
        return EXIT_ERROR


def _error(fp: TextIO, exc: BaseException) -> None:
    print('crnclock: error: {}'.format(exc), file=fp)
