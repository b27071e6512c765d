"""JSON-over-HTTP access to compiling, scheduling and simulating."""

import asyncio
import json
from concurrent.futures import Executor
from typing import Any, Awaitable, Callable, Dict, List, Mapping, Optional

from aiohttp import web

from . import (CRNClockError, IntegrationError, ParameterError, ParseError, PolyODE,
               RealizabilityError)
from .compiler import compile_ode
from .crn import format_crn
from .integrator import IntegrationSpec, integrate, period_report
from .log import log
from .oscillator import BUILTIN_SYSTEMS, Builtin, Schedule, build_builtin, split_params
from .periodest import estimate_period

EXECUTOR_KEY = web.AppKey('crnclock_executor', Executor)

MAX_T_END = 10000.0

_Handler = Callable[[web.Request], Awaitable[web.StreamResponse]]


def _error(status: int, message: str, **extra: Any) -> web.Response:
    return web.json_response({'error': message, **extra}, status=status)


@web.middleware
async def error_middleware(request: web.Request, handler: _Handler) -> web.StreamResponse:
    try:
        return await handler(request)
    except RealizabilityError as exc:
        return _error(422, str(exc), violations=[
            {'species': v.species, 'monomial': dict(v.monomial),
             'coefficient': v.coefficient} for v in exc.violations])
    except IntegrationError as exc:
        return _error(422, str(exc), time=exc.time, species=exc.species)
    except CRNClockError as exc:
        return _error(400, str(exc))


async def _body(request: web.Request) -> Any:
    try:
        return await request.json()
    except json.JSONDecodeError as exc:
        raise ParseError('request body: {}'.format(exc.msg), line=exc.lineno,
                         expected='JSON') from exc


def _object(data: Any, what: str) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ParseError('{} must be a JSON object'.format(what))
    return data


def _number(data: Mapping[str, Any], name: str, default: float) -> float:
    value = data.get(name, default)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParameterError('{} must be a number, got {!r}'.format(name, value)) from None


async def handle_compile(request: web.Request) -> web.Response:
    sys_ = PolyODE.from_json(await _body(request))
    crn = compile_ode(sys_)
    return web.Response(text=format_crn(crn), content_type='text/plain')


async def handle_period(request: web.Request) -> web.Response:
    query = request.query
    found = estimate_period(_number(query, 'eta1', 0.1), _number(query, 'rho', 2.1),
                            _number(query, 'tol', 1e-10))
    return web.json_response(found._asdict())


async def handle_schedule(request: web.Request) -> web.Response:
    data = _object(await _body(request), 'schedule request')
    m = data.get('m')
    if isinstance(m, bool) or not isinstance(m, int) or m < 2:
        raise ParameterError('m must be an integer >= 2, got {!r}'.format(m))
    oscillator, counter = split_params(_object(data.get('params', {}), 'params'))
    schedule = Schedule.build(m, oscillator, counter)
    system = schedule.system()
    return web.json_response({
        'system': system.to_json(),
        'crn': format_crn(compile_ode(system)),
        'assignment': schedule.assignment.to_json(),
    })


def _resolve(data: Mapping[str, Any]) -> Builtin:
    oscillator, counter = split_params(_object(data.get('params', {}), 'params'))
    source = data.get('system', 'core')
    if isinstance(source, str):
        if source not in BUILTIN_SYSTEMS:
            raise ParameterError('Unknown system {!r}, expected one of {}'.format(
                source, list(BUILTIN_SYSTEMS)))
        built = build_builtin(source, oscillator, counter)
    else:
        built = Builtin(PolyODE.from_json(source), [], [])
    initial = data.get('initial')
    if initial is None:
        if not built.initial:
            raise ParseError("'initial' is required for a PolyODE system")
        return built
    if isinstance(initial, dict):
        unknown = sorted(set(initial) - set(built.system.species))
        if unknown:
            raise ParseError("'initial' names unknown species {}".format(unknown))
        base = built.initial or [0.0] * len(built.system.species)
        initial = [initial.get(name, base[i])
                   for i, name in enumerate(built.system.species)]
    try:
        values: List[float] = [float(v) for v in initial]
    except (TypeError, ValueError) as exc:
        raise ParseError("'initial': {}".format(exc), expected='numbers') from exc
    return built._replace(initial=values)


async def handle_simulate(request: web.Request) -> web.Response:
    data = _object(await _body(request), 'simulate request')
    built = _resolve(data)
    defaults = IntegrationSpec._field_defaults
    spec = IntegrationSpec(
        t_end=_number(data, 't_end', 200.0),
        rel_tol=_number(data, 'rel_tol', defaults['rel_tol']),
        abs_tol=_number(data, 'abs_tol', defaults['abs_tol']),
        dense_output_interval=_number(data, 'sample_dt',
                                      defaults['dense_output_interval'])).check()
    if spec.t_end > MAX_T_END:
        raise ParameterError('t_end must be <= {}, got {!r}'.format(MAX_T_END, spec.t_end))
    species = data.get('species', built.clocks)
    if not isinstance(species, list) or not all(s in built.system for s in species):
        raise ParseError("'species' must list species of the system")
    level = _number(data, 'level', split_params(data.get('params', {}))[0].p)
    executor: Optional[Executor] = request.app.get(EXECUTOR_KEY)
    loop = asyncio.get_running_loop()
    traj = await loop.run_in_executor(executor, integrate, built.system, built.initial,
                                      spec)
    log.info("Simulated %d species to t=%r", len(built.system), spec.t_end)
    return web.json_response({'final': traj.final(),
                              'periods': period_report(traj, species, level)})


def setup(app: web.Application, executor: Optional[Executor] = None) -> None:
    """Setup the library in aiohttp fashion."""

    if executor is not None:
        app[EXECUTOR_KEY] = executor
    app.middlewares.append(error_middleware)
    app.router.add_post('/compile', handle_compile)
    app.router.add_get('/period', handle_period)
    app.router.add_post('/schedule', handle_schedule)
    app.router.add_post('/simulate', handle_simulate)


def make_app(executor: Optional[Executor] = None) -> web.Application:
    app = web.Application()
    setup(app, executor)
    return app
