"""Stiff integration of polynomial ODEs and trajectory measurements."""

import asyncio
import io
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from typing import (Dict, List, NamedTuple, Optional, Sequence, TextIO, Tuple, Type,
                    TypedDict, Union)

import numpy as np
from scipy.integrate import BDF, LSODA, OdeSolver, Radau

from . import (DimensionError, IntegrationError, MeasurementError, ParameterError,
               ParseError, PolyODE, eval_vector_field)
from .log import log

NEGTOL = 1e-9
MAX_REJECTIONS = 60
MAX_TOTAL_REJECTIONS = 10000

METHODS: Dict[str, Type[OdeSolver]] = {
    'Radau': Radau,
    'BDF': BDF,
    'LSODA': LSODA,
}


class IntegrationSpec(NamedTuple):
    t_end: float
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    max_step: float = math.inf
    dense_output_interval: float = 0.01
    negtol: float = NEGTOL
    method: str = 'Radau'

    def check(self) -> 'IntegrationSpec':
        if not self.t_end > 0:
            raise ParameterError("t_end must be > 0, got {!r}".format(self.t_end))
        if not self.rel_tol >= 1e-12:
            raise ParameterError("rel_tol must be >= 1e-12, got {!r}".format(self.rel_tol))
        for name in ('abs_tol', 'max_step', 'dense_output_interval'):
            if not getattr(self, name) > 0:
                raise ParameterError("{} must be > 0, got {!r}".format(
                    name, getattr(self, name)))
        if not self.negtol >= 0:
            raise ParameterError("negtol must be >= 0, got {!r}".format(self.negtol))
        if self.method not in METHODS:
            raise ParameterError("Unknown method {!r}, expected one of {}".format(
                self.method, sorted(METHODS)))
        return self


class Trajectory:

    """Time-stamped state samples, read-only once built."""

    def __init__(self, species: Sequence[str],
                 times: Union[Sequence[float], np.ndarray],
                 states: Union[Sequence[Sequence[float]], np.ndarray]) -> None:
        self._species = tuple(species)
        self._times = np.array(times, dtype=float)
        self._states = np.array(states, dtype=float).reshape(
            len(self._times), len(self._species))
        if self._times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if np.any(np.diff(self._times) <= 0):
            raise ValueError("times must be strictly increasing")
        self._index = {name: i for i, name in enumerate(self._species)}
        self._times.setflags(write=False)
        self._states.setflags(write=False)

    def __repr__(self) -> str:
        span = (self._times[0], self._times[-1]) if len(self._times) else ()
        return '<{} species:{} samples:{} span:{}>'.format(
            self.__class__.__name__, list(self._species), len(self._times), span)

    def __len__(self) -> int:
        return len(self._times)

    @property
    def species(self) -> Tuple[str, ...]:
        return self._species

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def states(self) -> np.ndarray:
        return self._states

    def column(self, name: str) -> np.ndarray:
        try:
            return self._states[:, self._index[name]]
        except KeyError:
            raise KeyError("Species {!r} not in trajectory {!r}".format(
                name, self._species)) from None

    def sample(self, name: str,
               t: Union[float, Sequence[float], np.ndarray]) -> np.ndarray:
        """Linear interpolation of ``name`` at times ``t``."""
        return np.interp(t, self._times, self.column(name))

    def final(self) -> Dict[str, float]:
        return dict(zip(self._species, self._states[-1].tolist()))

    def window(self, start: float) -> 'Trajectory':
        keep = self._times >= start
        return Trajectory(self._species, self._times[keep], self._states[keep])

    def to_csv(self, fp: TextIO) -> None:
        data = np.column_stack([self._times, self._states])
        np.savetxt(fp, data, delimiter=',', fmt='%.17g', comments='',
                   header=','.join(('t',) + self._species))

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, fp: TextIO) -> 'Trajectory':
        header = fp.readline().strip()
        columns = header.split(',')
        if not header or columns[0] != 't' or len(columns) < 2:
            raise ParseError('bad trajectory header {!r}'.format(header), line=1,
                             expected='t,<species...>')
        try:
            data = np.loadtxt(fp, delimiter=',', ndmin=2)
        except ValueError as exc:
            raise ParseError('bad trajectory row: {}'.format(exc),
                             expected='{} numeric columns'.format(len(columns))) from exc
        if data.size == 0:
            data = data.reshape(0, len(columns))
        if data.shape[1] != len(columns):
            raise ParseError('row width {} does not match header'.format(data.shape[1]),
                             expected='{} columns'.format(len(columns)))
        try:
            return cls(columns[1:], data[:, 0], data[:, 1:])
        except ValueError as exc:
            raise ParseError(str(exc), expected='strictly increasing times') from exc


class PeriodMeasurement(NamedTuple):
    mean: float
    stddev: float
    count: int


def _sample_times(t_end: float, dt: float) -> np.ndarray:
    count = int(math.floor(t_end / dt * (1 + 1e-12)))
    times = np.arange(count + 1) * dt
    times = times[times < t_end * (1 - 1e-12)]
    return np.append(times, t_end)


def integrate(sys: PolyODE, y0: Union[Sequence[float], np.ndarray],
              spec: IntegrationSpec) -> Trajectory:
    """Adaptive implicit integration of ``sys`` from ``y0`` to ``spec.t_end``.

    Steps that take any component below ``-negtol`` (at the step end or
    at a sample inside it) are rejected and retried from the previous
    state with half the step; sampled values in ``[-negtol, 0)`` are
    clamped to 0.
    """
    spec.check()
    y = np.asarray(y0, dtype=float)
    if y.ndim != 1 or len(y) != len(sys.species):
        raise DimensionError(len(sys.species), int(y.size))
    for name, value in zip(sys.species, y):
        if not (np.isfinite(value) and value >= 0):
            raise ParameterError(
                "Initial concentration of {} must be finite and >= 0, got {!r}".format(
                    name, value))

    def fun(t: float, state: np.ndarray) -> np.ndarray:
        return eval_vector_field(sys, state)

    def jac(t: float, state: np.ndarray) -> np.ndarray:
        return sys.jacobian(state)

    def start(t0: float, state: np.ndarray,
              first_step: Optional[float] = None) -> OdeSolver:
        return METHODS[spec.method](
            fun, t0, state, spec.t_end, rtol=spec.rel_tol, atol=spec.abs_tol,
            max_step=spec.max_step, jac=jac, first_step=first_step)

    grid = _sample_times(spec.t_end, spec.dense_output_interval)
    samples = np.empty((len(grid), len(sys.species)))
    samples[0] = y
    k = 1
    solver = start(0.0, y)
    steps = rejections = total_rejections = 0
    while solver.status == 'running':
        t_prev, y_prev = solver.t, solver.y.copy()
        message = solver.step()
        if solver.status == 'failed':
            raise IntegrationError(message or 'integration step failed',
                                   time=t_prev, state=y_prev)
        j = k
        while j < len(grid) and grid[j] <= solver.t:
            j += 1
        block = solver.dense_output()(grid[k:j]).T if j > k else samples[:0]
        lowest = np.vstack([solver.y[None, :], block]).min(axis=0)
        bad = np.flatnonzero(lowest < -spec.negtol)
        if bad.size:
            name = sys.species[bad[0]]
            rejections += 1
            total_rejections += 1
            h = (solver.t - t_prev) / 2
            if (rejections > MAX_REJECTIONS or total_rejections > MAX_TOTAL_REJECTIONS or
                    h <= 10 * np.spacing(t_prev)):
                raise IntegrationError(
                    'negative excursion of {} ({!r})'.format(name, lowest[bad[0]]),
                    time=t_prev, state=y_prev, species=name)
            log.debug("Rejected step at t=%r: %s=%r, retrying with h=%r",
                      t_prev, name, lowest[bad[0]], h)
            solver = start(t_prev, np.maximum(y_prev, 0.0), first_step=h)
            continue
        rejections = 0
        steps += 1
        samples[k:j] = np.maximum(block, 0.0)
        k = j
    if k < len(grid):
        raise IntegrationError('integration stopped early', time=solver.t,
                               state=solver.y)
    if total_rejections:
        log.warning("Rejected %d steps for negative excursions below %r",
                    total_rejections, -spec.negtol)
    log.debug("Integrated %d species to t=%r in %d steps",
              len(sys.species), spec.t_end, steps)
    return Trajectory(sys.species, grid, samples)


async def integrate_many(
    jobs: Sequence[Tuple[PolyODE, Sequence[float], IntegrationSpec]], *,
    executor: Optional[Executor] = None
) -> List[Trajectory]:
    """Run independent integrations concurrently on ``executor``."""
    loop = asyncio.get_running_loop()
    owned = executor is None
    pool = ProcessPoolExecutor() if executor is None else executor
    try:
        futures = [loop.run_in_executor(pool, integrate, sys_, y0, spec)
                   for sys_, y0, spec in jobs]
        return list(await asyncio.gather(*futures))
    finally:
        if owned:
            pool.shutdown()


def detect_crossings(traj: Trajectory, species: str, level: float,
                     direction: str = 'up') -> np.ndarray:
    """Times where the linear interpolant of ``species`` crosses ``level``."""
    s = traj.column(species)
    t = traj.times
    if direction == 'up':
        idx = np.flatnonzero((s[:-1] < level) & (s[1:] >= level))
    elif direction == 'down':
        idx = np.flatnonzero((s[:-1] > level) & (s[1:] <= level))
    else:
        raise ValueError("direction must be 'up' or 'down', got {!r}".format(direction))
    frac = (level - s[idx]) / (s[idx + 1] - s[idx])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def measure_period(traj: Trajectory, species: str, level: float, *,
                   transient: Optional[float] = None,
                   min_crossings: int = 3) -> PeriodMeasurement:
    """Mean and spread of the gaps between upward crossings.

    Without ``transient`` everything before the second upward crossing
    is skipped; otherwise crossings before ``transient`` are.
    """
    crossings = detect_crossings(traj, species, level, 'up')
    if transient is None:
        kept = crossings[1:]
    else:
        kept = crossings[crossings >= transient]
    if len(kept) < min_crossings:
        raise MeasurementError(
            "Need {} upward crossings of {}={!r} after the transient, found {}".format(
                min_crossings, species, level, len(kept)), count=len(kept))
    gaps = np.diff(kept)
    return PeriodMeasurement(float(np.mean(gaps)), float(np.std(gaps)), len(gaps))


class PeriodReport(TypedDict):
    mean: Optional[float]
    stddev: Optional[float]
    count: int


def period_report(traj: Trajectory, species: Sequence[str],
                  level: float) -> Dict[str, PeriodReport]:
    """Measured periods per species, ``None`` where too few crossings were seen."""
    report: Dict[str, PeriodReport] = {}
    for name in species:
        try:
            found = measure_period(traj, name, level)
        except MeasurementError as exc:
            log.warning("No period for %s: %s", name, exc)
            report[name] = {'mean': None, 'stddev': None, 'count': exc.count}
        else:
            report[name] = {'mean': found.mean, 'stddev': found.stddev,
                            'count': found.count}
    return report
