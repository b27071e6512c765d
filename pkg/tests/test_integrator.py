import asyncio
import io
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from crnclock import (DimensionError, IntegrationError, MeasurementError, ParameterError,
                      ParseError, PolyODE)
from crnclock.integrator import (IntegrationSpec, Trajectory, detect_crossings, integrate,
                                 integrate_many, measure_period, period_report)
from crnclock.oscillator import OSCILLATOR_START, OscillatorParams, build_core

DECAY = PolyODE(['x', 'y'], {'x': [(-1, {'x': 1})], 'y': [(1, {'x': 1})]})


def _wave(t_end: float = 20.0, dt: float = 0.01, period: float = 2.0) -> Trajectory:
    t = np.arange(0.0, t_end + dt / 2, dt)
    # phase shifted so that zero crossings fall between samples
    return Trajectory(['s'], t, np.sin(2 * math.pi * (t - dt / 2) / period)[:, None])


@pytest.mark.parametrize('changes', [
    {'t_end': 0.0}, {'rel_tol': 1e-13}, {'abs_tol': 0.0}, {'max_step': -1.0},
    {'dense_output_interval': 0.0}, {'negtol': -1.0}, {'method': 'RK45'},
])
def test_spec_check(changes: dict) -> None:  # type: ignore[type-arg]
    with pytest.raises(ParameterError):
        IntegrationSpec(t_end=1.0)._replace(**changes).check()


def test_exponential_decay() -> None:
    spec = IntegrationSpec(t_end=3.0, rel_tol=1e-9, abs_tol=1e-12, dense_output_interval=0.1)
    traj = integrate(DECAY, [1.0, 0.0], spec)
    assert traj.species == ('x', 'y')
    assert len(traj) == 31
    assert traj.times[0] == 0.0
    assert traj.times[-1] == 3.0
    np.testing.assert_allclose(traj.column('x'), np.exp(-traj.times), rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(traj.column('x') + traj.column('y'), 1.0, atol=1e-7)


def test_grid_ends_at_t_end() -> None:
    traj = integrate(DECAY, [1.0, 0.0], IntegrationSpec(t_end=1.05, dense_output_interval=0.1))
    assert traj.times[-1] == 1.05
    assert len(traj) == 12


@pytest.mark.parametrize('method', ['Radau', 'BDF', 'LSODA'])
def test_methods(method: str) -> None:
    traj = integrate(DECAY, [2.0, 0.0], IntegrationSpec(t_end=1.0, method=method))
    assert traj.final()['x'] == pytest.approx(2 * math.exp(-1), rel=1e-4)


def test_bad_initial_state() -> None:
    with pytest.raises(DimensionError):
        integrate(DECAY, [1.0], IntegrationSpec(t_end=1.0))
    with pytest.raises(ParameterError):
        integrate(DECAY, [1.0, -0.5], IntegrationSpec(t_end=1.0))
    with pytest.raises(ParameterError):
        integrate(DECAY, [math.nan, 0.0], IntegrationSpec(t_end=1.0))


def test_negative_drive_fails() -> None:
    # dx/dt = -1 is not mass-action and takes x below zero at t = 1
    sys_ = PolyODE(['x'], {'x': [(-1, {})]})
    with pytest.raises(IntegrationError) as ctx:
        integrate(sys_, [1.0], IntegrationSpec(t_end=5.0))
    assert ctx.value.time == pytest.approx(1.0, abs=1e-3)


def test_core_stays_non_negative(core_trajectory: Trajectory) -> None:
    assert core_trajectory.states.min() >= 0.0
    assert np.isfinite(core_trajectory.states).all()


def test_trajectory_is_read_only(core_trajectory: Trajectory) -> None:
    with pytest.raises(ValueError):
        core_trajectory.states[0, 0] = 1.0


def test_trajectory_rejects_unsorted_times() -> None:
    with pytest.raises(ValueError):
        Trajectory(['x'], [0.0, 0.0], [[1.0], [2.0]])


def test_trajectory_helpers() -> None:
    traj = Trajectory(['a', 'b'], [0.0, 1.0, 2.0], [[0.0, 5.0], [1.0, 6.0], [4.0, 7.0]])
    assert traj.sample('a', 1.5) == pytest.approx(2.5)
    assert traj.final() == {'a': 4.0, 'b': 7.0}
    assert traj.window(1.0).times.tolist() == [1.0, 2.0]
    with pytest.raises(KeyError):
        traj.column('c')


def test_csv_roundtrip() -> None:
    traj = Trajectory(['x', 'y'], [0.0, 0.1, 0.2], [[1.0, 0.0], [1 / 3, 2 / 3], [0.25, 1e-300]])
    text = traj.to_csv_string()
    assert text.splitlines()[0] == 't,x,y'
    again = Trajectory.from_csv(io.StringIO(text))
    assert again.species == traj.species
    assert np.array_equal(again.times, traj.times)
    assert np.array_equal(again.states, traj.states)


@pytest.mark.parametrize('text', [
    '', 'x,y\n0,1\n', 't\n0\n', 't,x\n0,1\n1,abc\n', 't,x\n0,1,2\n', 't,x\n1,0\n0,0\n',
])
def test_csv_malformed(text: str) -> None:
    with pytest.raises(ParseError):
        Trajectory.from_csv(io.StringIO(text))


def test_detect_crossings() -> None:
    traj = Trajectory(['s'], [0.0, 1.0, 2.0, 3.0], [[0.0], [2.0], [0.0], [2.0]])
    assert detect_crossings(traj, 's', 1.0, 'up').tolist() == [0.5, 2.5]
    assert detect_crossings(traj, 's', 1.0, 'down').tolist() == [1.5]
    with pytest.raises(ValueError):
        detect_crossings(traj, 's', 1.0, 'sideways')


def test_measure_period() -> None:
    found = measure_period(_wave(), 's', 0.0)
    assert found.mean == pytest.approx(2.0, rel=1e-6)
    assert found.stddev < 1e-6
    # upward crossings near 0, 2, ..., 18 with the first one dropped
    assert found.count == 8


def test_measure_period_transient() -> None:
    found = measure_period(_wave(), 's', 0.0, transient=4.5)
    assert found.count == 6
    assert found.mean == pytest.approx(2.0, rel=1e-6)


def test_measure_period_too_few_crossings() -> None:
    with pytest.raises(MeasurementError) as ctx:
        measure_period(_wave(t_end=5.5), 's', 0.0)
    assert ctx.value.count < 3


def test_period_report() -> None:
    traj = Trajectory(['s', 'flat'], _wave().times,
                      np.column_stack([_wave().column('s'), np.zeros(len(_wave()))]))
    report = period_report(traj, ['s', 'flat'], 0.0)
    assert report['s']['mean'] == pytest.approx(2.0, rel=1e-6)
    assert report['flat'] == {'mean': None, 'stddev': None, 'count': 0}


def test_integrate_many_matches_serial() -> None:
    params = OscillatorParams()
    spec = IntegrationSpec(t_end=5.0)
    jobs = [(DECAY, [1.0, 0.0], spec), (build_core(params), OSCILLATOR_START, spec)]
    with ThreadPoolExecutor(max_workers=2) as pool:
        results = asyncio.run(integrate_many(jobs, executor=pool))
    assert len(results) == 2
    for (sys_, y0, s), traj in zip(jobs, results):
        assert np.array_equal(traj.states, integrate(sys_, y0, s).states)


def _xy_subsystem(params: OscillatorParams) -> PolyODE:
    core = build_core(params)
    return PolyODE(['x', 'y'], {name: core.terms(name) for name in ('x', 'y')})


def test_time_rescaling() -> None:
    # doubling eta1 runs the xy-subsystem at twice the speed
    params = OscillatorParams()
    slow = _xy_subsystem(params)
    fast = _xy_subsystem(params._replace(eta1=2 * params.eta1))
    rel_tol = 1e-8
    for t in np.linspace(1.0, 40.0, 20):
        a = integrate(slow, [1.0, 1.0], IntegrationSpec(
            t_end=float(t), rel_tol=rel_tol, abs_tol=1e-10))
        b = integrate(fast, [1.0, 1.0], IntegrationSpec(
            t_end=float(t) / 2, rel_tol=rel_tol, abs_tol=1e-10))
        np.testing.assert_allclose(b.states[-1], a.states[-1],
                                   rtol=10 * rel_tol, atol=10 * rel_tol)


def test_tolerance_convergence() -> None:
    logistic = PolyODE(['x', 'y'], {'x': [(1, {'x': 1}), (-1, {'x': 2})],
                                    'y': [(0.5, {'x': 1}), (-0.5, {'y': 1})]})
    loose = IntegrationSpec(t_end=10.0, rel_tol=1e-6, abs_tol=1e-8)
    tight = loose._replace(rel_tol=loose.rel_tol / 2, abs_tol=loose.abs_tol / 2)
    a = integrate(logistic, [0.1, 0.0], loose).states[-1]
    b = integrate(logistic, [0.1, 0.0], tight).states[-1]
    np.testing.assert_allclose(b, a, rtol=10 * loose.rel_tol, atol=10 * loose.abs_tol)


def test_equilibrium_start_is_stationary() -> None:
    params = OscillatorParams(rho=2.0)
    # f(2) = 3 for the default cubic
    traj = integrate(_xy_subsystem(params), [2.0, 3.0], IntegrationSpec(t_end=10.0))
    np.testing.assert_allclose(traj.states, np.tile([2.0, 3.0], (len(traj), 1)),
                               rtol=0, atol=1e-12)
