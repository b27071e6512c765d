import pytest

from crnclock import PolyODE
from crnclock.integrator import IntegrationSpec, Trajectory, integrate
from crnclock.oscillator import (OSCILLATOR_START, OscillatorParams, Schedule, build_core,
                                 build_stack)


@pytest.fixture
def params() -> OscillatorParams:
    return OscillatorParams()


@pytest.fixture(scope="session")
def core_system() -> PolyODE:
    return build_core(OscillatorParams())


@pytest.fixture(scope="session")
def core_trajectory(core_system: PolyODE) -> Trajectory:
    return integrate(core_system, OSCILLATOR_START, IntegrationSpec(t_end=200.0))


@pytest.fixture(scope="session")
def stack_trajectory() -> Trajectory:
    return integrate(build_stack(2, OscillatorParams()), list(OSCILLATOR_START) * 2,
                     IntegrationSpec(t_end=200.0))


@pytest.fixture(scope="session")
def schedule() -> Schedule:
    return Schedule.build(2)


@pytest.fixture(scope="session")
def counter_trajectory(schedule: Schedule) -> Trajectory:
    return integrate(schedule.system(), schedule.initial_state(),
                     IntegrationSpec(t_end=150.0))
