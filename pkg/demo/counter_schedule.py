import logging

from crnclock.compiler import compile_ode
from crnclock.crn import format_crn
from crnclock.integrator import IntegrationSpec, integrate, measure_period
from crnclock.oscillator import CounterParams, Schedule, counter_steps
from crnclock.periodest import estimate_period


def main() -> None:
    logging.basicConfig(level=logging.INFO)
    schedule = Schedule.build(2, cparams=CounterParams(n=4))
    system = schedule.system()
    print(format_crn(compile_ode(system)))

    traj = integrate(system, schedule.initial_state(), IntegrationSpec(t_end=150.0))
    slow = measure_period(traj, 'x1', 2.0).mean
    fast = measure_period(traj, 'x2', 2.0).mean
    print('periods: {:.3f} {:.3f} (estimate {:.3f})'.format(
        slow, fast, estimate_period(0.1, 2.1).total))
    steps = counter_steps(traj)
    print('y after each period: {}'.format(
        ', '.join('{:.3f}'.format(y) for y in steps.y_levels)))


main()
