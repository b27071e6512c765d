import math

import numpy as np
import pytest

from crnclock import ParameterError, QuadratureError
from crnclock.integrator import IntegrationSpec, Trajectory, integrate, measure_period
from crnclock.oscillator import OSCILLATOR_START, OscillatorParams, build_core
from crnclock.periodest import (LEFT_BRANCH, RIGHT_BRANCH, adaptive_quadrature,
                                estimate_period, f, f_prime)


def _simpson(a: float, b: float, rho: float, panels: int = 10 ** 6) -> float:
    x = np.linspace(a, b, 2 * panels + 1)
    fx = -x ** 3 + 6 * x ** 2 - 9 * x + 5
    y = (-3 * x ** 2 + 12 * x - 9) / ((x - rho) * fx)
    h = (b - a) / (2 * panels)
    return float(h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum()))


def test_cubic() -> None:
    assert f(1) == 1
    assert f(3) == 5
    assert f_prime(1) == 0
    assert f_prime(3) == 0


def test_quadrature_exact_for_cubics() -> None:
    result = adaptive_quadrature(lambda x: x ** 3 - x, 0.0, 2.0, 1e-12)
    assert result.value == pytest.approx(2.0, rel=1e-14)
    assert result.error_bound <= 1e-12


def test_quadrature_sine() -> None:
    result = adaptive_quadrature(math.sin, 0.0, math.pi, 1e-10)
    assert abs(result.value - 2.0) < 1e-9
    assert result.error_bound <= 1e-10


def test_quadrature_orientation() -> None:
    forward = adaptive_quadrature(math.exp, 0.0, 1.0, 1e-10)
    backward = adaptive_quadrature(math.exp, 1.0, 0.0, 1e-10)
    assert backward.value == -forward.value
    assert adaptive_quadrature(math.exp, 1.0, 1.0, 1e-10).value == 0.0


def test_quadrature_non_finite() -> None:
    def log(x: float) -> float:
        return math.log(x) if x > 0 else -math.inf

    with pytest.raises(QuadratureError) as ctx:
        adaptive_quadrature(log, 0.0, 1.0, 1e-8)
    assert ctx.value.abscissa == 0.0


def test_quadrature_budget() -> None:
    with pytest.raises(QuadratureError) as ctx:
        adaptive_quadrature(math.sin, 0.0, math.pi, 1e-30, max_intervals=8)
    assert ctx.value.estimate == pytest.approx(2.0, rel=1e-3)


def test_quadrature_bad_tolerance() -> None:
    with pytest.raises(ParameterError):
        adaptive_quadrature(math.sin, 0.0, 1.0, 0.0)


def test_period_parts_positive() -> None:
    found = estimate_period(0.1, 2.1)
    assert found.t1 > 0
    assert found.t2 > 0
    assert found.total == found.t1 + found.t2
    assert 15 < found.total < 30
    assert found.quadrature_error_bound <= 1e-9


def test_period_matches_composite_simpson() -> None:
    rho = 2.1
    found = estimate_period(0.1, rho, 1e-10)
    right = -_simpson(*RIGHT_BRANCH, rho) / 0.1
    left = _simpson(*LEFT_BRANCH, rho) / 0.1
    assert found.t1 == pytest.approx(right, rel=1e-8)
    assert found.t2 == pytest.approx(left, rel=1e-8)
    assert found.total == pytest.approx(right + left, rel=1e-8)


def test_period_inverse_eta1() -> None:
    slow = estimate_period(0.1, 2.1)
    fast = estimate_period(0.2, 2.1)
    assert fast.total == pytest.approx(slow.total / 2, rel=1e-12)
    assert fast.t1 == pytest.approx(slow.t1 / 2, rel=1e-12)


@pytest.mark.parametrize('rho', [1.0, 0.5, 3.0, 3.5])
def test_period_rho_out_of_range(rho: float) -> None:
    with pytest.raises(ParameterError):
        estimate_period(0.1, rho)


@pytest.mark.parametrize('eta1,tol', [(0.0, 1e-10), (-1.0, 1e-10), (0.1, 0.0)])
def test_period_bad_arguments(eta1: float, tol: float) -> None:
    with pytest.raises(ParameterError):
        estimate_period(eta1, 2.1, tol)


def test_period_agrees_with_simulation(core_trajectory: Trajectory) -> None:
    measured = measure_period(core_trajectory, 'x', 2.0)
    assert measured.mean == pytest.approx(estimate_period(0.1, 2.1).total, rel=0.1)


def test_simulated_period_scales_with_eta1(core_trajectory: Trajectory) -> None:
    slow = measure_period(core_trajectory, 'x', 2.0).mean
    traj = integrate(build_core(OscillatorParams(eta1=0.2)), OSCILLATOR_START,
                     IntegrationSpec(t_end=120.0))
    fast = measure_period(traj, 'x', 2.0).mean
    assert fast == pytest.approx(slow / 2, rel=0.02)
