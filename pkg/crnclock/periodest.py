"""Slow-flow period integrals of the relaxation oscillator.

On each attracting branch of the cubic nullcline ``y = f(x)`` the slow
flow gives ``dt = f'(x) dx / (eta1 (x - rho) f(x))``.  The right branch
runs from the landing point x=4 down to the fold x=3 and the left
branch from the landing point x=0 up to the fold x=1.
"""

import heapq
import math
from functools import lru_cache
from typing import Callable, List, NamedTuple, Tuple

from . import ParameterError, QuadratureError
from .log import log

RIGHT_BRANCH = (3.0, 4.0)
LEFT_BRANCH = (0.0, 1.0)

MAX_INTERVALS = 200000

# periods are computed as (eta1-free integral) / eta1; for eta1 above this
# floor the reduced integrals do not depend on eta1, so periods scale as
# exactly 1/eta1
_ETA1_FLOOR = 1e-3


class QuadratureResult(NamedTuple):
    value: float
    error_bound: float


class PeriodEstimate(NamedTuple):
    t1: float
    t2: float
    total: float
    quadrature_error_bound: float


def f(x: float) -> float:
    return -x ** 3 + 6 * x ** 2 - 9 * x + 5


def f_prime(x: float) -> float:
    return -3 * x ** 2 + 12 * x - 9


_Panel = Tuple[float, float, float, float, float, float, float, float, float]


def adaptive_quadrature(fn: Callable[[float], float], a: float, b: float,
                        tol: float, *,
                        max_intervals: int = MAX_INTERVALS) -> QuadratureResult:
    """Globally adaptive Simpson quadrature.

    The panel with the largest error estimate is split until the summed
    estimates drop below ``tol``.  Panel values carry the Richardson
    correction ``(S2 - S1) / 15``.
    """
    if not tol > 0:
        raise ParameterError("tol must be > 0, got {!r}".format(tol))
    if a == b:
        return QuadratureResult(0.0, 0.0)
    if a > b:
        result = adaptive_quadrature(fn, b, a, tol, max_intervals=max_intervals)
        return QuadratureResult(-result.value, result.error_bound)

    def sample(x: float) -> float:
        value = float(fn(x))
        if not math.isfinite(value):
            raise QuadratureError(
                "Integrand is not finite at x={!r}: {!r}".format(x, value), abscissa=x)
        return value

    def panel(lo: float, flo: float, fmid: float, hi: float, fhi: float) -> _Panel:
        h = hi - lo
        flm = sample(lo + h / 4)
        frm = sample(hi - h / 4)
        whole = h / 6 * (flo + 4 * fmid + fhi)
        halves = h / 12 * (flo + 4 * flm + 2 * fmid + 4 * frm + fhi)
        err = (halves - whole) / 15
        # heap order: largest error first, ties broken by position
        return (-abs(err), lo, hi, halves + err, flo, flm, fmid, frm, fhi)

    heap: List[_Panel] = [panel(a, sample(a), sample((a + b) / 2), b, sample(b))]
    total_err = -heap[0][0]
    while True:
        if total_err <= tol:
            # the running sum drifts; confirm before stopping
            total_err = math.fsum(-p[0] for p in heap)
            if total_err <= tol:
                break
        if len(heap) >= max_intervals:
            estimate = math.fsum(p[3] for p in heap)
            raise QuadratureError(
                "Tolerance {!r} not reached with {} intervals (error {!r}, "
                "estimate {!r})".format(tol, len(heap), total_err, estimate),
                estimate=estimate)
        neg_err, lo, hi, _, flo, flm, fmid, frm, fhi = heapq.heappop(heap)
        mid = (lo + hi) / 2
        left = panel(lo, flo, flm, mid, fmid)
        right = panel(mid, fmid, frm, hi, fhi)
        heapq.heappush(heap, left)
        heapq.heappush(heap, right)
        total_err += neg_err - left[0] - right[0]
    if len(heap) > MAX_INTERVALS // 10:
        log.warning("Quadrature on [%r, %r] needed %d intervals", a, b, len(heap))
    return QuadratureResult(math.fsum(p[3] for p in heap), total_err)


def _check_rho(rho: float) -> None:
    if not 1 < rho < 3:
        raise ParameterError(
            "rho must lie in (1, 3) so that the pole x=rho stays outside "
            "[0, 1] and [3, 4], got {!r}".format(rho))


@lru_cache(maxsize=128)
def _reduced_periods(rho: float, tol: float) -> Tuple[QuadratureResult, QuadratureResult]:
    def integrand(x: float) -> float:
        return f_prime(x) / ((x - rho) * f(x))

    right = adaptive_quadrature(integrand, *RIGHT_BRANCH, tol)
    left = adaptive_quadrature(integrand, *LEFT_BRANCH, tol)
    log.debug("Reduced periods for rho=%r: right=%r left=%r", rho, right, left)
    return right, left


def estimate_period(eta1: float, rho: float, tol: float = 1e-10) -> PeriodEstimate:
    """Period of x as the sum of the right- and left-branch passage times.

    The right-branch integral is written from 4 down to 3; its integrand
    is negative on [3, 4], so the oriented value is positive.
    """
    if not eta1 > 0:
        raise ParameterError("eta1 must be > 0, got {!r}".format(eta1))
    if not tol > 0:
        raise ParameterError("tol must be > 0, got {!r}".format(tol))
    _check_rho(rho)
    right, left = _reduced_periods(float(rho), tol * min(eta1, _ETA1_FLOOR))
    t1 = -right.value / eta1
    t2 = left.value / eta1
    return PeriodEstimate(t1, t2, t1 + t2,
                          (right.error_bound + left.error_bound) / eta1)
