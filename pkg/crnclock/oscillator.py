"""Relaxation-oscillator clocks, their wiring and the loop counter.

Each oscillator is a cubic-nullcline relaxation subsystem in ``x, y``
feeding a truncated-subtraction subsystem in ``u, v``; ``u`` and ``v``
form a symmetric pair of clock signals.  Oscillator ``k`` runs with
``eta1 * 2**(k-1)``, so its period is ``1/2**(k-1)`` of the first one.
"""

import math
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from . import (CRNClockError, ParameterError, PolyODE, ValidationError, canonicalize,
               check_identifier)
from .compiler import compile_ode
from .crn import CRN, Reaction, catalyze, to_ode, variable_name
from .integrator import Trajectory, detect_crossings

# -x^3 + 6x^2 - 9x + 5, highest power first
DEFAULT_CUBIC = (-1.0, 6.0, -9.0, 5.0)

OSCILLATOR_START = (1.0, 1.0, 0.0, 0.0)

CLOCK_ROLES = ('u1', 'v1', 'u2', 'v2')


class OscillatorParams(NamedTuple):
    eta1: float = 0.1
    epsilon: float = 0.001
    rho: float = 2.1
    eta2: float = 10.0
    p: float = 2.0
    c: float = 5000.0

    def check(self) -> 'OscillatorParams':
        for name in ('eta1', 'epsilon', 'eta2', 'p', 'c'):
            if not getattr(self, name) > 0:
                raise ParameterError("{} must be > 0, got {!r}".format(
                    name, getattr(self, name)))
        if not self.epsilon <= 0.01:
            raise ParameterError(
                "epsilon must be <= 0.01, got {!r}".format(self.epsilon))
        if not 1 < self.rho < 3:
            raise ParameterError("rho must lie in (1, 3), got {!r}".format(self.rho))
        if not self.c >= 100:
            raise ParameterError("c must be >= 100, got {!r}".format(self.c))
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> 'OscillatorParams':
        return cls(**{k: float(data[k]) for k in cls._fields if k in data}).check()


class CounterParams(NamedTuple):
    eta3: float = 500.0
    eta4: float = 1.0
    n: int = 4
    l: float = 1.0  # noqa: E741

    def check(self) -> 'CounterParams':
        for name in ('eta3', 'eta4', 'l'):
            if not getattr(self, name) > 0:
                raise ParameterError("{} must be > 0, got {!r}".format(
                    name, getattr(self, name)))
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ParameterError("n must be an integer >= 1, got {!r}".format(self.n))
        return self

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> 'CounterParams':
        values: Dict[str, Any] = {k: float(data[k]) for k in cls._fields if k in data}
        if 'n' in values:
            if not float(values['n']).is_integer():
                raise ParameterError(
                    "n must be an integer >= 1, got {!r}".format(values['n']))
            values['n'] = int(values['n'])
        return cls(**values).check()


class NullclineGeometry(NamedTuple):
    fold_points: Tuple[Tuple[float, float], Tuple[float, float]]
    landing_points: Tuple[Tuple[float, float], Tuple[float, float]]
    equilibrium: Tuple[float, float]


class ClockAssignment:

    """Clock catalysts per module, modules numbered from 1.

    For ``m`` oscillators there are ``m + 1`` modules: Module 1 runs on
    ``V1``, Module ``k`` on ``U1..U(k-1)`` plus one signal of oscillator
    ``k``, and the last module on ``U1..Um``.
    """

    def __init__(self, catalysts: Mapping[int, Sequence[str]]) -> None:
        self._catalysts = {int(k): tuple(check_identifier(s) for s in v)
                           for k, v in catalysts.items()}
        count = len(self._catalysts)
        if count < 3 or sorted(self._catalysts) != list(range(1, count + 1)):
            raise ValidationError(
                "Modules must be numbered 1..m+1 with m >= 2, got {}".format(
                    sorted(self._catalysts)))
        m = count - 1
        if self._catalysts[1] != ('V1',):
            raise ValidationError("Module 1 must run on V1, got {}".format(
                self._catalysts[1]))
        last = tuple('U{}'.format(i) for i in range(1, m + 1))
        if self._catalysts[count] != last:
            raise ValidationError("Module {} must run on {}, got {}".format(
                count, last, self._catalysts[count]))
        for k in range(2, count):
            gate = self._catalysts[k]
            upper = ['U{}'.format(i) for i in range(1, k)]
            own = [s for s in gate if s in ('U{}'.format(k), 'V{}'.format(k))]
            if list(gate[:k - 1]) != upper or len(own) != 1 or len(gate) != k:
                raise ValidationError(
                    "Module {} must run on {} plus one of U{k}/V{k}, got {}".format(
                        k, upper, gate, k=k))

    def __repr__(self) -> str:
        return '<{} {!r}>'.format(self.__class__.__name__, self._catalysts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClockAssignment):
            return NotImplemented
        return self._catalysts == other._catalysts

    @property
    def module_count(self) -> int:
        return len(self._catalysts)

    @property
    def catalysts(self) -> Dict[int, Tuple[str, ...]]:
        return dict(self._catalysts)

    def to_json(self) -> Dict[str, List[str]]:
        return {str(k): list(v) for k, v in sorted(self._catalysts.items())}

    @classmethod
    def from_json(cls, data: Mapping[str, Sequence[str]]) -> 'ClockAssignment':
        try:
            catalysts = {int(k): list(v) for k, v in data.items()}
        except (TypeError, ValueError, AttributeError) as exc:
            raise ValidationError("Malformed assignment: {}".format(exc)) from exc
        return cls(catalysts)


def _names(suffix: str) -> Tuple[str, str, str, str]:
    return ('x' + suffix, 'y' + suffix, 'u' + suffix, 'v' + suffix)


def build_core(params: OscillatorParams, suffix: str = '') -> PolyODE:
    params.check()
    x, y, u, v = _names(suffix)
    eta1, eta2, c = params.eta1, params.eta2, params.c
    k = eta1 / params.epsilon
    equations = {
        x: [(-k, {x: 4}), (6 * k, {x: 3}), (-9 * k, {x: 2}), (5 * k, {x: 1}),
            (-k, {x: 1, y: 1})],
        y: [(eta1, {x: 1, y: 1}), (-eta1 * params.rho, {y: 1})],
        u: [(eta2 * params.p, {}), (-eta2, {u: 1}), (-eta2 * c, {u: 1, v: 1})],
        v: [(eta2, {x: 1}), (-eta2, {v: 1}), (-eta2 * c, {u: 1, v: 1})],
    }
    return canonicalize(PolyODE([x, y, u, v], equations))


def build_stack(m: int, params: OscillatorParams) -> PolyODE:
    if m < 1:
        raise ParameterError("Need at least one oscillator, got m={!r}".format(m))
    return PolyODE.union(*(
        build_core(params._replace(eta1=params.eta1 * 2 ** (k - 1)), str(k))
        for k in range(1, m + 1)))


def build_counter(cparams: CounterParams,
                  clock_species: Optional[Mapping[str, str]] = None, *,
                  names: Tuple[str, str, str] = ('x', 'y', 'z')) -> PolyODE:
    """Loop counter: x tracks ``n - y``, y steps up by one per loop.

    The clock species are carried with zero right-hand sides so that the
    counter composes with an oscillator stack by :meth:`PolyODE.add`.
    """
    cparams.check()
    clocks = dict(zip(CLOCK_ROLES, CLOCK_ROLES))
    clocks.update(clock_species or {})
    x, y, z = names
    u1, v1, u2, v2 = (clocks[r] for r in CLOCK_ROLES)
    if set(names) & set(clocks.values()):
        raise ValidationError("Counter species {} clash with clocks {}".format(
            names, sorted(clocks.values())))
    eta3, eta4 = cparams.eta3, cparams.eta4
    module1 = {x: 1, v1: 1}
    module2 = {u1: 1, v2: 1, x: 1}
    module3 = {u1: 1, u2: 1, x: 1}
    equations = {
        x: [(eta3 * cparams.n, module1), (-eta3, {**module1, y: 1}),
            (-eta3, {**module1, x: 2})],
        y: [(eta4, {**module3, z: 1}), (-eta4, {**module3, y: 1})],
        z: [(eta4, {**module2, y: 1}), (eta4 * cparams.l, module2),
            (-eta4, {**module2, z: 1})],
    }
    return canonicalize(PolyODE([x, y, z, u1, v1, u2, v2], equations))


def _exclusive(a: Sequence[str], b: Sequence[str]) -> bool:
    """Whether some oscillator gates ``a`` with U and ``b`` with V, or the reverse."""
    swap = {'U': 'V', 'V': 'U'}
    return any(swap[s[0]] + s[1:] in b for s in a)


def assign_catalysts(m: int) -> ClockAssignment:
    if m < 2:
        raise ParameterError(
            "Need m >= 2 oscillators for m+1 modules, got m={!r}".format(m))
    catalysts: Dict[int, List[str]] = {1: ['V1']}
    for k in range(2, m + 1):
        catalysts[k] = ['U{}'.format(i) for i in range(1, k)] + ['V{}'.format(k)]
    catalysts[m + 1] = ['U{}'.format(i) for i in range(1, m + 1)]
    return ClockAssignment(catalysts)


def analyze_nullcline(coefficients: Sequence[float] = DEFAULT_CUBIC,
                      rho: float = OscillatorParams().rho) -> NullclineGeometry:
    """Folds, landing points and equilibrium of ``y = f(x)``.

    ``coefficients`` run from the cubic term down to the constant.  The
    fast jump from a fold at ``x_f`` lands at the third root of
    ``f(x) - f(x_f)``, which has a double root at ``x_f``.
    """
    a3, a2, a1, a0 = (float(c) for c in coefficients)
    if a3 == 0:
        raise ParameterError("Not a cubic: leading coefficient is 0")
    disc = 4 * a2 ** 2 - 12 * a3 * a1
    if not disc > 0:
        raise ParameterError(
            "Cubic {} has no two real critical points".format(tuple(coefficients)))
    poly = Polynomial([a0, a1, a2, a3])
    root = math.sqrt(disc)
    folds = sorted(((-2 * a2 + root) / (6 * a3), (-2 * a2 - root) / (6 * a3)))
    fold_points = tuple((x, float(poly(x))) for x in folds)
    for x, y in fold_points:
        if not y > 0:
            raise ParameterError(
                "Fold at x={!r} has non-positive value {!r}".format(x, y))
    landing_points = tuple((-a2 / a3 - 2 * x, y) for x, y in fold_points)
    return NullclineGeometry(fold_points, landing_points,  # type: ignore[arg-type]
                             (rho, float(poly(rho))))


class ClockPairReport(NamedTuple):
    settled_fraction: float
    transition_fraction: float
    violation_fraction: float
    alternations: int
    symmetric: bool


def verify_clock_pair(traj: Trajectory, u: str, v: str, *,
                      low: float = 0.01, high: float = 0.5,
                      transient: float = 40.0,
                      max_transition: float = 0.05) -> ClockPairReport:
    """Check that ``u`` and ``v`` form a symmetric clock pair.

    A sample is settled when one signal is below ``low`` and the other
    above ``high``; every other sample belongs to a transition.  Samples
    with one signal low and the other not yet high are counted as
    violations, which are allowed only inside the transition budget.
    """
    if not high > low > 0:
        raise ParameterError("Need high > low > 0, got low={!r} high={!r}".format(
            low, high))
    w = traj.window(transient)
    a, b = w.column(u), w.column(v)
    if not len(a):
        return ClockPairReport(0.0, 0.0, 0.0, 0, False)
    lower = np.minimum(a, b)
    upper = np.maximum(a, b)
    settled = (lower < low) & (upper > high)
    violation = (lower < low) & (upper <= high)
    which = (a < b)[settled]
    alternations = int(np.count_nonzero(which[1:] != which[:-1]))
    settled_fraction = float(np.mean(settled))
    transition_fraction = 1.0 - settled_fraction
    violation_fraction = float(np.mean(violation))
    symmetric = (settled_fraction > 0 and transition_fraction < max_transition and
                 alternations >= 2)
    return ClockPairReport(settled_fraction, transition_fraction, violation_fraction,
                           alternations, bool(symmetric))


class QuasiSteadyReport(NamedTuple):
    difference_fraction: float
    product_fraction: float
    excluded_fraction: float
    max_difference: float
    max_product: float
    product_bound: float


def check_quasi_steady(traj: Trajectory, params: OscillatorParams, suffix: str = '', *,
                       transient: float = 40.0, zeta: float = 10.0,
                       tolerance: float = 0.05,
                       settle: Optional[float] = None) -> QuasiSteadyReport:
    """Compare ``u - v`` with ``p - x`` and ``u * v`` with ``zeta * p / c``.

    At the quasi-steady state ``u * v = (p - u) / c <= p / c``; ``zeta``
    is the allowed excess over that.

    ``u - v`` relaxes to ``p - x`` at rate ``eta2``, so samples within
    ``settle`` (default ``5 / eta2``) of a crossing of x through p, where
    x jumps between branches, are left out.
    """
    x, _, u, v = _names(suffix)
    if settle is None:
        settle = 5.0 / params.eta2
    w = traj.window(transient)
    t = w.times
    crossings = np.concatenate([detect_crossings(w, x, params.p, 'up'),
                                detect_crossings(w, x, params.p, 'down')])
    excluded = np.zeros(len(t), dtype=bool)
    for tc in crossings:
        excluded |= np.abs(t - tc) <= settle
    keep = ~excluded
    bound = zeta * params.p / params.c
    difference = np.abs((w.column(u) - w.column(v)) - (params.p - w.column(x)))[keep]
    product = (w.column(u) * w.column(v))[keep]
    if not len(difference):
        return QuasiSteadyReport(0.0, 0.0, 1.0, math.inf, math.inf, bound)
    return QuasiSteadyReport(
        float(np.mean(difference < tolerance)),
        float(np.mean(product < bound)),
        float(np.mean(excluded)),
        float(difference.max()),
        float(product.max()),
        bound)


def counter_modules(cparams: CounterParams) -> Dict[int, CRN]:
    """Reaction modules of the counter, before clock gating.

    Module 1 drives X to ``n - y`` (truncated subtraction); Modules 2
    and 3 copy ``y + l`` into Z and Z back into Y.  N and L are catalytic
    constants holding n and l.
    """
    cparams.check()
    eta3, eta4 = cparams.eta3, cparams.eta4
    return {
        1: CRN([Reaction.of({'N': 1, 'X': 1}, {'N': 1, 'X': 2}, eta3),
                Reaction.of({'Y': 1, 'X': 1}, {'Y': 1}, eta3),
                Reaction.of({'X': 2}, {'X': 1}, eta3)]),
        2: CRN([Reaction.of({'Y': 1}, {'Y': 1, 'Z': 1}, eta4),
                Reaction.of({'L': 1}, {'L': 1, 'Z': 1}, eta4),
                Reaction.of({'Z': 1}, {}, eta4)]),
        3: CRN([Reaction.of({'Z': 1}, {'Y': 1, 'Z': 1}, eta4),
                Reaction.of({'Y': 1}, {}, eta4)]),
    }


def regulate(modules: Mapping[int, CRN], assignment: ClockAssignment,
             terminator: Optional[str] = 'X') -> CRN:
    """Gate every module by its clock catalysts.

    ``terminator`` is added as a further catalyst to every module but
    Module 1, so that driving it to zero stops the whole loop.
    """
    gates = assignment.catalysts
    unknown = sorted(set(modules) - set(gates))
    if unknown:
        raise ValidationError("Modules {} have no clock assignment".format(unknown))
    network = CRN([])
    for k in sorted(modules):
        catalysts = list(gates[k])
        if terminator is not None and k != 1:
            catalysts.append(terminator)
        network = network.add(catalyze(modules[k], catalysts))
    return network


def counter_start(cparams: CounterParams, x0: Optional[float] = None) -> List[float]:
    """Initial (x, y, z) of the counter; x = 0 is absorbing, so x0 > 0."""
    x0 = float(cparams.n) if x0 is None else float(x0)
    if not x0 > 0:
        raise ParameterError(
            "Counter x(0) must be > 0 (x = 0 never recovers), got {!r}".format(x0))
    return [x0, 0.0, 0.0]


class CounterSteps(NamedTuple):
    y_levels: List[float]
    x_levels: List[float]


def counter_steps(traj: Trajectory, *, clock: str = 'x1', x: str = 'x', y: str = 'y',
                  level: float = OscillatorParams().p) -> CounterSteps:
    """Counter state around each Module 1 phase.

    Module 1 runs while the first oscillator's x is above ``level``: y is
    read when that phase starts, x when it ends.
    """
    starts = detect_crossings(traj, clock, level, 'up')
    ends = detect_crossings(traj, clock, level, 'down')
    return CounterSteps(traj.sample(y, starts).tolist(), traj.sample(x, ends).tolist())


class MonotoneReport(NamedTuple):
    max_drop: float
    max_value: float
    monotone: bool


def check_counter_monotone(traj: Trajectory, cparams: CounterParams, y: str = 'y', *,
                           tolerance: float = 0.02,
                           margin: float = 0.05) -> MonotoneReport:
    values = traj.column(y)
    drop = float(np.max(np.maximum.accumulate(values) - values)) if len(values) else 0.0
    top = float(values.max()) if len(values) else 0.0
    return MonotoneReport(drop, top,
                          drop <= tolerance and top <= cparams.n + margin)


class Schedule:

    """m oscillators, the loop counter and the module wiring."""

    def __init__(self, oscillators: Sequence[OscillatorParams],
                 counter: CounterParams, assignment: ClockAssignment) -> None:
        if len(oscillators) < 2:
            raise ParameterError(
                "Need m >= 2 oscillators, got {}".format(len(oscillators)))
        if assignment.module_count != len(oscillators) + 1:
            raise ValidationError(
                "Assignment has {} modules, expected {}".format(
                    assignment.module_count, len(oscillators) + 1))
        gates = assignment.catalysts
        for j, k in ((1, 2), (1, 3), (2, 3)):
            if not _exclusive(gates[j], gates[k]):
                raise ValidationError(
                    "Counter modules {} and {} overlap: {} and {} can be high together"
                    .format(j, k, list(gates[j]), list(gates[k])))
        self._oscillators = tuple(p.check() for p in oscillators)
        self._counter = counter.check()
        self._assignment = assignment

    def __repr__(self) -> str:
        return '<{} oscillators:{} modules:{}>'.format(
            self.__class__.__name__, len(self._oscillators),
            self._assignment.module_count)

    @classmethod
    def build(cls, m: int, params: OscillatorParams = OscillatorParams(),
              cparams: CounterParams = CounterParams()) -> 'Schedule':
        return cls([params._replace(eta1=params.eta1 * 2 ** (k - 1))
                    for k in range(1, m + 1)], cparams, assign_catalysts(m))

    @property
    def oscillators(self) -> Tuple[OscillatorParams, ...]:
        return self._oscillators

    @property
    def counter(self) -> CounterParams:
        return self._counter

    @property
    def assignment(self) -> ClockAssignment:
        return self._assignment

    def counter_system(self) -> PolyODE:
        """The counter modules gated by Modules 1-3 of the assignment."""
        gated = to_ode(regulate(counter_modules(self._counter), self._assignment))
        pinned = gated.substitute({'n': float(self._counter.n), 'l': self._counter.l})
        names = ['x', 'y', 'z']
        return canonicalize(PolyODE(
            names + [s for s in pinned.species if s not in names], pinned.equations))

    def system(self) -> PolyODE:
        stack = PolyODE.union(*(build_core(p, str(k))
                                for k, p in enumerate(self._oscillators, 1)))
        result = stack.add(self.counter_system())
        for species in self._assignment.catalysts.values():
            for name in species:
                if variable_name(name) not in result:
                    raise ValidationError("Clock {} is not in the system".format(name))
        return result

    def network(self) -> CRN:
        return compile_ode(self.system())

    def initial_state(self, x0: Optional[float] = None) -> List[float]:
        return (list(OSCILLATOR_START) * len(self._oscillators) +
                counter_start(self._counter, x0))

    def to_json(self) -> Dict[str, Any]:
        return {
            'modules': self._assignment.module_count,
            'oscillators': [dict(p._asdict()) for p in self._oscillators],
            'assignment': self._assignment.to_json(),
            'counter': dict(self._counter._asdict()),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> 'Schedule':
        try:
            oscillators = [OscillatorParams.from_mapping(p) for p in data['oscillators']]
            counter = CounterParams.from_mapping(data.get('counter', {}))
            assignment = ClockAssignment.from_json(data['assignment'])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CRNClockError):
                raise
            raise ValidationError("Malformed schedule: {}".format(exc)) from exc
        if 'modules' in data and data['modules'] != assignment.module_count:
            raise ValidationError("'modules' is {!r} but the assignment has {}".format(
                data['modules'], assignment.module_count))
        return cls(oscillators, counter, assignment)


BUILTIN_SYSTEMS = ('core', 'stack2', 'counter3')


class Builtin(NamedTuple):
    system: PolyODE
    initial: List[float]
    clocks: List[str]


def split_params(data: Mapping[str, Any]) -> Tuple[OscillatorParams, CounterParams]:
    """Flat ``{name: number}`` map into oscillator and counter parameters."""
    unknown = sorted(set(data) - set(OscillatorParams._fields) - set(CounterParams._fields))
    if unknown:
        raise ParameterError("Unknown parameters {}".format(unknown))
    try:
        return OscillatorParams.from_mapping(data), CounterParams.from_mapping(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError("Parameters must be numbers: {}".format(exc)) from exc


def build_builtin(name: str, params: OscillatorParams = OscillatorParams(),
                  cparams: CounterParams = CounterParams()) -> Builtin:
    if name == 'core':
        return Builtin(build_core(params), list(OSCILLATOR_START), ['x'])
    if name == 'stack2':
        return Builtin(build_stack(2, params), list(OSCILLATOR_START) * 2, ['x1', 'x2'])
    if name == 'counter3':
        schedule = Schedule.build(2, params, cparams)
        return Builtin(schedule.system(), schedule.initial_state(), ['x1', 'x2'])
    raise ValidationError("Unknown built-in system {!r}, expected one of {}".format(
        name, list(BUILTIN_SYSTEMS)))
