"""Relaxation-oscillator clocks for chemical reaction networks."""

__version__ = '0.1.0'

import re
from functools import cached_property
from typing import (Any, Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional,
                    Sequence, Tuple, TypedDict, Union)

import numpy as np


MAX_EXPONENT = 8

_IDENTIFIER = re.compile(r'^[A-Za-z][A-Za-z0-9_]*$')


class CRNClockError(Exception):
    """Base class for all errors raised by the package."""


class ValidationError(CRNClockError, ValueError):
    pass


class ParameterError(CRNClockError, ValueError):
    pass


class DimensionError(CRNClockError, ValueError):

    def __init__(self, expected: int, got: int) -> None:
        super().__init__(
            "State has {} entries, system has {} species".format(got, expected))
        self.expected = expected
        self.got = got


class ParseError(CRNClockError, ValueError):

    def __init__(self, message: str, *, line: Optional[int] = None,
                 expected: Optional[str] = None) -> None:
        if line is not None:
            message = 'line {}: {}'.format(line, message)
        if expected is not None:
            message = '{} (expected {})'.format(message, expected)
        super().__init__(message)
        self.line = line
        self.expected = expected


class RealizabilityError(CRNClockError):

    def __init__(self, violations: Sequence['Violation']) -> None:
        super().__init__('Unrealizable terms: {}'.format(
            ', '.join('({}) {} in d{}/dt'.format(v.coefficient, v.monomial, v.species)
                      for v in violations)))
        self.violations = list(violations)


class StoichiometryError(CRNClockError, ValueError):
    """Terms whose compiled reaction would have a side above MAX_EXPONENT."""

    def __init__(self, terms: Sequence['Violation']) -> None:
        super().__init__('Reaction sides exceed stoichiometry {}: {}'.format(
            MAX_EXPONENT, ', '.join('({}) {} in d{}/dt'.format(
                t.coefficient, t.monomial, t.species) for t in terms)))
        self.terms = list(terms)


class IntegrationError(CRNClockError):

    def __init__(self, message: str, *, time: float, state: Sequence[float],
                 species: Optional[str] = None) -> None:
        super().__init__('{} at t={!r}'.format(message, time))
        self.time = time
        self.state = list(state)
        self.species = species


class QuadratureError(CRNClockError):

    def __init__(self, message: str, *, abscissa: Optional[float] = None,
                 estimate: Optional[float] = None) -> None:
        super().__init__(message)
        self.abscissa = abscissa
        self.estimate = estimate


class MeasurementError(CRNClockError):

    def __init__(self, message: str, *, count: int) -> None:
        super().__init__(message)
        self.count = count


def check_identifier(name: str) -> str:
    if not isinstance(name, str):
        raise TypeError("Expected species name str got {!r}".format(name))
    if not _IDENTIFIER.match(name):
        raise ValidationError("Invalid species name {!r}".format(name))
    return name


class Monomial(Mapping[str, int]):

    """Product of species powers, immutable and hashable.

    Absent species have exponent 0; the empty monomial is the constant 1.
    """

    __slots__ = ('_powers',)

    def __init__(self, powers: Optional[Mapping[str, int]] = None) -> None:
        items = []
        for name, exp in (powers or {}).items():
            check_identifier(name)
            if isinstance(exp, bool) or not isinstance(exp, (int, np.integer)):
                raise ValidationError(
                    "Exponent of {} must be an integer, got {!r}".format(name, exp))
            if exp < 0 or exp > MAX_EXPONENT:
                raise ValidationError(
                    "Exponent of {} out of range [0, {}]: {}".format(
                        name, MAX_EXPONENT, exp))
            if exp:
                items.append((name, int(exp)))
        self._powers: Tuple[Tuple[str, int], ...] = tuple(sorted(items))

    def __getitem__(self, key: str) -> int:
        for name, exp in self._powers:
            if name == key:
                return exp
        raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        return (name for name, _ in self._powers)

    def __len__(self) -> int:
        return len(self._powers)

    def __hash__(self) -> int:
        return hash(self._powers)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Monomial):
            return self._powers == other._powers
        return super().__eq__(other)

    def __mul__(self, other: 'Monomial') -> 'Monomial':
        powers = dict(self._powers)
        for name, exp in other._powers:
            powers[name] = powers.get(name, 0) + exp
        return Monomial(powers)

    def __repr__(self) -> str:
        return '<Monomial {}>'.format(self)

    def __str__(self) -> str:
        if not self._powers:
            return '1'
        return '*'.join(name if exp == 1 else '{}^{}'.format(name, exp)
                        for name, exp in self._powers)

    @property
    def degree(self) -> int:
        return sum(exp for _, exp in self._powers)

    def without(self, name: str) -> 'Monomial':
        """Remove one unit of ``name``."""
        powers = dict(self._powers)
        if name not in powers:
            raise ValidationError("{} does not divide {}".format(name, self))
        powers[name] -= 1
        return Monomial(powers)


Term = Tuple[float, Monomial]
TermLike = Tuple[float, Union[Monomial, Mapping[str, int]]]


class Violation(NamedTuple):
    species: str
    monomial: Monomial
    coefficient: float


class _TermJSON(TypedDict):
    coeff: float
    monomial: Dict[str, int]


class PolyODEJSON(TypedDict):
    species: List[str]
    equations: Dict[str, List[_TermJSON]]


class PolyODE:

    """Polynomial vector field over named species.

    ``equations`` maps species to lists of ``(coefficient, monomial)``
    terms; species without an entry have a zero right-hand side.
    """

    def __init__(
        self,
        species: Iterable[str],
        equations: Optional[Mapping[str, Iterable[TermLike]]] = None
    ) -> None:
        self._species = tuple(check_identifier(s) for s in species)
        if len(set(self._species)) != len(self._species):
            raise ValidationError(
                "Duplicate species in {!r}".format(self._species))
        known = set(self._species)
        eqs: Dict[str, Tuple[Term, ...]] = {s: () for s in self._species}
        for name, terms in (equations or {}).items():
            if name not in known:
                raise ValidationError(
                    "Equation for unknown species {!r}".format(name))
            converted = []
            for coeff, mono in terms:
                if not isinstance(mono, Monomial):
                    mono = Monomial(mono)
                unknown = set(mono) - known
                if unknown:
                    raise ValidationError(
                        "Term {} in d{}/dt references unknown species {}".format(
                            mono, name, sorted(unknown)))
                coeff = float(coeff)
                if not np.isfinite(coeff):
                    raise ValidationError(
                        "Non-finite coefficient in d{}/dt: {!r}".format(name, coeff))
                converted.append((coeff, mono))
            eqs[name] = tuple(converted)
        self._equations = eqs

    def __repr__(self) -> str:
        return '<{} species:{} terms:{}>'.format(
            self.__class__.__name__, list(self._species), self.term_count)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyODE):
            return NotImplemented
        return (self._species == other._species and
                canonicalize(self)._equations == canonicalize(other)._equations)

    def __contains__(self, name: object) -> bool:
        return name in self._equations

    def __len__(self) -> int:
        return len(self._species)

    @property
    def species(self) -> Tuple[str, ...]:
        return self._species

    @property
    def equations(self) -> Mapping[str, Tuple[Term, ...]]:
        return dict(self._equations)

    @property
    def term_count(self) -> int:
        return sum(len(terms) for terms in self._equations.values())

    def terms(self, name: str) -> Tuple[Term, ...]:
        return self._equations[name]

    def index(self, name: str) -> int:
        return self._species.index(name)

    def add(self, other: 'PolyODE') -> 'PolyODE':
        """Term-wise sum over the union of both species lists."""
        species = list(self._species)
        species += [s for s in other._species if s not in self._equations]
        equations: Dict[str, List[Term]] = {s: [] for s in species}
        for system in (self, other):
            for name, terms in system._equations.items():
                equations[name].extend(terms)
        return canonicalize(PolyODE(species, equations))

    @classmethod
    def union(cls, *systems: 'PolyODE') -> 'PolyODE':
        result = cls([])
        for system in systems:
            result = result.add(system)
        return result

    def rename(self, mapping: Mapping[str, str]) -> 'PolyODE':
        def name(s: str) -> str:
            return mapping.get(s, s)
        return PolyODE(
            [name(s) for s in self._species],
            {name(s): [(c, Monomial({name(k): e for k, e in m.items()}))
                       for c, m in terms]
             for s, terms in self._equations.items()})

    def substitute(self, values: Mapping[str, float]) -> 'PolyODE':
        """Pin species to constant concentrations.

        The pinned species disappear from the species list; their powers
        are folded into the coefficients of the remaining terms.
        """
        for name in values:
            if name not in self._equations:
                raise ValidationError("Unknown species {!r}".format(name))
        species = [s for s in self._species if s not in values]
        equations = {}
        for name in species:
            terms = []
            for coeff, mono in self._equations[name]:
                kept = {}
                for s, exp in mono.items():
                    if s in values:
                        coeff *= float(values[s]) ** exp
                    else:
                        kept[s] = exp
                terms.append((coeff, Monomial(kept)))
            equations[name] = terms
        return canonicalize(PolyODE(species, equations))

    @cached_property
    def _tables(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows, coeffs, exps = [], [], []
        for i, name in enumerate(self._species):
            for coeff, mono in self._equations[name]:
                rows.append(i)
                coeffs.append(coeff)
                exps.append([mono.get(s, 0) for s in self._species])
        n = len(self._species)
        return (np.array(rows, dtype=np.intp),
                np.array(coeffs, dtype=float),
                np.array(exps, dtype=np.int64).reshape(len(rows), n))

    @cached_property
    def _jacobian_tables(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        rows, coeffs, exps = self._tables
        d_rows, d_cols, d_coeffs, d_exps = [], [], [], []
        for t in range(len(rows)):
            for j in np.flatnonzero(exps[t]):
                lowered = exps[t].copy()
                lowered[j] -= 1
                d_rows.append(rows[t])
                d_cols.append(j)
                d_coeffs.append(coeffs[t] * exps[t, j])
                d_exps.append(lowered)
        n = len(self._species)
        return (np.array(d_rows, dtype=np.intp),
                np.array(d_cols, dtype=np.intp),
                np.array(d_coeffs, dtype=float),
                np.array(d_exps, dtype=np.int64).reshape(len(d_rows), n))

    def _check_state(self, state: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        values = np.asarray(state, dtype=float)
        if values.ndim != 1 or values.shape[0] != len(self._species):
            raise DimensionError(len(self._species), int(values.size))
        return values

    def jacobian(self, state: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        values = self._check_state(state)
        rows, cols, coeffs, exps = self._jacobian_tables
        n = len(self._species)
        jac = np.zeros((n, n))
        if len(rows):
            np.add.at(jac, (rows, cols),
                      coeffs * np.prod(values ** exps, axis=1))
        return jac

    def to_json(self) -> PolyODEJSON:
        return {
            'species': list(self._species),
            'equations': {
                name: [{'coeff': coeff, 'monomial': dict(mono)}
                       for coeff, mono in terms]
                for name, terms in self._equations.items()},
        }

    @classmethod
    def from_json(cls, data: Any) -> 'PolyODE':
        if not isinstance(data, dict) or 'species' not in data:
            raise ParseError("PolyODE document must be an object with 'species'",
                             expected='{"species": [...], "equations": {...}}')
        species = data['species']
        equations = data.get('equations', {})
        if not isinstance(species, list) or not isinstance(equations, dict):
            raise ParseError("Malformed PolyODE document",
                             expected="'species' list and 'equations' object")
        try:
            return cls(species, {
                name: [(term['coeff'], term.get('monomial', {})) for term in terms]
                for name, terms in equations.items()})
        except (KeyError, TypeError) as exc:
            raise ParseError("Malformed term: {}".format(exc),
                             expected='{"coeff": r, "monomial": {...}}') from exc


def eval_vector_field(sys: PolyODE,
                      state: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    values = sys._check_state(state)
    rows, coeffs, exps = sys._tables
    rates = np.zeros(len(sys.species))
    if len(rows):
        np.add.at(rates, rows, coeffs * np.prod(values ** exps, axis=1))
    return rates


def _term_order(species: Sequence[str]) -> Any:
    def key(term: Term) -> Tuple[int, Tuple[int, ...]]:
        mono = term[1]
        return mono.degree, tuple(-mono.get(s, 0) for s in species)
    return key


def canonicalize(sys: PolyODE) -> PolyODE:
    """Merge like monomials, drop zero terms, sort by (degree, species order)."""
    equations = {}
    for name in sys.species:
        merged: Dict[Monomial, float] = {}
        for coeff, mono in sys.terms(name):
            merged[mono] = merged.get(mono, 0.0) + coeff
        terms = [(c, m) for m, c in merged.items() if c != 0.0]
        equations[name] = sorted(terms, key=_term_order(sys.species))
    return PolyODE(sys.species, equations)


def check_realizability(sys: PolyODE) -> List[Violation]:
    """Negative terms of dX/dt whose monomial does not contain X."""
    canonical = canonicalize(sys)
    return [Violation(name, mono, coeff)
            for name in canonical.species
            for coeff, mono in canonical.terms(name)
            if coeff < 0 and mono.get(name, 0) == 0]
