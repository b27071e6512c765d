"""Mass-action reaction networks and their text format."""

import math
import re
from typing import Dict, Iterable, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from . import (MAX_EXPONENT, Monomial, ParseError, PolyODE, ValidationError, canonicalize,
               check_identifier)

EMPTY_SIDE = '0'

_REACTION = re.compile(r'^(?P<lhs>[^{}]*?)->\{(?P<rate>[^}]*)\}(?P<rhs>[^{}]*)$')
_TERM = re.compile(r'^\s*(?P<count>\d*)\s*(?P<name>[A-Za-z][A-Za-z0-9_]*)\s*$')
_RATE = re.compile(r'^\s*[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?\s*$')
_SPECIES_DIRECTIVE = re.compile(r'^#\s*species:(?P<names>.*)$')


def species_name(variable: str) -> str:
    """Species for a concentration variable: ``x1`` -> ``X1``."""
    return variable[:1].upper() + variable[1:]


def variable_name(species: str) -> str:
    """Concentration variable for a species: ``X1`` -> ``x1``."""
    return species[:1].lower() + species[1:]


class Reaction(NamedTuple):
    reactants: Monomial
    products: Monomial
    rate: float

    def __str__(self) -> str:
        return '{} ->{{{}}} {}'.format(
            format_side(self.reactants), format_rate(self.rate),
            format_side(self.products))

    @classmethod
    def of(cls, reactants: Mapping[str, int], products: Mapping[str, int],
           rate: float) -> 'Reaction':
        return cls(Monomial(reactants), Monomial(products), float(rate))

    def change(self, name: str) -> int:
        """Net stoichiometric change of ``name``."""
        return self.products.get(name, 0) - self.reactants.get(name, 0)


class CRN:

    """Species plus mass-action reactions.

    Construction only checks identifiers; use :func:`validate` for the
    network invariants.
    """

    def __init__(self, reactions: Iterable[Reaction],
                 species: Optional[Iterable[str]] = None) -> None:
        self._reactions = tuple(reactions)
        if species is None:
            seen: Dict[str, None] = {}
            for r in self._reactions:
                for name in list(r.reactants) + list(r.products):
                    seen.setdefault(name, None)
            species = seen
        self._species = tuple(check_identifier(s) for s in species)
        if len(set(self._species)) != len(self._species):
            raise ValidationError(
                "Duplicate species in {!r}".format(self._species))

    def __repr__(self) -> str:
        return '<{} species:{} reactions:{}>'.format(
            self.__class__.__name__, list(self._species), len(self._reactions))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CRN):
            return NotImplemented
        return (self._species == other._species and
                self._reactions == other._reactions)

    def __len__(self) -> int:
        return len(self._reactions)

    def __iter__(self) -> Iterator[Reaction]:
        return iter(self._reactions)

    @property
    def species(self) -> Tuple[str, ...]:
        return self._species

    @property
    def reactions(self) -> Tuple[Reaction, ...]:
        return self._reactions

    def add(self, other: 'CRN') -> 'CRN':
        species = list(self._species)
        species += [s for s in other._species if s not in species]
        return CRN(self._reactions + other._reactions, species)


def validate(crn: CRN) -> List[str]:
    """Problems with ``crn``; an empty list means the network is valid."""
    errors = []
    known = set(crn.species)
    for i, r in enumerate(crn.reactions, 1):
        unknown = sorted((set(r.reactants) | set(r.products)) - known)
        if unknown:
            errors.append('reaction {} ({}): unknown species {}'.format(i, r, unknown))
        if not r.rate > 0:
            errors.append('reaction {} ({}): non-positive rate {!r}'.format(i, r, r.rate))
        elif not math.isfinite(r.rate):
            errors.append('reaction {} ({}): non-finite rate {!r}'.format(i, r, r.rate))
        if r.reactants == r.products:
            errors.append('reaction {} ({}): net-zero reaction'.format(i, r))
        for side, label in ((r.reactants, 'reactant'), (r.products, 'product')):
            if side.degree > MAX_EXPONENT:
                errors.append('reaction {} ({}): {} stoichiometry {} exceeds {}'.format(
                    i, r, label, side.degree, MAX_EXPONENT))
    return errors


def to_ode(crn: CRN) -> PolyODE:
    """Mass-action ODE of ``crn``, over lower-cased concentration variables."""
    errors = validate(crn)
    if errors:
        raise ValidationError('Invalid CRN: {}'.format('; '.join(errors)))
    variables = [variable_name(s) for s in crn.species]
    if len(set(variables)) != len(variables):
        raise ValidationError(
            "Species {!r} collide as concentration variables".format(crn.species))
    equations: Dict[str, List[Tuple[float, Monomial]]] = {v: [] for v in variables}
    for r in crn.reactions:
        rate_monomial = Monomial({variable_name(s): e for s, e in r.reactants.items()})
        for name in set(r.reactants) | set(r.products):
            change = r.change(name)
            if change:
                equations[variable_name(name)].append(
                    (change * r.rate, rate_monomial))
    return canonicalize(PolyODE(variables, equations))


def catalyze(crn: CRN, catalysts: Sequence[str]) -> CRN:
    """Add ``catalysts`` to both sides of every reaction of ``crn``."""
    gate = Monomial({name: 1 for name in catalysts})
    species = list(crn.species)
    species += [name for name in catalysts if name not in species]
    return CRN((Reaction(r.reactants * gate, r.products * gate, r.rate)
                for r in crn.reactions), species)


def format_side(side: Monomial) -> str:
    if not side:
        return EMPTY_SIDE
    return ' + '.join(name if count == 1 else '{}{}'.format(count, name)
                      for name, count in side.items())


def format_rate(rate: float) -> str:
    if float(rate).is_integer() and abs(rate) < 1e15:
        return str(int(rate))
    return repr(float(rate))


def format_crn(crn: CRN) -> str:
    """Text form of ``crn``, one reaction per line in input order.

    The leading ``# species:`` comment keeps the species order, so that
    parsing the output gives back an equal network.
    """
    lines = ['# species: {}'.format(' '.join(crn.species))]
    lines.extend(str(r) for r in crn.reactions)
    return '\n'.join(lines) + '\n'


def _parse_side(text: str, lineno: int) -> Monomial:
    text = text.strip()
    if text == EMPTY_SIDE:
        return Monomial()
    if not text:
        raise ParseError('empty reaction side', line=lineno,
                         expected="'0' or species terms")
    counts: Dict[str, int] = {}
    for chunk in text.split('+'):
        match = _TERM.match(chunk)
        if match is None:
            raise ParseError('bad term {!r}'.format(chunk.strip()), line=lineno,
                             expected='[<int>]<SpeciesName>')
        count = int(match.group('count') or 1)
        if count == 0:
            raise ParseError('zero stoichiometry in {!r}'.format(chunk.strip()),
                             line=lineno, expected='positive integer')
        name = match.group('name')
        counts[name] = counts.get(name, 0) + count
    try:
        return Monomial(counts)
    except ValidationError as exc:
        raise ParseError(str(exc), line=lineno,
                         expected='stoichiometry <= {}'.format(MAX_EXPONENT)) from exc


def parse_crn(text: str) -> CRN:
    species: Optional[List[str]] = None
    reactions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        directive = _SPECIES_DIRECTIVE.match(raw.strip())
        if directive is not None:
            species = directive.group('names').split()
            continue
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        match = _REACTION.match(line)
        if match is None:
            raise ParseError('cannot parse reaction {!r}'.format(line), line=lineno,
                             expected='<side> ->{<rate>} <side>')
        rate = match.group('rate')
        if not _RATE.match(rate):
            raise ParseError('bad rate {!r}'.format(rate), line=lineno,
                             expected='decimal literal')
        reactions.append(Reaction(_parse_side(match.group('lhs'), lineno),
                                  _parse_side(match.group('rhs'), lineno),
                                  float(rate)))
    if species is not None:
        seen = set(species)
        for r in reactions:
            for name in list(r.reactants) + list(r.products):
                if name not in seen:
                    species.append(name)
                    seen.add(name)
    try:
        return CRN(reactions, species)
    except ValidationError as exc:
        raise ParseError(str(exc), expected='unique species') from exc
