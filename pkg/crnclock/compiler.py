"""Translate realizable polynomial ODEs into mass-action networks.

Every term ``c * m`` of ``dx/dt`` becomes one reaction with reactants
``m``: for ``c > 0`` the products are ``m + X``, for ``c < 0`` they are
``m - X``, and the rate is ``|c|``.  Each reaction therefore moves exactly
one species by exactly one unit.
"""

from typing import Dict, List, NamedTuple

from . import (MAX_EXPONENT, Monomial, PolyODE, RealizabilityError, StoichiometryError,
               ValidationError, Violation, canonicalize, check_realizability)
from .crn import CRN, Reaction, species_name, to_ode, variable_name
from .log import log

RELATIVE_TOLERANCE = 1e-12


class Mismatch(NamedTuple):
    species: str
    monomial: Monomial
    expected: float
    got: float


class RoundtripReport(NamedTuple):
    matches: bool
    reaction_count: int
    mismatches: List[Mismatch]


def _species_names(sys: PolyODE) -> Dict[str, str]:
    names = {v: species_name(v) for v in sys.species}
    if len(set(names.values())) != len(names):
        raise ValidationError(
            "Variables {!r} collide as species names".format(sys.species))
    return names


def compile_ode(sys: PolyODE) -> CRN:
    violations = check_realizability(sys)
    if violations:
        raise RealizabilityError(violations)
    sys = canonicalize(sys)
    oversized = [Violation(variable, mono, coeff)
                 for variable in sys.species
                 for coeff, mono in sys.terms(variable)
                 if mono.degree + (coeff > 0) > MAX_EXPONENT]
    if oversized:
        raise StoichiometryError(oversized)
    names = _species_names(sys)
    reactions = []
    for variable in sys.species:
        target = names[variable]
        for coeff, mono in sys.terms(variable):
            reactants = Monomial({names[v]: e for v, e in mono.items()})
            if coeff > 0:
                products = reactants * Monomial({target: 1})
            else:
                products = reactants.without(target)
            reactions.append(Reaction(reactants, products, abs(coeff)))
    log.debug("Compiled %d terms over %d species", len(reactions), len(sys.species))
    return CRN(reactions, [names[v] for v in sys.species])


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= RELATIVE_TOLERANCE * max(abs(a), abs(b))


def roundtrip_check(sys: PolyODE) -> RoundtripReport:
    """Compare ``sys`` with the ODE induced by its compiled network.

    Variables are compared under the species naming convention, so a
    variable ``X`` comes back as ``x``.  Systems that :func:`compile_ode`
    rejects raise its errors before any comparison.
    """
    crn = compile_ode(sys)
    restored = to_ode(crn)
    expected = canonicalize(sys.rename(
        {v: variable_name(species_name(v)) for v in sys.species}))
    mismatches = []
    for name in expected.species:
        want = {m: c for c, m in expected.terms(name)}
        have = {m: c for c, m in restored.terms(name)}
        for mono in sorted(set(want) | set(have), key=str):
            a, b = want.get(mono, 0.0), have.get(mono, 0.0)
            if not _close(a, b):
                mismatches.append(Mismatch(name, mono, a, b))
    if mismatches:
        log.warning("Roundtrip mismatch in %d coefficients", len(mismatches))
    return RoundtripReport(not mismatches, len(crn), mismatches)
