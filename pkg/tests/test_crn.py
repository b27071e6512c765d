import pytest

from crnclock import Monomial, ParseError, PolyODE, ValidationError
from crnclock.crn import (CRN, Reaction, catalyze, format_crn, format_rate, parse_crn,
                          species_name, to_ode, validate, variable_name)


def test_names() -> None:
    assert 'X1' == species_name('x1')
    assert 'u2' == variable_name('U2')


def test_reaction_str() -> None:
    r = Reaction.of({'X': 1, 'Y': 1}, {'X': 1, 'Y': 2}, 0.1)
    assert 'X + Y ->{0.1} X + 2Y' == str(r)
    assert r.change('Y') == 1
    assert r.change('X') == 0
    assert '0 ->{20} U' == str(Reaction.of({}, {'U': 1}, 20.0))


def test_format_rate() -> None:
    assert '50000' == format_rate(50000.0)
    assert '0.21' == format_rate(0.21)
    assert '1e-07' == format_rate(1e-7)


def test_species_from_reactions() -> None:
    crn = CRN([Reaction.of({'B': 1}, {'A': 1}, 1), Reaction.of({'A': 2}, {'C': 1}, 1)])
    assert crn.species == ('B', 'A', 'C')
    assert len(crn) == 2


def test_to_ode_mass_action() -> None:
    crn = CRN([Reaction.of({'X': 1, 'Y': 1}, {'Y': 2}, 3.0),
               Reaction.of({'X': 2}, {'X': 1}, 5.0),
               Reaction.of({}, {'X': 1}, 0.5)])
    ode = to_ode(crn)
    assert ode.species == ('x', 'y')
    assert ode == PolyODE(['x', 'y'], {
        'x': [(-3, {'x': 1, 'y': 1}), (-5, {'x': 2}), (0.5, {})],
        'y': [(3, {'x': 1, 'y': 1})]})


def test_to_ode_is_linear() -> None:
    a = CRN([Reaction.of({'X': 1}, {'Y': 1}, 2.0)])
    b = CRN([Reaction.of({'Y': 1, 'Z': 1}, {'X': 1, 'Z': 1}, 7.0),
             Reaction.of({'X': 1}, {}, 1.0)])
    assert to_ode(a.add(b)) == to_ode(a).add(to_ode(b))


def test_to_ode_empty() -> None:
    assert to_ode(CRN([])).species == ()


def test_to_ode_rejects_invalid() -> None:
    with pytest.raises(ValidationError):
        to_ode(CRN([Reaction.of({'X': 1}, {'X': 1}, 1.0)]))


def test_to_ode_name_collision() -> None:
    with pytest.raises(ValidationError):
        to_ode(CRN([Reaction.of({'X': 1}, {'x': 1}, 1.0)]))


def test_validate() -> None:
    crn = CRN([Reaction.of({'X': 1}, {'X': 1}, 1.0),
               Reaction.of({'X': 1}, {'Y': 1}, 0.0),
               Reaction.of({'X': 1}, {'Q': 1}, 1.0)],
              ['X', 'Y'])
    errors = validate(crn)
    assert len(errors) == 3
    assert 'net-zero' in errors[0]
    assert 'non-positive rate' in errors[1]
    assert "unknown species ['Q']" in errors[2]


def test_validate_degree() -> None:
    crn = CRN([Reaction(Monomial({'X': 8}), Monomial({'X': 8, 'Y': 1}), 1.0)])
    errors = validate(crn)
    assert len(errors) == 1
    assert 'exceeds 8' in errors[0]


def test_validate_non_finite_rate() -> None:
    crn = CRN([Reaction.of({'X': 1}, {}, float('inf'))])
    errors = validate(crn)
    assert len(errors) == 1
    assert 'non-finite rate' in errors[0]
    with pytest.raises(ValidationError):
        to_ode(crn)


def test_validate_ok() -> None:
    crn = CRN([Reaction.of({'X': 2}, {}, 1.0)])
    assert validate(crn) == []


def test_catalyze() -> None:
    crn = CRN([Reaction.of({'Y': 1}, {}, 1.0)])
    gated = catalyze(crn, ['U1', 'X'])
    assert gated.species == ('Y', 'U1', 'X')
    assert str(gated.reactions[0]) == 'U1 + X + Y ->{1} U1 + X'
    assert to_ode(gated).terms('y') == ((-1.0, Monomial({'u1': 1, 'x': 1, 'y': 1})),)


def test_format_parse_roundtrip() -> None:
    crn = CRN([Reaction.of({'X': 1, 'Y': 1}, {'X': 1, 'Y': 2}, 0.1),
               Reaction.of({}, {'U': 1}, 20.0),
               Reaction.of({'U': 1, 'V': 1}, {'V': 1}, 50000.0)],
              ['X', 'Y', 'U', 'V', 'W'])
    text = format_crn(crn)
    assert text.splitlines()[0] == '# species: X Y U V W'
    assert parse_crn(text) == crn


def test_parse_comments_and_blank_lines() -> None:
    text = '\n# a comment\nX ->{2} 0   # decay\n\n2X ->{1.5e3} X\n'
    crn = parse_crn(text)
    assert crn.species == ('X',)
    assert [r.rate for r in crn] == [2.0, 1500.0]
    assert crn.reactions[1].reactants == Monomial({'X': 2})


def test_parse_repeated_species_adds_up() -> None:
    crn = parse_crn('X + X ->{1} Y\n')
    assert crn.reactions[0].reactants == Monomial({'X': 2})


@pytest.mark.parametrize('text,line', [
    ('X -> Y\n', 1),
    ('X ->{1} Y\nX ->{fast} Y\n', 2),
    ('X ->{1} Y\n ->{1} X\n', 2),
    ('0X ->{1} Y\n', 1),
    ('X ->{1} 3*Y\n', 1),
    ('9X ->{1} Y\n', 1),
])
def test_parse_errors(text: str, line: int) -> None:
    with pytest.raises(ParseError) as ctx:
        parse_crn(text)
    assert ctx.value.line == line
    assert ctx.value.expected


def test_parse_duplicate_directive_species() -> None:
    with pytest.raises(ParseError):
        parse_crn('# species: X X\nX ->{1} 0\n')
