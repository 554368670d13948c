import itertools

import pytest
from hypothesis import given, settings, strategies as st

from fuzzymln import (And, Atom, Constant, Iff, Implies, Not, NotEquals, Or, ParseError, Variable, binary_eval,
                      fuzzy_eval, parse_atom, parse_formula)
from fuzzymln.logic import EvaluationError, conjunction_literals


def atom(name, *args):
    return Atom(name, tuple(Constant(a) if a[0].isupper() else Variable(a) for a in args))


def test_parse_conjunction():
    f = parse_formula('flies(e) ^ instance_of(e, Parrot_n_01)')
    assert f == And(atom('flies', 'e'), atom('instance_of', 'e', 'Parrot_n_01'))


def test_precedence():
    f = parse_formula('a(x) v b(x) => c(x)')
    assert f == Implies(Or(atom('a', 'x'), atom('b', 'x')), atom('c', 'x'))
    g = parse_formula('!a(x) ^ b(x) <=> c(x) v d(x)')
    assert isinstance(g, Iff)
    assert g.left == And(Not(atom('a', 'x')), atom('b', 'x'))


def test_left_associative():
    f = parse_formula('a(X) => b(X) => c(X)')
    assert f == Implies(Implies(atom('a', 'X'), atom('b', 'X')), atom('c', 'X'))


def test_not_equals_and_template_slots():
    f = parse_formula('sem_role(w1,+r1) ^ w1 =/= w2')
    lits = conjunction_literals(f)
    assert lits[1] == (NotEquals(Variable('w1'), Variable('w2')), True)
    assert lits[0][0].args[1] == Variable('r1', template=True)


def test_quoted_constants():
    a = parse_atom('instance_of(Cup, "cup.n.01")')
    assert a.args[1] == Constant('cup.n.01')
    assert str(a) == 'instance_of(Cup,"cup.n.01")'


@pytest.mark.parametrize('text,col', [('a(x) & b(x)', 6), ('a(x) ->', 6), ('a(x', 4), ('(a(x)', 6)])
def test_syntax_errors_carry_position(text, col):
    with pytest.raises(ParseError) as e:
        parse_formula(text)
    assert e.value.line == 1
    assert e.value.col == col


def test_fuzzy_examples():
    A, B = atom('a', 'X'), atom('b', 'X')
    assert fuzzy_eval(And(A, B), {A: 0.9, B: 0.01}) == 0.01
    assert fuzzy_eval(Not(A), {A: 0.9}) == pytest.approx(0.1)
    f = parse_formula('flies(Fred) ^ instance_of(Fred, Turkey) ^ is_a(Turkey, Parrot)')
    world = {atom('flies', 'Fred'): 1.0, atom('instance_of', 'Fred', 'Turkey'): 1.0,
             atom('is_a', 'Turkey', 'Parrot'): 0.90}
    assert fuzzy_eval(f, world) == 0.90


def test_binary_examples():
    A, B = atom('a', 'X'), atom('b', 'X')
    assert binary_eval(And(A, B), {A: 1, B: 0}) == 0
    assert binary_eval(Implies(A, B), {A: 0, B: 0}) == 1
    with pytest.raises(EvaluationError):
        binary_eval(A, {A: 0.5})


def test_evaluation_errors():
    with pytest.raises(EvaluationError):
        fuzzy_eval(atom('a', 'X'), {})
    with pytest.raises(EvaluationError):
        fuzzy_eval(atom('a', 'x'), {})
    assert fuzzy_eval(NotEquals(Constant('A'), Constant('B')), {}) == 1.0
    assert fuzzy_eval(NotEquals(Constant('A'), Constant('A')), {}) == 0.0


# properties --------------------------------------------------------------------------------

ATOMS = [atom('p', 'A'), atom('p', 'B'), atom('q', 'A', 'B'), atom('r', 'C')]


def formulas(atoms=ATOMS, nnf=False):
    leaves = st.sampled_from(atoms)
    if nnf:
        leaves = leaves | st.sampled_from(atoms).map(Not)
        return st.recursive(leaves, lambda c: st.builds(And, c, c) | st.builds(Or, c, c), max_leaves=8)
    return st.recursive(
        leaves | st.just(NotEquals(Constant('A'), Constant('B'))),
        lambda c: (st.builds(Not, c) | st.builds(And, c, c) | st.builds(Or, c, c)
                   | st.builds(Implies, c, c) | st.builds(Iff, c, c)),
        max_leaves=10)


values = st.floats(0.0, 1.0, allow_nan=False)


@settings(max_examples=200)
@given(formulas())
def test_reduction_to_binary_exhaustive(f):
    for bits in itertools.product((0, 1), repeat=len(ATOMS)):
        world = dict(zip(ATOMS, bits))
        assert fuzzy_eval(f, world) == binary_eval(f, world)


@settings(max_examples=200)
@given(formulas(), st.lists(values, min_size=4, max_size=4))
def test_range(f, vals):
    assert 0.0 <= fuzzy_eval(f, dict(zip(ATOMS, vals))) <= 1.0


def test_de_morgan_grid():
    A, B = ATOMS[:2]
    grid = [i / 20 for i in range(21)]
    for a in grid:
        for b in grid:
            w = {A: a, B: b}
            assert fuzzy_eval(Not(And(A, B)), w) == fuzzy_eval(Or(Not(A), Not(B)), w)
            assert fuzzy_eval(Not(Or(A, B)), w) == fuzzy_eval(And(Not(A), Not(B)), w)


def _polarities(f, positive=True, out=None):
    out = {} if out is None else out
    if isinstance(f, Atom):
        out.setdefault(f, set()).add(positive)
    elif isinstance(f, Not):
        _polarities(f.operand, not positive, out)
    else:
        for c in f.children():
            _polarities(c, positive, out)
    return out


@settings(max_examples=200)
@given(formulas(nnf=True), st.lists(values, min_size=4, max_size=4), st.integers(0, 3), values)
def test_monotone_in_positive_atoms(f, vals, k, bump):
    a = ATOMS[k]
    pol = _polarities(f)
    if pol.get(a) != {True}:
        return
    w = dict(zip(ATOMS, vals))
    hi = dict(w)
    hi[a] = max(w[a], bump)
    assert fuzzy_eval(f, hi) >= fuzzy_eval(f, w)


@settings(max_examples=200)
@given(formulas())
def test_print_parse_round_trip(f):
    assert parse_formula(str(f)) == f


@given(formulas())
def test_ground_formulas_are_ground(f):
    assert f.is_ground
