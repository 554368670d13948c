import pytest
from hypothesis import given, settings, strategies as st

from fuzzymln import (ParseError, SimilarityTable, TaxonomyError, UnknownConcept, load_taxonomy, read_similarities,
                      read_taxonomy)
from fuzzymln.evaluation import data_path


def test_minimal_tree():
    t = load_taxonomy('b a\nc a')
    assert t.root == 'a'
    assert t.children('a') == ('b', 'c')
    assert len(t) == 3


def test_comments_and_blank_lines():
    t = load_taxonomy('# header\n\nb a  # trailing\nc a\n')
    assert sorted(t) == ['a', 'b', 'c']


@pytest.mark.parametrize('text', ['a b\nb a', 'a a', 'b a\nc b\na c'])
def test_cycles_rejected(text):
    with pytest.raises(TaxonomyError, match='cycle'):
        load_taxonomy(text)


def test_multiple_roots_rejected():
    with pytest.raises(TaxonomyError, match='multiple roots'):
        load_taxonomy('b a\nd c')


def test_empty_rejected():
    with pytest.raises(TaxonomyError, match='empty'):
        load_taxonomy('# nothing\n\n')


def test_malformed_lines():
    with pytest.raises(ParseError):
        load_taxonomy('a b c')
    with pytest.raises(ParseError):
        load_taxonomy('a$ b')


def test_containers_excerpt():
    t = read_taxonomy(data_path('containers.tax'))
    assert len(t) == 17
    assert t.root == 'entity.n.01'
    assert {'cup.n.01', 'milk.n.01'} <= t.concepts


def test_depths():
    assert load_taxonomy('a r').depth('r') == 1
    assert load_taxonomy('a r\nb a').depth('b') == 3
    diamond = load_taxonomy('a r\nd a\nb r\nc b\nd c')
    assert diamond.depth('d') == 4


def test_lcs():
    chain = load_taxonomy('a r\nb a')
    assert chain.lcs('b', 'b') == 'b'
    assert chain.lcs('a', 'b') == 'a'
    assert load_taxonomy('b a\nc a').lcs('b', 'c') == 'a'


def test_lcs_tie_breaks_lexicographically():
    # x and y both sit under p and q, which have equal depth
    t = load_taxonomy('q r\np r\nx p\nx q\ny p\ny q')
    assert t.lcs('x', 'y') == 'p'


def test_wup_values():
    assert load_taxonomy('b r\nc r').similarity('b', 'c') == pytest.approx(0.5, abs=1e-12)
    assert load_taxonomy('a r\nb a').similarity('a', 'b') == pytest.approx(0.8, abs=1e-12)


def test_kitchen_multiple_inheritance_uses_longest_path():
    t = read_taxonomy(data_path('kitchen.tax'))
    assert len(t.parents('milk.n.01')) > 1
    assert t.depth('milk.n.01') == 1 + max(t.depth(p) for p in t.parents('milk.n.01'))


def test_unknown_concept():
    t = load_taxonomy('b a')
    with pytest.raises(UnknownConcept, match='unknown concept: zz'):
        t.similarity('b', 'zz')
    with pytest.raises(UnknownConcept):
        t.depth('zz')


def test_resolve_spellings():
    t = read_taxonomy(data_path('containers.tax'))
    assert t.resolve('cup.n.01') == 'cup.n.01'
    assert t.resolve('Cup_n_01') == 'cup.n.01'
    assert t.resolve('nothing') is None


def test_ancestors_and_descendants():
    t = load_taxonomy('a r\nb a\nc r')
    assert t.ancestors('b') == {'b', 'a', 'r'}
    assert t.descendants('a') == {'a', 'b'}
    assert t.leaves() == ['b', 'c']


def test_round_trip_text():
    t = read_taxonomy(data_path('kitchen.tax'))
    again = load_taxonomy(t.to_text())
    assert again.edges == t.edges


def test_similarity_table_pins_and_fallback(tmp_path):
    tax = read_taxonomy(data_path('parrot.tax'))
    path = tmp_path / 'sims.tsv'
    path.write_text('Turkey Parrot 0.9\n')
    sims = read_similarities(path, fallback=tax)
    assert sims.similarity('Parrot', 'Turkey') == 0.9
    assert sims.similarity('Dog', 'Mammal') == tax.similarity('Dog', 'Mammal')
    with pytest.raises(TaxonomyError):
        SimilarityTable({('a', 'b'): 1.5})


# properties ------------------------------------------------------------------------------

@st.composite
def dags(draw):
    n = draw(st.integers(1, 12))
    names = ['n%d' % i for i in range(n)]
    lines = ['n0 root']
    for i in range(1, n):
        k = draw(st.integers(1, min(3, i + 1)))
        pool = ['root'] + names[:i]
        parents = draw(st.lists(st.sampled_from(pool), min_size=1, max_size=k, unique=True))
        lines += ['%s %s' % (names[i], p) for p in parents]
    return load_taxonomy('\n'.join(lines))


@settings(max_examples=60, deadline=None)
@given(dags(), st.data())
def test_wup_symmetry_identity_range(t, data):
    cs = list(t)
    a = data.draw(st.sampled_from(cs))
    b = data.draw(st.sampled_from(cs))
    assert t.similarity(a, a) == 1.0
    s = t.similarity(a, b)
    assert s == t.similarity(b, a)
    assert 0.0 < s <= 1.0
    assert s == t.similarity(a, b)  # memoized value is bit-identical


@settings(max_examples=60, deadline=None)
@given(dags(), st.data())
def test_lcs_is_deepest_common_ancestor(t, data):
    cs = list(t)
    a = data.draw(st.sampled_from(cs))
    b = data.draw(st.sampled_from(cs))
    common = t.ancestors(a) & t.ancestors(b)
    best = max(t.depth(c) for c in common)
    assert t.lcs(a, b) == min(c for c in common if t.depth(c) == best)
    assert t.similarity(a, b) == 2 * best / (t.depth(a) + t.depth(b))


@given(st.integers(2, 15), st.data())
def test_chain_monotonicity(n, data):
    t = load_taxonomy('\n'.join('a%d a%d' % (i + 1, i) for i in range(n)))
    i = data.draw(st.integers(0, n))
    sims = [t.similarity('a%d' % i, 'a%d' % j) for j in range(i, n + 1)]
    assert all(x > y for x, y in zip(sims, sims[1:]))
    sims = [t.similarity('a%d' % i, 'a%d' % j) for j in range(i, -1, -1)]
    assert all(x > y for x, y in zip(sims, sims[1:]))
