import json

import pytest
from hypothesis import given, settings, strategies as st

from fuzzymln import FOL, FUZZY, TrainConfig, read_taxonomy
from fuzzymln.errors import EvaluationError, InputError
from fuzzymln import evaluation
from fuzzymln.evaluation import (KS, SplitSpec, Word, data_path, default_setup, f1_score, fit, generate_corpus,
                                 inverse_kfold_splits, job_seed, predict, read_corpus, read_frames,
                                 run_experiment, training_db, write_corpus)
from fuzzymln.model import read_mln


@pytest.fixture(scope='module')
def kitchen():
    return read_taxonomy(data_path('kitchen.tax'))


@pytest.fixture(scope='module')
def corpus(kitchen):
    return generate_corpus(kitchen, seed=0)


# splits ----------------------------------------------------------------------------------

def test_split_spec():
    assert SplitSpec.parse('3/7').label == '3/7'
    assert SplitSpec.parse('4').test_blocks == 6
    assert [SplitSpec(*k).label for k in KS][0] == '1/9'
    for bad in ('0/10', '10/0', '3/6', 'x/y'):
        with pytest.raises(ValueError):
            SplitSpec.parse(bad)


@settings(max_examples=40, deadline=None)
@given(st.integers(10, 60), st.integers(1, 9), st.integers(0, 1000))
def test_fold_sizes_and_coverage(n, a, seed):
    examples = list(range(n))
    folds = inverse_kfold_splits(examples, SplitSpec(a, seed=seed))
    size = n // 10
    assert len(folds) == 10
    kept = set()
    for tr, te in folds:
        assert len(tr) == a * size and len(te) == (10 - a) * size
        assert not set(tr) & set(te)
        kept |= set(tr) | set(te)
    assert len(kept) == 10 * size
    # every kept example trains in exactly a of the rotations
    counts = {e: sum(e in tr for tr, _ in folds) for e in kept}
    assert set(counts.values()) == {a}


def test_too_few_examples():
    with pytest.raises(EvaluationError):
        inverse_kfold_splits(range(9), SplitSpec(1))


def test_splits_depend_on_seed():
    a = inverse_kfold_splits(range(20), SplitSpec(1, seed=1))
    b = inverse_kfold_splits(range(20), SplitSpec(1, seed=1))
    c = inverse_kfold_splits(range(20), SplitSpec(1, seed=2))
    assert a == b and a != c


def test_job_seed_stable():
    assert job_seed(0, 'filling') == job_seed(0, 'filling')
    assert job_seed(0, 'filling') != job_seed(0, 'adding')
    assert job_seed(5, 'filling') == (job_seed(0, 'filling') + 5) % (1 << 32)


# scoring ---------------------------------------------------------------------------------

def test_f1_examples():
    gold = {1: 'a', 2: 'b', 3: 'c', 4: 'd'}
    assert f1_score(dict(gold), gold) == 1.0
    assert f1_score({k: 'z' for k in gold}, gold) == 0.0
    assert f1_score({1: 'a', 2: 'b', 3: 'c', 4: 'x'}, gold) == pytest.approx(0.75)
    # abstaining on two: precision 1, recall 1/2
    assert f1_score({1: 'a', 2: 'b', 3: None, 4: None}, gold) == pytest.approx(2 / 3)
    with pytest.raises(EvaluationError):
        f1_score({1: 'a'}, gold)
    with pytest.raises(EvaluationError):
        f1_score({}, {})


# corpus ----------------------------------------------------------------------------------

def test_generated_corpus_invariants(corpus, kitchen):
    frames = read_frames()
    assert len(corpus) == 20 * len(frames)
    for ex in corpus:
        assert [w.role for w in ex.words] == [r['role'] for r in frames[ex.verb]]
        for w in ex.words:
            assert w.gold in w.candidates
            assert len(w.candidates) >= 2 and len(set(w.candidates)) == len(w.candidates)
            for s in w.candidates:
                assert s in kitchen
                if s != w.gold:
                    assert kitchen.similarity(w.gold, s) <= 0.5


def test_corpus_gold_senses_are_spread(corpus):
    for verb in read_frames():
        golds = {w.gold for ex in corpus if ex.verb == verb for w in ex.words}
        assert len(golds) >= 6


def test_corpus_deterministic(kitchen, corpus):
    assert generate_corpus(kitchen, seed=0) == corpus
    assert generate_corpus(kitchen, seed=1) != corpus


def test_corpus_round_trip(tmp_path, corpus, kitchen):
    path = tmp_path / 'c.jsonl'
    write_corpus(corpus, path)
    assert read_corpus(path, kitchen) == corpus
    assert json.loads(path.read_text().splitlines()[0])['verb'] == corpus[0].verb


def test_corpus_errors(tmp_path, kitchen):
    path = tmp_path / 'bad.jsonl'
    path.write_text('{"id": "x"}\n')
    with pytest.raises(InputError, match='bad.jsonl:1'):
        read_corpus(path)
    rec = {'id': 'x', 'verb': 'v', 'words': [{'word': 'W1', 'role': 'Goal', 'gold': 'nowhere.n.01',
                                             'candidates': ['nowhere.n.01', 'cup.n.01']}]}
    path.write_text(json.dumps(rec) + '\n')
    with pytest.raises(InputError, match='unknown concept'):
        read_corpus(path, kitchen)
    with pytest.raises(InputError):
        Word('W1', 'w', 'NN', 'Goal', 'a', ('b', 'c'))


def test_frames_with_too_few_leaves(kitchen):
    with pytest.raises(EvaluationError, match='leaves'):
        generate_corpus(kitchen, {'v': [{'role': 'Theme', 'subtrees': ['cup.n.01']}]})


# databases and prediction ------------------------------------------------------------------

def test_databases(corpus):
    template = read_mln(data_path('wsd_roles.mln'))
    ex = corpus[0]
    tr = training_db(template, ex)
    assert sum(a.predicate == 'instance_of' for a in tr.positive) == len(ex.words)
    te = evaluation.test_db(template, ex)
    assert not any(a.predicate == 'instance_of' for a in te.positive)
    n_senses = len({s for w in ex.words for s in w.candidates})
    assert len(te.negative) == sum(n_senses - len(w.candidates) for w in ex.words)


def test_fol_predicts_first_candidate(corpus, kitchen):
    # FOL posteriors are flat over candidates, so ties go to the listed order
    template = read_mln(data_path('wsd_roles.mln'))
    res = fit(template, corpus[:4], kitchen, FOL, TrainConfig(max_iter=20))
    for ex in corpus[4:8]:
        out = predict(res.mln, ex, kitchen, FOL)
        assert out == {w.word: w.candidates[0] for w in ex.words}


# experiment ------------------------------------------------------------------------------

SMALL = dict(ks=['1/9', '5/5'], cfg=TrainConfig(max_iter=30), verbs=['filling'])


def test_small_experiment(corpus, kitchen):
    template = read_mln(data_path('wsd_roles.mln'))
    res = run_experiment(corpus, kitchen, template, **SMALL)
    assert res.verbs == ['filling']
    assert len(res.folds) == 2 * 2 * 10
    for k in SMALL['ks']:
        assert 0.0 <= res.mean(FOL, k) <= 1.0
        assert res.mean(FUZZY, k) >= res.mean(FOL, k)
    table = res.to_tsv().splitlines()
    assert table[0] == 'verb\tmode\t1/9\t5/5'
    assert len(table) == 1 + 2 * 2
    assert res.folds_tsv().splitlines()[0].startswith('verb\tmode\tk\tfold')
    again = run_experiment(corpus, kitchen, template, **SMALL)
    assert again.cells == res.cells


def test_parallel_matches_serial(corpus, kitchen):
    template = read_mln(data_path('wsd_roles.mln'))
    serial = run_experiment(corpus, kitchen, template, **SMALL)
    parallel = run_experiment(corpus, kitchen, template, jobs=2, **SMALL)
    assert parallel.cells == serial.cells
    assert parallel.folds == serial.folds


def test_default_setup():
    corpus, tax, template = default_setup(0)
    assert len(corpus) == 120
    assert 'cup.n.01' in tax
    assert template.formulas[0].template_slots
