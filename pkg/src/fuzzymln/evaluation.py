"""Word-sense disambiguation experiments: FOL vs fuzzy semantics.

Examples are grouped by action verb. For every verb and split ratio the
template MLN is trained on the training blocks of each inverse k-fold
rotation and evaluated on the remaining blocks; a word is labelled with the
argmax of its sense posterior.
"""
import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .errors import EvaluationError, InputError
from .evidence import make_database
from .grounding import FOL, FUZZY, ground
from .inference import exact_marginals, sense_posterior
from .learning import TrainConfig, train
from .logic import Atom, Constant
from .model import collect_domains, expand_templates, read_mln
from .taxonomy import read_taxonomy

log = logging.getLogger(__name__)

BLOCKS = 10
KS = tuple((a, BLOCKS - a) for a in range(1, BLOCKS))
TIE_EPS = 1e-12


def data_path(name):
    return str(resources.files('fuzzymln').joinpath('data', name))


@dataclass(frozen=True)
class Word:
    word: str          # word constant, e.g. W1
    token: str
    pos: str
    role: str
    gold: str
    candidates: tuple

    def __post_init__(self):
        if self.gold not in self.candidates:
            raise InputError('gold sense %s of %s is not among its candidates' % (self.gold, self.word))


@dataclass(frozen=True)
class WsdExample:
    id: str
    verb: str
    words: tuple

    def to_json(self):
        d = asdict(self)
        for w in d['words']:
            w['candidates'] = list(w['candidates'])
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        words = tuple(Word(w['word'], w.get('token', w['word']), w.get('pos', 'NN'), w['role'], w['gold'],
                           tuple(w['candidates'])) for w in d['words'])
        return cls(d['id'], d['verb'], words)


@dataclass(frozen=True)
class SplitSpec:
    train_blocks: int
    test_blocks: int = None
    seed: int = 0

    def __post_init__(self):
        if self.test_blocks is None:
            object.__setattr__(self, 'test_blocks', BLOCKS - self.train_blocks)
        if not 1 <= self.train_blocks <= BLOCKS - 1 or self.train_blocks + self.test_blocks != BLOCKS:
            raise ValueError('split must be a/b with a + b = %d and 1 <= a <= %d' % (BLOCKS, BLOCKS - 1))

    @classmethod
    def parse(cls, text, seed=0):
        a, _, b = text.partition('/')
        return cls(int(a), int(b) if b else None, seed)

    @property
    def label(self):
        return '%d/%d' % (self.train_blocks, self.test_blocks)


def inverse_kfold_splits(examples, spec):
    """Ten cyclic rotations of ten seeded blocks: a blocks train, b blocks test.

    Examples beyond the largest multiple of ten are dropped after shuffling.
    """
    examples = list(examples)
    if len(examples) < BLOCKS:
        raise EvaluationError('need at least %d examples, got %d' % (BLOCKS, len(examples)))
    order = np.random.default_rng(spec.seed).permutation(len(examples))
    size = len(examples) // BLOCKS
    blocks = [[examples[i] for i in order[b * size:(b + 1) * size]] for b in range(BLOCKS)]
    folds = []
    for r in range(BLOCKS):
        train_ids = [(r + i) % BLOCKS for i in range(spec.train_blocks)]
        test_ids = [b for b in range(BLOCKS) if b not in train_ids]
        folds.append(([e for b in train_ids for e in blocks[b]], [e for b in test_ids for e in blocks[b]]))
    return folds


def f1_score(predicted, gold):
    """Micro F1 of per-word sense labels; a None prediction is an abstention."""
    if set(predicted) != set(gold):
        raise EvaluationError('prediction and gold keys differ')
    if not gold:
        raise EvaluationError('no words to score')
    made = [k for k, v in predicted.items() if v is not None]
    tp = sum(1 for k in made if predicted[k] == gold[k])
    if tp == 0:
        return 0.0
    precision = tp / len(made)
    recall = tp / len(gold)
    return 2 * precision * recall / (precision + recall)


# databases ------------------------------------------------------------------------

def _word_facts(mln, ex):
    decls = mln.declarations
    pos = []
    for w in ex.words:
        c = Constant(w.word)
        if 'sem_role' in decls:
            pos.append(Atom('sem_role', (c, Constant(w.role))))
        if 'has_pos' in decls:
            pos.append(Atom('has_pos', (c, Constant(w.pos))))
    return pos


def training_db(mln, ex):
    """Fully observed world: gold senses plus role and tag facts."""
    pos = _word_facts(mln, ex)
    pos += [Atom('instance_of', (Constant(w.word), Constant(w.gold))) for w in ex.words]
    return make_database(mln, pos)


def test_db(mln, ex):
    """Role and tag evidence; each word's non-candidate senses are ruled out."""
    senses = sorted({s for w in ex.words for s in w.candidates})
    neg = [Atom('instance_of', (Constant(w.word), Constant(s)))
           for w in ex.words for s in senses if s not in w.candidates]
    sense_dom = mln.predicate('instance_of').domains[1]
    return make_database(mln, _word_facts(mln, ex), neg, {sense_dom: senses})


def evidence_closed(mln):
    return tuple(p.name for p in mln.predicates if not p.fuzzy and p.name != 'instance_of')


def predict(mln, ex, taxonomy, mode, cap=24):
    """word -> predicted sense: argmax posterior, ties to the earliest candidate."""
    g = ground(mln, test_db(mln, ex), taxonomy, mode, evidence_closed(mln))
    marg = exact_marginals(g, cap=cap)
    out = {}
    for w in ex.words:
        post = dict(sense_posterior(g, w.word, marginals=marg))
        if not post:
            out[w.word] = None
            continue
        top = max(post.values())
        out[w.word] = next(s for s in w.candidates if post.get(s, -1.0) >= top - TIE_EPS)
    return out


def fit(template, train, taxonomy, mode, cfg):
    dbs = [training_db(template, ex) for ex in train]
    m = expand_templates(collect_domains(template, dbs))
    return train_model(m, dbs, taxonomy, cfg, mode)


def train_model(m, dbs, taxonomy, cfg, mode):
    return train(m, dbs, taxonomy, cfg, mode=mode)


def evaluate_fold(template, train_set, test_set, taxonomy, mode, cfg):
    res = fit(template, train_set, taxonomy, mode, cfg)
    predicted, gold = {}, {}
    for ex in test_set:
        for word, sense in predict(res.mln, ex, taxonomy, mode, cfg.cap).items():
            predicted[(ex.id, word)] = sense
        for w in ex.words:
            gold[(ex.id, w.word)] = w.gold
    return f1_score(predicted, gold), res


# experiment ----------------------------------------------------------------------------

def job_seed(seed, key):
    """Per-job seed: master seed plus a stable hash of the job key."""
    return (seed + zlib.crc32(key.encode('utf-8'))) % (1 << 32)


@dataclass
class ExperimentResult:
    ks: tuple
    modes: tuple
    cells: dict = field(default_factory=dict)   # (verb, mode, k label) -> mean F1
    folds: list = field(default_factory=list)   # per-fold detail rows

    @property
    def verbs(self):
        seen = []
        for v, _, _ in self.cells:
            if v not in seen:
                seen.append(v)
        return seen

    def mean(self, mode, k):
        vals = [self.cells[(v, mode, k)] for v in self.verbs]
        return float(np.mean(vals))

    def to_tsv(self):
        head = ['verb', 'mode'] + list(self.ks)
        lines = ['\t'.join(head)]
        for v in self.verbs + ['mean']:
            for mode in self.modes:
                row = [v, mode]
                for k in self.ks:
                    f = self.mean(mode, k) if v == 'mean' else self.cells[(v, mode, k)]
                    row.append('%.4f' % f)
                lines.append('\t'.join(row))
        return '\n'.join(lines) + '\n'

    def folds_tsv(self):
        lines = ['verb\tmode\tk\tfold\tn_train\tn_test\tf1\titerations\tconverged']
        for r in self.folds:
            lines.append('%s\t%s\t%s\t%d\t%d\t%d\t%.6f\t%d\t%s' % (
                r['verb'], r['mode'], r['k'], r['fold'], r['n_train'], r['n_test'], r['f1'],
                r['iterations'], r['converged']))
        return '\n'.join(lines) + '\n'


def _run_job(args):
    verb, examples, label, mode, template, taxonomy, cfg, seed = args
    spec = SplitSpec.parse(label, job_seed(seed, verb))
    rows = []
    for i, (tr, te) in enumerate(inverse_kfold_splits(examples, spec)):
        f1, res = evaluate_fold(template, tr, te, taxonomy, mode, cfg)
        rows.append(dict(verb=verb, mode=mode, k=label, fold=i, n_train=len(tr), n_test=len(te), f1=f1,
                         iterations=len(res.trace) - 1, converged=res.converged))
    log.info('%s %s %s: F1 %.4f', verb, mode, label, np.mean([r['f1'] for r in rows]))
    return rows


def run_experiment(corpus, taxonomy, template, ks=None, modes=(FOL, FUZZY), seed=0, cfg=None, jobs=1,
                   verbs=None):
    """Mean F1 per verb, mode and split over inverse k-fold rotations.

    The shuffle of each verb's examples depends only on the seed and the verb,
    so both modes and all splits see the same blocks.
    """
    cfg = cfg or TrainConfig()
    ks = [k if isinstance(k, str) else SplitSpec(*k).label for k in (ks or KS)]
    by_verb = {}
    for ex in corpus:
        by_verb.setdefault(ex.verb, []).append(ex)
    if verbs is not None:
        by_verb = {v: by_verb[v] for v in verbs}
    jobs_args = [(v, exs, k, mode, template, taxonomy, cfg, seed)
                 for v, exs in by_verb.items() for mode in modes for k in ks]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_job, jobs_args))
    else:
        results = [_run_job(a) for a in jobs_args]
    out = ExperimentResult(tuple(ks), tuple(modes))
    for args, rows in zip(jobs_args, results):
        verb, _, k, mode = args[:4]
        out.cells[(verb, mode, k)] = float(np.mean([r['f1'] for r in rows]))
        out.folds.extend(rows)
    return out


# corpus ------------------------------------------------------------------------------------

def read_frames(path=None):
    with open(path or data_path('frames.json'), encoding='utf-8') as f:
        return json.load(f)


def generate_corpus(taxonomy, frames=None, seed=0, per_verb=20, max_distractor_sim=0.5,
                    distractors=(1, 2)):
    """Synthetic WSD examples, one word per frame role.

    Gold senses are taken greedily from the least used leaves of the role's
    subtrees, spreading the examples over as many concepts as possible.
    Distractor candidates are leaves outside those subtrees whose similarity
    to the gold sense is at most ``max_distractor_sim``.
    """
    frames = frames or read_frames()
    rng = np.random.default_rng(seed)
    leaves = taxonomy.leaves()
    corpus = []
    for verb, roles in frames.items():
        pools = []
        for r in roles:
            pool = sorted({l for st in r['subtrees'] for l in taxonomy.leaves(_concept(taxonomy, st))})
            if len(pool) < 2:
                raise EvaluationError('frame %s/%s: subtrees hold %d leaves; need at least 2'
                                      % (verb, r['role'], len(pool)))
            pools.append(pool)
        used = {}
        for i in range(per_verb):
            words = []
            for j, (r, pool) in enumerate(zip(roles, pools)):
                least = min(used.get(c, 0) for c in pool)
                choice = [c for c in pool if used.get(c, 0) == least]
                gold = choice[rng.integers(len(choice))]
                used[gold] = used.get(gold, 0) + 1
                inside = set(pool)
                far = [l for l in leaves if l not in inside and taxonomy.similarity(gold, l) <= max_distractor_sim]
                n = int(rng.integers(distractors[0], distractors[1] + 1))
                if len(far) < n:
                    raise EvaluationError('no distractors for %s below similarity %.2f' % (gold, max_distractor_sim))
                picks = [far[x] for x in rng.choice(len(far), n, replace=False)]
                cands = [gold] + picks
                cands = [cands[x] for x in rng.permutation(len(cands))]
                words.append(Word('W%d' % (j + 1), gold.split('.')[0].replace('_', ' '), r.get('pos', 'NN'),
                                  r['role'], gold, tuple(cands)))
            corpus.append(WsdExample('%s-%02d' % (verb, i + 1), verb, tuple(words)))
    return corpus


def _concept(taxonomy, name):
    c = taxonomy.resolve(name)
    if c is None:
        raise EvaluationError('frame refers to unknown concept %s' % name)
    return c


def write_corpus(corpus, path):
    with open(path, 'w', encoding='utf-8') as f:
        for ex in corpus:
            f.write(ex.to_json() + '\n')


def read_corpus(path, taxonomy=None):
    out = []
    with open(path, encoding='utf-8') as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                ex = WsdExample.from_dict(json.loads(line))
            except (ValueError, KeyError, TypeError) as e:
                raise InputError('%s:%d: bad corpus record (%s)' % (path, lineno, e)) from None
            if taxonomy is not None:
                for w in ex.words:
                    for s in w.candidates:
                        if taxonomy.resolve(s) is None:
                            raise InputError('%s:%d: unknown concept: %s' % (path, lineno, s))
            out.append(ex)
    return out


def default_setup(seed=0):
    """(corpus, taxonomy, template) of the bundled experiment."""
    tax = read_taxonomy(data_path('kitchen.tax'))
    template = read_mln(data_path('wsd_roles.mln'))
    return generate_corpus(tax, seed=seed), tax, template
