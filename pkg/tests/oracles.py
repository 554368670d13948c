"""Reference implementations used as test oracles, plus random model fixtures.

The oracles ground formulas by direct substitution and enumerate worlds with
itertools, sharing nothing with the package's compiled grounding besides the
formula evaluators.
"""
import itertools
import math

import numpy as np

from fuzzymln import (And, Atom, Constant, Iff, Implies, Not, NotEquals, Or, SimilarityTable, Variable,
                      collect_domains, expand_templates, fuzzy_eval, binary_eval, load_taxonomy, make_database,
                      parse_mln)

PERSONS = ('A', 'B')
SENSES = ('S1', 'S2')
CONCEPTS = ('C1', 'C2', 'S1')

DECLS = """
p(person)
q(person, person)
instance_of(person, sense)
is_a(sense, concept)
#fuzzy is_a
"""


# naive grounding and enumeration ---------------------------------------------------

def oracle_domains(mln, db):
    doms = {}
    decls = mln.declarations
    for wf in mln.formulas:
        for a in wf.formula.atoms():
            for t, d in zip(a.args, decls[a.predicate].domains):
                doms.setdefault(d, set())
                if isinstance(t, Constant):
                    doms[d].add(t.name)
    for d, cs in db.domains.items():
        doms.setdefault(d, set()).update(cs)
    return {d: sorted(cs) for d, cs in doms.items()}


def _var_domains(mln, f):
    decls = mln.declarations
    out = {}
    for a in f.atoms():
        for t, d in zip(a.args, decls[a.predicate].domains):
            if isinstance(t, Variable):
                out[t.name] = d
    return out


def naive_ground(mln, doms):
    """[(ground formula, weight)] over every variable binding."""
    out = []
    for wf in mln.formulas:
        vd = _var_domains(mln, wf.formula)
        names = sorted(vd)
        for combo in itertools.product(*(doms.get(vd[n], []) for n in names)):
            f = wf.formula.substitute({n: Constant(c) for n, c in zip(names, combo)})
            out.append((f, wf.weight))
    return out


def pinned_value(atom, mln, sims, mode):
    s, c = atom.args[0].name, atom.args[1].name
    if mode == 'fol':
        return 1.0 if sims.resolve(s) == sims.resolve(c) else 0.0
    return float(sims.similarity(sims.resolve(s), sims.resolve(c)))


def _collect_atoms(f, out):
    if isinstance(f, Atom):
        out.append(f)
    elif isinstance(f, NotEquals):
        pass
    else:
        for ch in f.children():
            _collect_atoms(ch, out)


def brute_force(mln, db, sims, mode='fuzzy', closed_world=(), binary=False):
    """(marginals of every binary atom, log Z) by explicit enumeration.

    With ``binary`` the features come from :func:`binary_eval`, i.e. the
    classical semantics; pinned values must then be 0 or 1.
    """
    doms = oracle_domains(mln, db)
    decls = mln.declarations
    ground = naive_ground(mln, doms)
    fixed = {}
    binary_atoms = []
    for p in mln.predicates:
        if p.fuzzy:
            continue
        for combo in itertools.product(*(doms.get(d, []) for d in p.domains)):
            a = Atom(p.name, tuple(Constant(c) for c in combo))
            binary_atoms.append(a)
            t = db.truth(a)
            if t is not None:
                fixed[a] = float(t)
            elif p.name in closed_world:
                fixed[a] = 0.0
    used = []
    for f, _ in ground:
        _collect_atoms(f, used)
    for a in used:
        if decls[a.predicate].fuzzy:
            fixed[a] = pinned_value(a, mln, sims, mode)
    free = sorted({a for a in used if a not in fixed}, key=lambda a: binary_atoms.index(a))
    isolated = [a for a in binary_atoms if a not in fixed and a not in free]
    evaluate = binary_eval if binary else fuzzy_eval
    scores, worlds = [], []
    for bits in itertools.product((0, 1), repeat=len(free)):
        world = dict(fixed)
        world.update(zip(free, map(float, bits)))
        s = 0.0
        for f, w in ground:
            v = evaluate(f, world)
            if math.isinf(w):
                if v < 1:
                    s = -math.inf
                    break
            else:
                s += w * v
        scores.append(s)
        worlds.append(bits)
    top = max(scores)
    if top == -math.inf:
        return None, -math.inf
    e = [math.exp(s - top) for s in scores]
    z = math.fsum(e)
    marg = {}
    for k, a in enumerate(free):
        marg[a] = math.fsum(ei for ei, bits in zip(e, worlds) if bits[k]) / z
    for a in isolated:
        marg[a] = 0.5
    for a in binary_atoms:
        if a in fixed:
            marg[a] = fixed[a]
    log_z = top + math.log(z) + len(isolated) * math.log(2.0)
    return marg, log_z


def brute_scores(mln, db, sims, mode, g):
    """Score of each world of g (rows over g's free atoms) from the naive ground formulas."""
    doms = oracle_domains(mln, db)
    ground = naive_ground(mln, doms)
    out = []
    for X in g.iter_worlds():
        for x in X:
            world = g.world(x)
            s = 0.0
            for f, w in ground:
                v = fuzzy_eval(f, world)
                if math.isinf(w):
                    if v < 1:
                        s = -math.inf
                        break
                else:
                    s += w * v
            out.append(s)
    return np.array(out)


# random models -------------------------------------------------------------------------

def random_taxonomy(rng):
    """Random tree with root R over the sense and concept constants."""
    nodes = ['C1', 'C2', 'S1', 'S2', 'X1', 'X2']
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    lines = []
    placed = ['R']
    for n in order:
        lines.append('%s %s' % (n, placed[rng.integers(len(placed))]))
        placed.append(n)
    return load_taxonomy('\n'.join(lines))


def _term(rng, dom, persons=PERSONS):
    if dom == 'person':
        if rng.random() < 0.7:
            return Variable(['x', 'y'][rng.integers(2)])
        return Constant(persons[rng.integers(len(persons))])
    if dom == 'sense':
        return Variable('s') if rng.random() < 0.7 else Constant(SENSES[rng.integers(2)])
    return Constant(CONCEPTS[rng.integers(len(CONCEPTS))])


def random_atom(rng, with_is_a=True, persons=PERSONS):
    k = rng.integers(4 if with_is_a else 3)
    if k == 0:
        return Atom('p', (_term(rng, 'person', persons),))
    if k == 1:
        return Atom('q', (_term(rng, 'person', persons), _term(rng, 'person', persons)))
    if k == 2:
        return Atom('instance_of', (_term(rng, 'person', persons), _term(rng, 'sense')))
    return Atom('is_a', (_term(rng, 'sense'), _term(rng, 'concept')))


def q_atom(a, b):
    return Atom('q', (a, b))


def random_formula(rng, depth=3, persons=PERSONS):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.05:
            x, y = Variable('x'), Variable('y')
            return And(q_atom(x, y), NotEquals(x, y))
        return random_atom(rng, persons=persons)
    k = rng.integers(5)
    if k == 0:
        return Not(random_formula(rng, depth - 1, persons))
    cls = (And, Or, Implies, Iff)[k - 1]
    return cls(random_formula(rng, depth - 1, persons), random_formula(rng, depth - 1, persons))


def random_conjunction(rng, n_literals=3):
    """A conjunction with at least one positive is_a literal."""
    lits = [Atom('is_a', (Variable('s'), Constant(CONCEPTS[rng.integers(len(CONCEPTS))]))),
            Atom('instance_of', (Variable('x'), Variable('s')))]
    for _ in range(n_literals - 1):
        a = random_atom(rng, with_is_a=rng.random() < 0.3)
        lits.append(Not(a) if rng.random() < 0.3 else a)
    lits = [lits[i] for i in rng.permutation(len(lits))]
    f = lits[0]
    for lit in lits[1:]:
        f = And(f, lit)
    return f


def _mln_text(formulas, weights):
    lines = [DECLS]
    for f, w in zip(formulas, weights):
        lines.append('%s.' % f if math.isinf(w) else '%r %s' % (float(w), f))
    return '\n'.join(lines) + '\n'


def random_evidence(rng, mln, p_assert=0.3, persons=PERSONS):
    pos, neg = [], []
    for x in persons:
        cands = [Atom('p', (Constant(x),))]
        cands += [Atom('q', (Constant(x), Constant(y))) for y in persons]
        cands += [Atom('instance_of', (Constant(x), Constant(s))) for s in SENSES]
        for a in cands:
            r = rng.random()
            if r < p_assert / 2:
                pos.append(a)
            elif r < p_assert:
                neg.append(a)
    return make_database(mln, pos, neg, {'person': persons, 'sense': SENSES})


class RandomModel:
    """A seeded random fuzzy MLN with database and taxonomy."""

    def __init__(self, seed, n_formulas=None, conjunctive=False, hard=0.0, p_assert=0.3, weight_scale=2.0,
                 persons=PERSONS):
        rng = np.random.default_rng(seed)
        self.seed = seed
        n = n_formulas or int(rng.integers(1, 5))
        if conjunctive:
            formulas = [random_conjunction(rng, int(rng.integers(1, 4))) for _ in range(n)]
        else:
            formulas = [random_formula(rng, int(rng.integers(1, 4)), persons) for _ in range(n)]
        weights = rng.uniform(-weight_scale, weight_scale, n)
        weights = [math.inf if rng.random() < hard else w for w in weights]
        self.raw = parse_mln(_mln_text(formulas, weights))
        raw = self.raw
        self.db = random_evidence(rng, raw, p_assert, persons)
        self.mln = expand_templates(collect_domains(raw, [self.db]))
        self.taxonomy = random_taxonomy(rng)
        self.persons = persons
        self.rng = rng

    def training_dbs(self, n, p_true=0.5):
        """n random fully observed worlds (positive atoms only, closed world)."""
        out = []
        for _ in range(n):
            pos = []
            for x in self.persons:
                cands = [Atom('p', (Constant(x),))]
                cands += [Atom('q', (Constant(x), Constant(y))) for y in self.persons]
                cands += [Atom('instance_of', (Constant(x), Constant(s))) for s in SENSES]
                pos += [a for a in cands if self.rng.random() < p_true]
            out.append(make_database(self.raw, pos, (), {'person': self.persons, 'sense': SENSES}))
        return out

    def sims(self, values):
        """SimilarityTable pinning every (sense, concept) pair via ``values(s, c)``."""
        pins = {}
        for s in SENSES:
            for c in CONCEPTS:
                pins[(s, c)] = values(s, c)
        return SimilarityTable(pins, fallback=self.taxonomy)
