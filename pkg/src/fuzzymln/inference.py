"""Marginal and MAP inference over a ground MRF.

Exact inference enumerates the free atoms that occur in some formula
(bounded by a cap); atoms that occur nowhere are independent fair coins.
Gibbs sampling handles larger MRFs.
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapExceeded, InferenceError
from .grounding import DEFAULT_CAP, logsumexp_tree
from .logic import Atom, Constant, Variable, parse_atom

log = logging.getLogger(__name__)

RESTARTS = 1000
MAX_TABLE_BLANKET = 16


@dataclass
class MarginalResult:
    marginals: dict
    method: str
    samples: int = None
    seed: int = None
    query: str = None
    log_z: float = None
    extra: dict = field(default_factory=dict)

    def __getitem__(self, atom):
        if isinstance(atom, str):
            atom = parse_atom(atom)
        return self.marginals[atom]

    def __iter__(self):
        return iter(self.marginals.items())

    def __len__(self):
        return len(self.marginals)

    def to_dict(self):
        return {
            'query': self.query,
            'method': self.method,
            'seed': self.seed,
            'samples': self.samples,
            'marginals': [{'atom': str(a), 'p': float(p)} for a, p in self.marginals.items()],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_tsv(self):
        return ''.join('%s\t%.10g\n' % (a, p) for a, p in self.marginals.items())


def resolve_targets(g, targets=None):
    """Ground atoms of ``g`` matching the target atoms or patterns.

    A pattern may contain variables; it matches every atom of the MRF with
    the same predicate whose arguments agree on the constants. ``None``
    selects every free atom.
    """
    if targets is None:
        return [g.atoms[i].atom for i in g.free]
    if isinstance(targets, (str, Atom)):
        targets = [targets]
    out = []
    seen = set()
    for t in targets:
        if isinstance(t, str):
            t = parse_atom(t)
        if t.is_ground:
            if t not in g.atom_index:
                raise InferenceError('query atom %s is not part of the ground MRF' % t)
            matches = [t]
        else:
            matches = [ga.atom for ga in g.atoms if _matches(t, ga.atom)]
            if not matches:
                raise InferenceError('query %s matches no ground atom' % t)
        for a in matches:
            ga = g.atoms[g.atom_index[a]]
            if ga.kind == 'fuzzy':
                raise InferenceError('%s is a fuzzy atom; its value is fixed by the taxonomy' % a)
            if a not in seen:
                seen.add(a)
                out.append(a)
    return out


def _matches(pattern, atom):
    if pattern.predicate != atom.predicate or len(pattern.args) != len(atom.args):
        return False
    bound = {}
    for p, a in zip(pattern.args, atom.args):
        if isinstance(p, Variable):
            if bound.setdefault(p.name, a) != a:
                return False
        elif p != a:
            return False
    return True


def _collect(g, targets, free_probs, method, **meta):
    out = {}
    for a in targets:
        ga = g.atoms[g.atom_index[a]]
        if ga.is_free:
            out[a] = free_probs(g.free_position(a))
        else:
            out[a] = float(ga.value)
    return MarginalResult(out, method, **meta)


def _query_text(targets):
    if targets is None:
        return None
    if isinstance(targets, (str, Atom)):
        return str(targets)
    return ', '.join(map(str, targets))


# exact ----------------------------------------------------------------------

def exact_log_marginals(g, weights=None, cap=DEFAULT_CAP):
    """log Z and, per free atom, log of the unnormalized mass of worlds where it holds."""
    if g.unsatisfiable:
        raise InferenceError('hard formulas cannot all be satisfied')
    u = g.pattern_weights(weights)
    parts = []
    atom_parts = []
    for X in g.iter_worlds(cap):
        s = g.scores(X, u=u)
        m = np.max(s)
        if m == -np.inf:
            parts.append(-math.inf)
            atom_parts.append(np.full(len(g.relevant), -np.inf))
            continue
        e = np.exp(s - m)
        parts.append(float(m + np.log(e.sum())))
        with np.errstate(divide='ignore'):
            atom_parts.append(m + np.log(e.dot(X[:, g.relevant])))
    log_z = logsumexp_tree(parts)
    if log_z == -math.inf:
        raise InferenceError('hard formulas cannot all be satisfied')
    per_atom = np.full(g.n_free, log_z - math.log(2.0))
    if len(g.relevant):
        stacked = np.array(atom_parts)
        for k, pos in enumerate(g.relevant):
            per_atom[pos] = logsumexp_tree(stacked[:, k])
    log_z_total = log_z + g.n_isolated * math.log(2.0)
    return log_z_total, per_atom + g.n_isolated * math.log(2.0)


def exact_marginals(g, targets=None, weights=None, cap=DEFAULT_CAP):
    """Marginals P(atom = 1) by exhaustive enumeration, computed in log space."""
    atoms = resolve_targets(g, targets)
    log_z, per_atom = exact_log_marginals(g, weights, cap)
    probs = np.minimum(1.0, np.exp(per_atom - log_z))
    return _collect(g, atoms, lambda pos: float(probs[pos]), 'exact',
                    query=_query_text(targets), log_z=log_z)


def map_state(g, weights=None, cap=DEFAULT_CAP, samples=10000, seed=0):
    """Highest-scoring world; ties go to the lexicographically smallest assignment.

    Beyond the cap the best state visited by a Gibbs chain is returned.
    """
    x, _ = map_assignment(g, weights, cap, samples, seed)
    return g.world(x)


def map_assignment(g, weights=None, cap=DEFAULT_CAP, samples=10000, seed=0):
    """(free-atom vector, score) of the MAP state."""
    if g.unsatisfiable:
        raise InferenceError('hard formulas cannot all be satisfied')
    if len(g.relevant) > cap:
        log.info('%d relevant atoms exceed cap %d; using best of Gibbs samples', len(g.relevant), cap)
        sampler = GibbsSampler(g, weights, seed)
        return sampler.best_state(samples)
    u = g.pattern_weights(weights)
    best, best_x = -math.inf, None
    for X in g.iter_worlds(cap):
        s = g.scores(X, u=u)
        i = int(np.argmax(s))
        if s[i] > best:
            best, best_x = float(s[i]), X[i].copy()
    if best_x is None:
        raise InferenceError('hard formulas cannot all be satisfied')
    return best_x, best


# Gibbs ------------------------------------------------------------------------

class GibbsSampler:
    """Single-site Gibbs sampler over the free atoms of a ground MRF.

    For every atom the conditional log-odds given its Markov blanket is
    tabulated once (for blankets of up to 16 atoms), so a sweep costs one table
    lookup per atom.
    """

    def __init__(self, g, weights=None, seed=None):
        if g.n_free == 0:
            raise InferenceError('no free atoms to sample')
        if g.unsatisfiable:
            raise InferenceError('hard formulas cannot all be satisfied')
        self.g = g
        self.u = g.pattern_weights(weights)
        self.rng = np.random.default_rng(seed)
        n = g.n_free
        soft = [[] for _ in range(n)]
        hard = [[] for _ in range(n)]
        hard_set = set(g.hard_patterns.tolist())
        for p, (atoms, vals) in enumerate(g.patterns):
            is_hard = p in hard_set
            if not is_hard and self.u[p] == 0.0:
                continue
            for a in set(atoms):
                (hard if is_hard else soft)[a].append(p)
        self.blankets = []
        self.tables = []
        self.slow = []
        for j in range(n):
            pats = soft[j] + hard[j]
            blanket = sorted({a for p in pats for a in g.patterns[p][0]} - {j})
            self.blankets.append(blanket)
            if len(blanket) <= MAX_TABLE_BLANKET:
                self.tables.append(self._table(j, blanket, soft[j], hard[j]))
                self.slow.append(None)
            else:
                self.tables.append(None)
                self.slow.append((soft[j], hard[j]))

    def _table(self, j, blanket, soft, hard):
        """P(x_j = 1 | blanket) for every blanket configuration (bit k = blanket[k])."""
        b = len(blanket)
        cfg = np.arange(1 << b, dtype=np.int64)
        bits = (cfg[:, None] >> np.arange(b)) & 1
        s = [np.zeros(1 << b), np.zeros(1 << b)]
        col = {a: k for k, a in enumerate(blanket)}
        for v in (0, 1):
            for p, hard_p in [(p, False) for p in soft] + [(p, True) for p in hard]:
                atoms, vals = self.g.patterns[p]
                ok = np.ones(1 << b, dtype=bool)
                for a, val in zip(atoms, vals):
                    if a == j:
                        if val != v:
                            ok[:] = False
                    else:
                        ok &= bits[:, col[a]] == val
                if hard_p:
                    s[v][ok] = -np.inf
                else:
                    s[v] = s[v] + np.where(ok, self.u[p], 0.0)
        return _prob_one(s[1], s[0])

    def _prob_slow(self, j, x):
        soft, hard = self.slow[j]
        s = [0.0, 0.0]
        for v in (0, 1):
            for p in soft + hard:
                atoms, vals = self.g.patterns[p]
                ok = all((v if a == j else x[a]) == val for a, val in zip(atoms, vals))
                if ok:
                    s[v] = -math.inf if p in hard else s[v] + self.u[p]
        return float(_prob_one(np.array([s[1]]), np.array([s[0]]))[0])

    def initial_state(self):
        g = self.g
        for _ in range(RESTARTS):
            x = self.rng.integers(0, 2, g.n_free).astype(np.int8)
            if not len(g.hard_patterns) or np.isfinite(g.scores(x[None, :], u=self.u)[0]):
                return x
        raise InferenceError('no state satisfying the hard formulas found after %d restarts' % RESTARTS)

    def run(self, samples, burn_in=0, callback=None):
        """Sweeps the chain; returns per-atom counts of 1 over the kept sweeps."""
        n = self.g.n_free
        x = [int(v) for v in self.initial_state()]
        counts = np.zeros(n, dtype=np.int64)
        order = range(n)
        tables, blankets, slow = self.tables, self.blankets, self.slow
        block = 1024
        U = None
        for sweep in range(burn_in + samples):
            r = sweep % block
            if r == 0:
                U = self.rng.random((block, n)).tolist()
            row = U[r]
            for j in order:
                t = tables[j]
                if t is None:
                    p = self._prob_slow(j, x)
                else:
                    idx = 0
                    for k, a in enumerate(blankets[j]):
                        if x[a]:
                            idx |= 1 << k
                    p = t[idx]
                x[j] = 1 if row[j] < p else 0
            if sweep >= burn_in:
                counts += x
                if callback is not None:
                    callback(x)
        return counts

    def best_state(self, samples):
        best = [-math.inf, None]
        g = self.g

        def keep(x):
            arr = np.array(x, dtype=np.int8)
            s = g.scores(arr[None, :], u=self.u)[0]
            if s > best[0] or (s == best[0] and tuple(arr) < tuple(best[1])):
                best[0], best[1] = float(s), arr
        self.run(samples, 0, keep)
        return best[1], best[0]


def _prob_one(s1, s0):
    d = s1 - s0
    with np.errstate(invalid='ignore', over='ignore'):
        p = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))), np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    p = np.where(np.isneginf(s0) & np.isfinite(s1), 1.0, p)
    p = np.where(np.isneginf(s1) & np.isfinite(s0), 0.0, p)
    # unreachable blanket configurations (both values forbidden) keep p defined
    return np.nan_to_num(p, nan=0.5).tolist()


def gibbs_marginals(g, targets=None, samples=50000, burn_in=5000, seed=None, weights=None):
    """Marginals as post-burn-in sample means of a single seeded Gibbs chain."""
    atoms = resolve_targets(g, targets)
    if samples < 1:
        raise InferenceError('need at least one sample')
    counts = GibbsSampler(g, weights, seed).run(samples, burn_in)
    return _collect(g, atoms, lambda pos: float(counts[pos]) / samples, 'gibbs',
                    samples=samples, seed=seed, query=_query_text(targets))


# sense posteriors ----------------------------------------------------------------

def candidate_atoms(g, word, predicate='instance_of'):
    """instance_of(word, s) atoms of ``g`` that are not pinned false."""
    w = Constant(word) if isinstance(word, str) else word
    found = [ga for ga in g.atoms if ga.atom.predicate == predicate and ga.atom.args
             and ga.atom.args[0] == w]
    if not found:
        raise InferenceError('unknown word constant %s' % w)
    return [ga.atom for ga in found if ga.is_free or ga.value > 0]


def sense_posterior(g, word, predicate='instance_of', marginals=None, cap=DEFAULT_CAP):
    """Candidate senses of ``word`` ranked by their normalized marginals.

    Returns ``[(sense, p), ...]`` summing to 1, highest first (stable for
    ties). ``marginals`` may be a precomputed :class:`MarginalResult`.
    """
    cands = candidate_atoms(g, word, predicate)
    if not cands:
        return []
    if marginals is None:
        marginals = exact_marginals(g, cands, cap=cap)
    ps = np.array([marginals.marginals[a] for a in cands], dtype=float)
    total = ps.sum()
    ps = ps / total if total > 0 else np.full(len(ps), 1.0 / len(ps))
    ranked = sorted(zip((a.args[1].name for a in cands), ps.tolist()), key=lambda t: -t[1])
    return ranked


def spread_posterior(mln, db, taxonomy, word, concepts=None, mode='fuzzy', predicate='instance_of',
                     closed_world=(), cap=DEFAULT_CAP):
    """Experimental: a posterior over arbitrary taxonomy nodes for ``word``.

    Each node is scored by making it the word's only candidate sense and
    taking the marginal of ``instance_of(word, node)``; scores are then
    normalized over the nodes.
    """
    from .evidence import make_database
    from .grounding import ground

    w = Constant(word)
    concepts = list(taxonomy) if concepts is None else list(concepts)
    decl = mln.predicate(predicate)
    base_pos = {a for a in db.positive if not (a.predicate == predicate and a.args[0] == w)}
    base_neg = {a for a in db.negative if not (a.predicate == predicate and a.args[0] == w)}
    senses = set(db.domains.get(decl.domains[1], ())) | set(mln.formula_constants().get(decl.domains[1], ()))
    scores = {}
    for c in concepts:
        neg = set(base_neg)
        neg.update(Atom(predicate, (w, Constant(s))) for s in senses if s != c)
        hyp = make_database(mln, base_pos, neg, {decl.domains[0]: [word], decl.domains[1]: [c]})
        g = ground(mln, hyp, taxonomy, mode, closed_world)
        a = Atom(predicate, (w, Constant(c)))
        scores[c] = exact_marginals(g, [a], cap=cap).marginals[a]
    total = sum(scores.values())
    return {c: (p / total if total > 0 else 1.0 / len(scores)) for c, p in scores.items()}


def to_dot(taxonomy, probs, title=None):
    """DOT graph of the taxonomy, nodes shaded by probability (darker is likelier)."""
    top = max(probs.values(), default=0.0)
    lines = ['digraph taxonomy {', '  rankdir=TB;', '  node [shape=box, style=filled, fontname="Helvetica"];']
    if title:
        lines.append('  label=%s;' % json.dumps(title))
    resolved = {}
    for s, p in probs.items():
        c = taxonomy.resolve(s) if hasattr(taxonomy, 'resolve') else s
        if c is not None:
            resolved[c] = resolved.get(c, 0.0) + p
    for c in taxonomy:
        p = resolved.get(c, 0.0)
        level = 100 - int(round(80 * p / top)) if top > 0 else 100
        font = 'white' if level < 50 else 'black'
        label = '%s\\n%.3f' % (c, p) if c in resolved else c
        lines.append('  %s [label="%s", fillcolor="gray%d", fontcolor=%s];' % (json.dumps(c), label, level, font))
    for c, p in sorted(taxonomy.edges, key=lambda e: (e[1], e[0])):
        lines.append('  %s -> %s;' % (json.dumps(p), json.dumps(c)))
    lines.append('}')
    return '\n'.join(lines) + '\n'
