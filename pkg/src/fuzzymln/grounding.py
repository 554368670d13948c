"""Ground Markov random fields for (fuzzy) MLNs.

Grounding instantiates every formula over the constants of the model and one
database. Atoms of fuzzy predicates (``is_a``) are pinned to the taxonomy
similarity of their arguments in every world; asserted binary atoms are pinned
to their evidence value; the remaining binary atoms are the free variables.

Internally each ground formula is compiled into *patterns*: partial
assignments of free atoms together with the feature value the formula takes
when the pattern matches. A pure conjunction yields a single pattern (all
literals satisfied, value = min of its pinned conjuncts), any other formula
one pattern per assignment of its free atoms with a nonzero value. The score
of a world is then ``sum_p [x matches p] * (coef[p] . w)``.
"""
import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import CapExceeded, GroundingError, InferenceError
from .logic import Atom, Constant, NotEquals, Variable, conjunction_literals, fuzzy_eval

log = logging.getLogger(__name__)

FOL = 'fol'
FUZZY = 'fuzzy'
MODES = (FOL, FUZZY)

DEFAULT_CAP = 24
CHUNK = 1 << 16
MAX_FORMULA_ATOMS = 16
_BIG = np.iinfo(np.int64).max


@dataclass(frozen=True)
class GroundAtom:
    atom: Atom
    index: int
    kind: str  # 'binary' (free), 'evidence' or 'fuzzy'
    value: float = None

    @property
    def is_free(self):
        return self.kind == 'binary'


@dataclass(frozen=True)
class GroundFormula:
    formula: object
    weight: float
    parent: int


class GroundMRF:
    """A ground MRF; immutable once built by :func:`ground`."""

    def __init__(self, mln, mode, domains, atoms, patterns, coef, hard_patterns, unsatisfiable=False):
        self.mln = mln
        self.mode = mode
        self.domains = domains
        self.atoms = tuple(atoms)
        self.atom_index = {ga.atom: ga.index for ga in self.atoms}
        self.free = tuple(ga.index for ga in self.atoms if ga.is_free)
        self._free_pos = {a: i for i, a in enumerate(self.free)}
        self.patterns = tuple(patterns)
        self.coef = coef
        self.hard_patterns = np.asarray(hard_patterns, dtype=np.int64)
        self.unsatisfiable = unsatisfiable
        w = mln.weights
        self.hard = np.isinf(w)
        self.weights = np.where(self.hard, 0.0, w)
        used = sorted({p for pat in self.patterns for p in pat[0]})
        self.relevant = np.array(used, dtype=np.int64)
        self.n_isolated = len(self.free) - len(used)
        self._groups = _group_patterns(self.patterns)
        self._ground_formulas = None

    # atoms -------------------------------------------------------------------

    @property
    def n_free(self):
        return len(self.free)

    @property
    def free_atoms(self):
        return [self.atoms[i].atom for i in self.free]

    @property
    def pinned(self):
        return {ga.atom: ga.value for ga in self.atoms if not ga.is_free}

    def free_position(self, atom):
        """Position of ``atom`` among the free atoms, or None if pinned/unknown."""
        idx = self.atom_index.get(atom)
        if idx is None:
            return None
        return self._free_pos.get(idx)

    def ground_atom(self, atom):
        try:
            return self.atoms[self.atom_index[atom]]
        except KeyError:
            raise GroundingError('atom %s is not part of the ground MRF' % atom) from None

    # ground formulas ----------------------------------------------------------

    @property
    def ground_formulas(self):
        """Every ground formula, one per variable binding (computed on demand)."""
        if self._ground_formulas is None:
            self._ground_formulas = list(iter_ground_formulas(self.mln, self.domains))
        return self._ground_formulas

    # scoring ------------------------------------------------------------------

    def match(self, X):
        """Pattern indicator matrix (worlds x patterns) for free-atom assignments X."""
        X = np.asarray(X)
        M = np.zeros((X.shape[0], len(self.patterns)), dtype=np.float64)
        for k, (idx, atoms, vals) in self._groups.items():
            if k == 0:
                M[:, idx] = 1.0
            else:
                M[:, idx] = (X[:, atoms] == vals).all(axis=2)
        return M

    def features(self, X):
        """Feature sums per formula, i.e. the summed fuzzy truth of its groundings."""
        return self.coef.T.dot(self.match(X).T).T

    def pattern_weights(self, weights=None):
        w = self.weights if weights is None else np.where(self.hard, 0.0, np.asarray(weights, dtype=float))
        return self.coef.dot(w)

    def scores(self, X, weights=None, u=None):
        """World scores for assignments X (rows over free atoms); -inf on hard violations."""
        M = self.match(X)
        if u is None:
            u = self.pattern_weights(weights)
        s = M.dot(u)
        if len(self.hard_patterns):
            s[M[:, self.hard_patterns].any(axis=1)] = -np.inf
        return s

    def assignment(self, world):
        """Free-atom assignment vector from a world mapping (extra atoms are checked)."""
        if not hasattr(world, 'keys'):
            x = np.asarray(world, dtype=np.int8)
            if x.shape != (self.n_free,):
                raise InferenceError('expected %d free-atom values, got shape %s' % (self.n_free, x.shape))
            return x
        x = np.zeros(self.n_free, dtype=np.int8)
        for pos, idx in enumerate(self.free):
            a = self.atoms[idx].atom
            if a not in world:
                raise InferenceError('world assigns no value to free atom %s' % a)
            v = world[a]
            if v not in (0, 1):
                raise InferenceError('free atom %s must be 0 or 1, got %r' % (a, v))
            x[pos] = int(v)
        for a, v in world.items():
            ga = self.atoms[self.atom_index[a]] if a in self.atom_index else None
            if ga is not None and not ga.is_free and v != ga.value:
                raise InferenceError('%s is pinned to %r, world has %r' % (a, ga.value, v))
        return x

    def world(self, x):
        """Full world (pinned and free atoms) for a free-atom assignment."""
        out = self.pinned
        for pos, idx in enumerate(self.free):
            out[self.atoms[idx].atom] = float(x[pos])
        return out

    # enumeration ---------------------------------------------------------------

    def iter_worlds(self, cap=DEFAULT_CAP, chunk=CHUNK):
        """Yields chunks of assignments over all relevant free atoms.

        Free atoms that occur in no formula are left at 0; they contribute a
        factor of 2 to the partition function and are handled analytically.
        Worlds are ordered lexicographically by relevant-atom vector.
        """
        n = len(self.relevant)
        if n > cap:
            raise CapExceeded(n, cap)
        total = 1 << n
        shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
        for start in range(0, total, chunk):
            ids = np.arange(start, min(total, start + chunk), dtype=np.int64)
            X = np.zeros((len(ids), self.n_free), dtype=np.int8)
            if n:
                X[:, self.relevant] = (ids[:, None] >> shifts[None, :]) & 1
            yield X

    def __repr__(self):
        return '<GroundMRF %s: %d atoms (%d free), %d patterns>' % (
            self.mode, len(self.atoms), self.n_free, len(self.patterns))


def _group_patterns(patterns):
    groups = defaultdict(list)
    for i, (atoms, vals) in enumerate(patterns):
        groups[len(atoms)].append(i)
    out = {}
    for k, idx in groups.items():
        idx = np.array(idx, dtype=np.int64)
        atoms = np.array([patterns[i][0] for i in idx], dtype=np.int64).reshape(len(idx), k)
        vals = np.array([patterns[i][1] for i in idx], dtype=np.int8).reshape(len(idx), k)
        out[k] = (idx, atoms, vals)
    return out


def logsumexp_tree(values):
    """Log-sum-exp by pairwise reduction, for summation-order reproducibility."""
    vals = [float(v) for v in values]
    if not vals:
        return -math.inf
    while len(vals) > 1:
        nxt = []
        for i in range(0, len(vals), 2):
            if i + 1 < len(vals):
                a, b = vals[i], vals[i + 1]
                m = max(a, b)
                if m == -math.inf:
                    nxt.append(-math.inf)
                else:
                    nxt.append(m + math.log(math.exp(a - m) + math.exp(b - m)))
            else:
                nxt.append(vals[i])
        vals = nxt
    return vals[0]


def _lse(s):
    m = np.max(s)
    if m == -np.inf:
        return -math.inf
    return float(m + np.log(np.sum(np.exp(s - m))))


def world_score(g, x, weights=None):
    """Sum of weight times fuzzy truth over all ground formulas; -inf if a hard formula fails."""
    xa = g.assignment(x)
    return float(g.scores(xa[None, :], weights)[0])


def log_partition(g, weights=None, cap=DEFAULT_CAP):
    """log Z by exhaustive enumeration of the relevant free atoms."""
    u = g.pattern_weights(weights)
    parts = [_lse(g.scores(X, u=u)) for X in g.iter_worlds(cap)]
    return logsumexp_tree(parts) + g.n_isolated * math.log(2.0)


# grounding ----------------------------------------------------------------

class _Group:
    """Conjunctions sharing one skeleton; their constants form one column per occurrence."""

    def __init__(self, mln, items):
        self.fis = np.array([fi for fi, _ in items], dtype=np.int64)
        self.lits = items[0][1]
        f0 = mln.formulas[items[0][0]].formula
        self.formula = f0
        self.vdoms = mln.variable_domains(f0)
        self.names = f0.variables()
        rows = []
        for _, lits in items:
            row = []
            for node, _ in lits:
                terms = node.args if isinstance(node, Atom) else (node.left, node.right)
                row.extend(t.name for t in terms if isinstance(t, Constant))
            rows.append(row)
        ncols = len(rows[0]) if rows else 0
        self.columns = [np.array([r[k] for r in rows]) for k in range(ncols)]


class _Analysis:
    """Structure of an MLN that does not depend on the database."""

    def __init__(self, mln):
        self.formula_constants = mln.formula_constants()
        groups = defaultdict(list)
        self.generic = []
        for fi, wf in enumerate(mln.formulas):
            lits = None if wf.is_hard else conjunction_literals(wf.formula)
            if lits is None:
                self.generic.append(fi)
            else:
                groups[_skeleton(lits)].append((fi, lits))
        self.groups = [_Group(mln, items) for items in groups.values()]
        # per fuzzy predicate: first-argument constants (None for a variable) -> second-argument constants
        self.fuzzy_args = {}
        for p in mln.predicates:
            if not p.fuzzy:
                continue
            by_first = defaultdict(set)
            for wf in mln.formulas:
                for a in wf.formula.atoms():
                    if a.predicate == p.name:
                        s = a.args[0].name if isinstance(a.args[0], Constant) else None
                        c = a.args[1].name if isinstance(a.args[1], Constant) else None
                        by_first[s].add(c)
            self.fuzzy_args[p.name] = dict(by_first)


def _analysis(mln):
    a = mln.__dict__.get('_grounding_analysis')
    if a is None:
        a = _Analysis(mln)
        object.__setattr__(mln, '_grounding_analysis', a)
    return a


def grounding_domains(mln, db):
    """Constants per domain for grounding: formula constants plus database constants."""
    doms = {}
    for d, cs in _analysis(mln).formula_constants.items():
        doms.setdefault(d, set()).update(cs)
    if db is not None:
        for d, cs in db.domains.items():
            doms.setdefault(d, set()).update(cs)
    for p in mln.predicates:
        for d in p.domains:
            doms.setdefault(d, set())
    return {d: tuple(sorted(cs)) for d, cs in sorted(doms.items())}


def iter_ground_formulas(mln, domains):
    """Yields a :class:`GroundFormula` for every formula and variable binding."""
    for fi, wf in enumerate(mln.formulas):
        f = wf.formula
        vdoms = mln.variable_domains(f)
        names = f.variables()
        for v in names:
            if v not in vdoms:
                raise GroundingError('variable %s in %s occurs in no atom (unbound domain)' % (v, f))
        for combo in itertools.product(*[domains.get(vdoms[v], ()) for v in names]):
            binding = {v: Constant(c) for v, c in zip(names, combo)}
            yield GroundFormula(f.substitute(binding), wf.weight, fi)


class _AtomTable:
    """Dense indexing of binary atoms over domain products."""

    def __init__(self, mln, domains):
        self.mln = mln
        self.domains = domains
        self.pos = {d: {c: i for i, c in enumerate(cs)} for d, cs in domains.items()}
        self.offset = {}
        self.strides = {}
        self.binary = [p for p in mln.predicates if not p.fuzzy]
        n = 0
        for p in self.binary:
            sizes = [len(domains[d]) for d in p.domains]
            strides = []
            acc = 1
            for s in reversed(sizes):
                strides.append(acc)
                acc *= s
            self.strides[p.name] = tuple(reversed(strides))
            self.offset[p.name] = n
            n += acc
        self.n_binary = n

    def binary_atoms(self):
        for p in self.binary:
            for combo in itertools.product(*[self.domains[d] for d in p.domains]):
                yield Atom(p.name, tuple(Constant(c) for c in combo))


def ground(mln, db=None, taxonomy=None, mode=FUZZY, closed_world=(), evidence=True):
    """Build the ground MRF of an expanded MLN for one database.

    :param taxonomy:     a :class:`~fuzzymln.taxonomy.Taxonomy` or
                         :class:`~fuzzymln.taxonomy.SimilarityTable`; supplies
                         is-a truth values in fuzzy mode and concept identity
                         in FOL mode.
    :param mode:         ``'fuzzy'`` pins is-a atoms to similarities, ``'fol'``
                         to 1 for identical concepts and 0 otherwise.
    :param closed_world: binary predicates whose unasserted atoms are false.
    :param evidence:     if False, no binary atom is pinned (used for the
                         partition function of training databases).
    """
    if mode not in MODES:
        raise GroundingError('unknown mode %r (expected fol or fuzzy)' % mode)
    if not mln.is_expanded:
        raise GroundingError('MLN contains unexpanded template formulas')
    if taxonomy is None and mode == FUZZY and mln.fuzzy_predicates:
        raise GroundingError('fuzzy mode needs a taxonomy or similarity table')
    closed_world = set(closed_world)
    for p in closed_world:
        mln.predicate(p)
    analysis = _analysis(mln)
    domains = grounding_domains(mln, db)
    table = _AtomTable(mln, domains)
    const_id = {}
    for cs in domains.values():
        for c in cs:
            const_id.setdefault(c, len(const_id))

    # binary atoms
    atoms, values, kinds = [], [], []
    for a in table.binary_atoms():
        v = db.truth(a) if (evidence and db is not None) else None
        if v is None and evidence and a.predicate in closed_world:
            v = 0
        atoms.append(a)
        kinds.append('binary' if v is None else 'evidence')
        values.append(float('nan') if v is None else float(v))
    # fuzzy atoms: observed senses x concepts the formulas can refer to
    fuzzy_index = {}
    for p in mln.predicates:
        if not p.fuzzy:
            continue
        sdom, cdom = domains[p.domains[0]], domains[p.domains[1]]
        spos, cpos = table.pos[p.domains[0]], table.pos[p.domains[1]]
        pairs = set()
        for s, cs in analysis.fuzzy_args[p.name].items():
            ss = sdom if s is None else [s]
            cs = cdom if None in cs else sorted(cs)
            pairs.update((spos[x], cpos[y]) for x in ss for y in cs)
        idx = np.full((len(sdom), len(cdom)), -1, dtype=np.int64)
        for sp, cp in sorted(pairs, key=lambda t: (sdom[t[0]], cdom[t[1]])):
            s, c = sdom[sp], cdom[cp]
            idx[sp, cp] = len(atoms)
            atoms.append(Atom(p.name, (Constant(s), Constant(c))))
            kinds.append('fuzzy')
            values.append(_is_a_value(taxonomy, mode, s, c))
        fuzzy_index[p.name] = idx
    values = np.array(values, dtype=np.float64)
    is_free = np.array([k == 'binary' for k in kinds], dtype=bool)
    free_pos = np.full(len(atoms), -1, dtype=np.int64)
    free_pos[is_free] = np.arange(int(is_free.sum()))
    gatoms = [GroundAtom(a, i, k, None if k == 'binary' else float(values[i]))
              for i, (a, k) in enumerate(zip(atoms, kinds))]
    status = _Status(table, fuzzy_index, values, free_pos, const_id)

    builder = _PatternBuilder()
    for group in analysis.groups:
        _ground_conjunctions(mln, status, group, builder)
    unsat = False
    index_of = {a: i for i, a in enumerate(atoms)}
    for fi in analysis.generic:
        hard = mln.formulas[fi].is_hard
        for gf in _ground_one(mln, fi, domains):
            unsat |= _compile_generic(gf, fi, hard, index_of, values, free_pos, builder)
    coef = builder.matrix(len(mln.formulas))
    g = GroundMRF(mln, mode, domains, gatoms, builder.patterns, coef, builder.hard, unsat)
    g.taxonomy = taxonomy
    log.debug('grounded %r', g)
    return g


def _is_a_value(taxonomy, mode, s, c):
    if taxonomy is None:
        return 1.0 if s == c else 0.0
    rs, rc = taxonomy.resolve(s), taxonomy.resolve(c)
    for name, r in ((s, rs), (c, rc)):
        if r is None:
            raise GroundingError('concept %s missing from taxonomy' % name)
    if mode == FOL:
        return 1.0 if rs == rc else 0.0
    return float(taxonomy.similarity(rs, rc))


def _ground_one(mln, fi, domains):
    wf = mln.formulas[fi]
    f = wf.formula
    vdoms = mln.variable_domains(f)
    names = f.variables()
    for v in names:
        if v not in vdoms:
            raise GroundingError('variable %s in %s occurs in no atom (unbound domain)' % (v, f))
    for combo in itertools.product(*[domains[vdoms[v]] for v in names]):
        yield GroundFormula(f.substitute({v: Constant(c) for v, c in zip(names, combo)}), wf.weight, fi)


class _Status:
    """Atom lookup shared by the vectorized grounding routines."""

    def __init__(self, table, fuzzy_index, values, free_pos, const_id):
        self.table = table
        self.fuzzy_index = fuzzy_index
        self.values = values
        self.free_pos = free_pos
        self.const_id = const_id

    def atom_ids(self, decl, parts):
        if decl.fuzzy:
            ids = self.fuzzy_index[decl.name][parts[0], parts[1]]
            if (ids < 0).any():
                raise GroundingError('internal error: unregistered %s atom' % decl.name)
            return ids
        t = self.table
        idx = np.full(len(parts[0]), t.offset[decl.name], dtype=np.int64)
        for p, s in zip(parts, t.strides[decl.name]):
            idx = idx + p * s
        return idx

    def literal(self, ids, positive):
        """(pinned literal value or 1 for free atoms, free-atom key or _BIG)."""
        fp = self.free_pos[ids]
        free = fp >= 0
        v = self.values[ids]
        litv = np.where(free, 1.0, v if positive else 1.0 - v)
        key = np.where(free, fp * 2 + (1 if positive else 0), _BIG)
        return litv, key


# conjunctions: vectorized over (binding, formula) ---------------------------

def _term_key(t):
    return ('v', t.name) if isinstance(t, Variable) else ('c',)


def _skeleton(lits):
    out = []
    for node, positive in lits:
        if isinstance(node, Atom):
            out.append(('a', node.predicate, positive, tuple(_term_key(t) for t in node.args)))
        else:
            out.append(('ne', positive, _term_key(node.left), _term_key(node.right)))
    return tuple(out)


def _ground_conjunctions(mln, st, group, builder, max_rows=1 << 21):
    """Ground a group of conjunctions that differ only in their constants.

    Variable bindings are enumerated once; literals without constants are
    evaluated first so bindings they falsify are dropped before the bindings
    are crossed with the formulas of the group.
    """
    table = st.table
    fis, lits0, vdoms, names = group.fis, group.lits, group.vdoms, group.names
    for v in names:
        if v not in vdoms:
            raise GroundingError('variable %s in %s occurs in no atom (unbound domain)' % (v, group.formula))
    sizes = [len(table.domains[vdoms[v]]) for v in names]
    if any(s == 0 for s in sizes):
        return
    grids = np.indices(sizes, dtype=np.int64).reshape(len(sizes), -1) if names else np.zeros((0, 1), np.int64)
    var_pos = {v: grids[i] for i, v in enumerate(names)}
    var_gid = {}
    for v in names:
        gid = np.array([st.const_id[c] for c in table.domains[vdoms[v]]], dtype=np.int64)
        var_gid[v] = gid[var_pos[v]]
    nb = grids.shape[1]
    nf = len(fis)

    # literal specs: binding-level (no constants) or formula-level
    const_b = np.ones(nb)
    keys_b = []
    flits = []
    col = 0
    for node, positive in lits0:
        terms = node.args if isinstance(node, Atom) else (node.left, node.right)
        has_const = any(isinstance(t, Constant) for t in terms)
        if isinstance(node, Atom):
            decl = mln.predicate(node.predicate)
            spec = []
            for t, d in zip(node.args, decl.domains):
                if isinstance(t, Variable):
                    spec.append(('v', t.name))
                else:
                    spec.append(('c', _positions(table.domains[d], group.columns[col])))
                    col += 1
            if has_const:
                flits.append(('a', decl, positive, spec))
            else:
                litv, key = st.literal(st.atom_ids(decl, [var_pos[n] for _, n in spec]), positive)
                const_b = np.minimum(const_b, litv)
                keys_b.append(key)
        else:
            spec = []
            for t in terms:
                if isinstance(t, Variable):
                    if t.name not in var_gid:
                        raise GroundingError('variable %s occurs in no atom (unbound domain)' % t.name)
                    spec.append(('v', t.name))
                else:
                    spec.append(('c', np.array([st.const_id.setdefault(c, len(st.const_id))
                                                for c in group.columns[col].tolist()], dtype=np.int64)))
                    col += 1
            if has_const:
                flits.append(('ne', None, positive, spec))
            else:
                ne = var_gid[spec[0][1]] != var_gid[spec[1][1]]
                const_b = np.where(ne if positive else ~ne, const_b, 0.0)
    keep = np.flatnonzero(const_b > 0)
    if not len(keep):
        return
    step = max(1, max_rows // nf)
    for start in range(0, len(keep), step):
        kb = keep[start:start + step]
        bsel = np.repeat(kb, nf)
        fsel = np.tile(np.arange(nf), len(kb))
        const = const_b[bsel]
        keys = [k[bsel] for k in keys_b]
        for kind, decl, positive, spec in flits:
            vals = [var_pos[x][bsel] if tag == 'v' else x[fsel] for tag, x in spec]
            if kind == 'a':
                litv, key = st.literal(st.atom_ids(decl, vals), positive)
                const = np.minimum(const, litv)
                keys.append(key)
            else:
                gids = [var_gid[x][bsel] if tag == 'v' else x[fsel] for tag, x in spec]
                ne = gids[0] != gids[1]
                const = np.where(ne if positive else ~ne, const, 0.0)
        _emit_conjunctions(const, fis[fsel], keys, builder)


def _positions(domain, names):
    dom = np.array(domain)
    pos = np.searchsorted(dom, names)
    if (pos >= len(dom)).any() or (dom[np.minimum(pos, len(dom) - 1)] != names).any():
        raise GroundingError('internal error: formula constant outside its domain')
    return pos.astype(np.int64)


def _unique_rows(K):
    """np.unique over rows, via one integer code per row when it fits."""
    top = int(K[K != _BIG].max(initial=0)) + 2
    if top ** K.shape[1] < (1 << 62):
        R = np.where(K == _BIG, top - 1, K)
        code = np.zeros(len(K), dtype=np.int64)
        for j in range(K.shape[1]):
            code = code * top + R[:, j]
        _, first, inv = np.unique(code, return_index=True, return_inverse=True)
        return K[first], inv.reshape(-1)
    uniq, inv = np.unique(K, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1)


def _emit_conjunctions(const, fidx, keys, builder):
    keep = const > 0
    if not keep.any():
        return
    const, fidx = const[keep], fidx[keep]
    if not keys:
        builder.add(np.full(len(const), builder.pattern((), ()), dtype=np.int64), fidx, const)
        return
    K = np.sort(np.stack([k[keep] for k in keys], axis=1), axis=1)
    # a free atom required both true and false: the conjunction never holds
    valid = K != _BIG
    same_atom = (K[:, 1:] // 2 == K[:, :-1] // 2) & valid[:, 1:] & valid[:, :-1]
    conflict = (same_atom & (K[:, 1:] != K[:, :-1])).any(axis=1)
    if conflict.any():
        K, const, fidx = K[~conflict], const[~conflict], fidx[~conflict]
    dup = np.zeros_like(K, dtype=bool)
    dup[:, 1:] = (K[:, 1:] == K[:, :-1]) & (K[:, 1:] != _BIG)
    K = np.sort(np.where(dup, _BIG, K), axis=1)
    uniq, inv = _unique_rows(K)
    pids = np.empty(len(uniq), dtype=np.int64)
    for r, row in enumerate(uniq):
        row = row[row != _BIG]
        pids[r] = builder.pattern(tuple((row // 2).tolist()), tuple((row % 2).tolist()))
    builder.add(pids[inv], fidx, const)


def _compile_generic(gf, fi, hard, index_of, values, free_pos, builder):
    """Tabulate one ground formula over its free atoms. Returns True if a hard formula can never hold."""
    world = {}
    free = []
    for a in gf.formula.atoms():
        i = index_of[a]
        if free_pos[i] >= 0:
            if a not in world:
                free.append((int(free_pos[i]), a))
                world[a] = 0.0
        else:
            world[a] = float(values[i])
    free.sort()
    k = len(free)
    if k > MAX_FORMULA_ATOMS:
        raise GroundingError('ground formula %s has %d free atoms (limit %d)' % (gf.formula, k, MAX_FORMULA_ATOMS))
    positions = tuple(p for p, _ in free)
    any_ok = False
    for bits in itertools.product((0, 1), repeat=k):
        for (_, a), b in zip(free, bits):
            world[a] = float(b)
        v = fuzzy_eval(gf.formula, world)
        if hard:
            if v < 1.0:
                builder.hard.append(builder.pattern(positions, bits))
            else:
                any_ok = True
        elif v != 0.0:
            builder.add_one(builder.pattern(positions, bits), fi, v)
    return hard and not any_ok


class _PatternBuilder:

    def __init__(self):
        self.index = {}
        self.patterns = []
        self.rows = []
        self.cols = []
        self.vals = []
        self.hard = []

    def pattern(self, atoms, vals):
        key = (atoms, vals)
        i = self.index.get(key)
        if i is None:
            i = len(self.patterns)
            self.index[key] = i
            self.patterns.append(key)
        return i

    def add(self, rows, cols, vals):
        self.rows.append(np.asarray(rows, dtype=np.int64))
        self.cols.append(np.asarray(cols, dtype=np.int64))
        self.vals.append(np.asarray(vals, dtype=np.float64))

    def add_one(self, row, col, val):
        self.add([row], [col], [val])

    def matrix(self, nformulas):
        if self.rows:
            r = np.concatenate(self.rows)
            c = np.concatenate(self.cols)
            v = np.concatenate(self.vals)
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        return sparse.csr_matrix((v, (r, c)), shape=(len(self.patterns), nformulas))


def dump_mrf(g):
    """Diagnostic lines ``<weight>\\t<formula>\\t<pinned values...>``."""
    pinned = g.pinned
    lines = []
    for gf in g.ground_formulas:
        vals = []
        seen = set()
        for a in gf.formula.atoms():
            if a in pinned and a not in seen:
                seen.add(a)
                vals.append('%s=%s' % (a, _fmt(pinned[a])))
        w = 'HARD' if math.isinf(gf.weight) else repr(gf.weight)
        lines.append('%s\t%s\t%s' % (w, gf.formula, ' '.join(vals)))
    return lines


def _fmt(v):
    return ('%.6f' % v).rstrip('0').rstrip('.') if v not in (0.0, 1.0) else str(int(v))
