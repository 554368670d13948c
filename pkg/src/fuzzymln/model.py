"""MLN container: predicate declarations, weighted formulas, templates.

File format (UTF-8, ``//`` comments)::

    instance_of(word, sense)        // declaration: predicate(domain, ...)
    is_a(sense, concept)
    #fuzzy is_a                     // is_a atoms take similarity values
    2.1972 flies(e) ^ instance_of(e, s) ^ is_a(s, Parrot)
    instance_of(w, s) => !bad(s).   // trailing '.' marks a hard formula

``+var`` in a formula marks a template slot, expanded into one independently
weighted formula per value of the slot's domain.
"""
import io
import itertools
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ModelError, ParseError
from .logic import Atom, Constant, Variable, parse_formula

HARD = math.inf

_WEIGHT_RE = re.compile(r'^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s+(.*)$')
_DECL_RE = re.compile(r'^([A-Za-z_][A-Za-z0-9_]*)\s*\(\s*([A-Za-z_][A-Za-z0-9_]*(?:\s*,\s*[A-Za-z_][A-Za-z0-9_]*)*)\s*\)$')


@dataclass(frozen=True)
class PredicateDecl:
    name: str
    domains: tuple
    fuzzy: bool = False

    @property
    def arity(self):
        return len(self.domains)

    def __str__(self):
        return '%s(%s)' % (self.name, ', '.join(self.domains))


@dataclass(frozen=True)
class WeightedFormula:
    formula: object
    weight: float
    template_slots: frozenset = frozenset()
    # (template index, ((slot, constant), ...)) for formulas produced by expansion
    origin: tuple = field(default=None, compare=False)

    @property
    def is_hard(self):
        return self.weight == HARD

    def __str__(self):
        if self.is_hard:
            return '%s.' % self.formula
        return '%s %s' % (_fmt_weight(self.weight), self.formula)


def _fmt_weight(w):
    return repr(float(w))


@dataclass(frozen=True)
class MLN:
    """A Markov logic network (without its taxonomy).

    ``domains`` maps domain names to sorted constant tuples; it holds the
    constants of the formulas plus whatever :func:`collect_domains` added, and
    supplies the values for template expansion.
    """
    predicates: tuple = ()
    formulas: tuple = ()
    domains: dict = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        self._validate()

    # lookups ---------------------------------------------------------------

    @property
    def declarations(self):
        return {p.name: p for p in self.predicates}

    def predicate(self, name):
        for p in self.predicates:
            if p.name == name:
                return p
        raise ModelError('undeclared predicate %r' % name)

    @property
    def fuzzy_predicates(self):
        return frozenset(p.name for p in self.predicates if p.fuzzy)

    @property
    def weights(self):
        return np.array([wf.weight for wf in self.formulas], dtype=float)

    @property
    def is_expanded(self):
        return all(not wf.template_slots for wf in self.formulas)

    def with_weights(self, weights):
        weights = list(weights)
        if len(weights) != len(self.formulas):
            raise ModelError('expected %d weights, got %d' % (len(self.formulas), len(weights)))
        fs = tuple(wf if wf.is_hard else WeightedFormula(wf.formula, float(w), wf.template_slots, wf.origin)
                   for wf, w in zip(self.formulas, weights))
        out = _trusted(self.predicates, fs, self.domains)
        # caches keyed on formula structure stay valid when only weights change
        for k, v in self.__dict__.items():
            if k.startswith('_'):
                object.__setattr__(out, k, v)
        return out

    def variable_domains(self, formula):
        """Domain name of every variable in ``formula``."""
        doms = {}
        decls = self.declarations
        for a in formula.atoms():
            decl = decls[a.predicate]
            for t, d in zip(a.args, decl.domains):
                if isinstance(t, Variable):
                    if doms.setdefault(t.name, d) != d:
                        raise ModelError('variable %s used with domains %s and %s in %s'
                                         % (t.name, doms[t.name], d, formula))
        return doms

    def formula_constants(self):
        """Domain name -> set of constants appearing in the formulas."""
        out = {}
        decls = self.declarations
        for wf in self.formulas:
            for a in wf.formula.atoms():
                for t, d in zip(a.args, decls[a.predicate].domains):
                    if isinstance(t, Constant):
                        out.setdefault(d, set()).add(t.name)
        return out

    def _validate(self):
        seen = set()
        for p in self.predicates:
            if p.name in seen:
                raise ModelError('duplicate declaration of %s' % p.name)
            seen.add(p.name)
            if p.fuzzy and p.arity != 2:
                raise ModelError('fuzzy predicate %s must be binary (sense, concept)' % p.name)
        decls = self.declarations
        for wf in self.formulas:
            for a in wf.formula.atoms():
                _check_atom(a, decls)
            self.variable_domains(wf.formula)

    def to_text(self):
        lines = [str(p) for p in self.predicates]
        lines += ['#fuzzy %s' % p.name for p in self.predicates if p.fuzzy]
        if self.formulas:
            lines.append('')
        lines += [str(wf) for wf in self.formulas]
        return '\n'.join(lines) + '\n'

    __str__ = to_text


def _trusted(predicates, formulas, domains):
    """An MLN built from already validated parts, skipping validation."""
    m = object.__new__(MLN)
    object.__setattr__(m, 'predicates', predicates)
    object.__setattr__(m, 'formulas', formulas)
    object.__setattr__(m, 'domains', domains)
    return m


def _check_atom(a, decls, line=None):
    decl = decls.get(a.predicate)
    if decl is None:
        raise ModelError('undeclared predicate %r%s' % (a.predicate, '' if line is None else ' (line %d)' % line))
    if decl.arity != len(a.args):
        raise ModelError('arity mismatch for %s: declared %d, used with %d%s'
                         % (a.predicate, decl.arity, len(a.args), '' if line is None else ' (line %d)' % line))


def _strip_comment(line):
    out = []
    inq = False
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == '"':
            inq = not inq
        elif not inq and line.startswith('//', i):
            break
        out.append(ch)
        i += 1
    return ''.join(out).strip()


def parse_mln(source, name=None):
    """Parse an MLN file (text or stream) into an unexpanded :class:`MLN`."""
    if isinstance(source, str):
        source = io.StringIO(source)
    decls = []
    fuzzy = []
    formulas = []
    for lineno, raw in enumerate(source, 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith('#'):
            toks = line.split()
            if toks[0] != '#fuzzy' or len(toks) != 2:
                raise ParseError('unknown directive %r' % line, lineno, source=name)
            fuzzy.append((toks[1], lineno))
            continue
        m = _WEIGHT_RE.match(line)
        if m:
            weight = float(m.group(1))
            if not math.isfinite(weight):
                raise ParseError('weight must be finite', lineno, source=name)
            text = m.group(2)
            col = line.index(text) + 1
            formulas.append((parse_formula(text, lineno, name), weight, lineno, col))
            continue
        if line.endswith('.'):
            text = line[:-1]
            formulas.append((parse_formula(text, lineno, name), HARD, lineno, 1))
            continue
        m = _DECL_RE.match(line)
        if m:
            doms = tuple(d.strip() for d in m.group(2).split(','))
            decls.append((m.group(1), doms, lineno))
            continue
        raise ParseError('expected a declaration, "<weight> <formula>" or "<formula>."', lineno, source=name)
    names = {}
    for pname, doms, lineno in decls:
        if pname in names:
            raise ParseError('duplicate declaration of %s' % pname, lineno, source=name)
        names[pname] = doms
    fz = set()
    for pname, lineno in fuzzy:
        if pname not in names:
            raise ParseError('#fuzzy refers to undeclared predicate %r' % pname, lineno, source=name)
        if len(names[pname]) != 2:
            raise ParseError('fuzzy predicate %s must be binary' % pname, lineno, source=name)
        fz.add(pname)
    preds = tuple(PredicateDecl(p, d, p in fz) for p, d, _ in decls)
    dmap = {p.name: p for p in preds}
    wfs = []
    for f, w, lineno, col in formulas:
        for a in f.atoms():
            if a.predicate not in dmap:
                raise ParseError('undeclared predicate %r' % a.predicate, lineno, col, name)
            if dmap[a.predicate].arity != len(a.args):
                raise ParseError('arity mismatch for %s: declared %d, used with %d'
                                 % (a.predicate, dmap[a.predicate].arity, len(a.args)), lineno, col, name)
        wfs.append((f, w, lineno))
    mln = MLN(preds, ())
    out = []
    for f, w, lineno in wfs:
        try:
            doms = mln.variable_domains(f)
        except ModelError as e:
            raise ParseError(str(e), lineno, source=name) from None
        slots = frozenset((v, doms[v]) for v in f.template_variables())
        if slots and w == HARD:
            raise ParseError('hard formulas cannot be templates', lineno, source=name)
        out.append(WeightedFormula(f, w, slots))
    m = MLN(preds, tuple(out))
    return replace(m, domains=_sorted_domains(m.formula_constants()))


def read_mln(path):
    with open(path, encoding='utf-8') as f:
        return parse_mln(f, name=str(path))


def _sorted_domains(d):
    return {k: tuple(sorted(v)) for k, v in sorted(d.items())}


def collect_domains(m, dbs):
    """Return ``m`` with domains holding every constant seen in formulas and databases.

    Constants observed as the first (sense) argument of a fuzzy predicate are
    also added to the domain of its second (concept) argument: concepts seen in
    the data are the concepts the model represents.
    """
    doms = {k: set(v) for k, v in m.domains.items()}
    for k, v in m.formula_constants().items():
        doms.setdefault(k, set()).update(v)
    owner = {}

    def note(const, dom):
        prev = owner.setdefault(const, dom)
        if prev != dom and not linked(prev, dom):
            raise ModelError('constant %s used in conflicting domains %s and %s' % (const, prev, dom))

    links = set()
    for p in m.predicates:
        if p.fuzzy:
            links.add(frozenset(p.domains))

    def linked(a, b):
        return frozenset((a, b)) in links

    for wf in m.formulas:
        for a in wf.formula.atoms():
            for t, d in zip(a.args, m.predicate(a.predicate).domains):
                if isinstance(t, Constant):
                    note(t.name, d)
    for db in dbs:
        for d, consts in db.domains.items():
            for c in consts:
                note(c, d)
            doms.setdefault(d, set()).update(consts)
    for p in m.predicates:
        if p.fuzzy:
            sense, concept = p.domains
            doms.setdefault(concept, set()).update(doms.get(sense, ()))
    return replace(m, domains=_sorted_domains(doms))


def expand_templates(m):
    """Replace each template formula by one formula per slot-value combination.

    Every expanded formula starts from the template's weight and is weighted
    independently afterwards.
    """
    out = []
    for ti, wf in enumerate(m.formulas):
        if not wf.template_slots:
            out.append(wf)
            continue
        slots = [v for v in wf.formula.template_variables()]
        slot_dom = dict(wf.template_slots)
        values = []
        for v in slots:
            vals = m.domains.get(slot_dom[v], ())
            if not vals:
                raise ModelError('template slot +%s ranges over empty domain %r' % (v, slot_dom[v]))
            values.append(vals)
        for combo in itertools.product(*values):
            binding = dict(zip(slots, combo))
            f = wf.formula.substitute({k: Constant(c) for k, c in binding.items()})
            out.append(WeightedFormula(f, wf.weight, frozenset(), (ti, tuple(zip(slots, combo)))))
    return _trusted(m.predicates, tuple(out), m.domains)
