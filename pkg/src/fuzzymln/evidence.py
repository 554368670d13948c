"""Evidence databases of ground atoms.

One atom per line, ``!`` for explicit negatives, ``//`` comments::

    instance_of(Fred, Turkey)
    !flies(Bob)
"""
import io
from dataclasses import dataclass, field

from .errors import EvidenceError, ParseError
from .logic import Atom
from .logic import parse_formula
from .logic import Not
from .model import _strip_comment


@dataclass(frozen=True)
class Database:
    positive: frozenset = frozenset()
    negative: frozenset = frozenset()
    domains: dict = field(default_factory=dict, hash=False)
    fuzzy: frozenset = frozenset()

    def __post_init__(self):
        both = self.positive & self.negative
        if both:
            raise EvidenceError('contradictory evidence for %s' % ', '.join(sorted(map(str, both))))

    def truth(self, atom):
        """1 / 0 for asserted atoms, None if unknown."""
        if atom in self.positive:
            return 1
        if atom in self.negative:
            return 0
        return None

    def __contains__(self, atom):
        return atom in self.positive or atom in self.negative

    def __len__(self):
        return len(self.positive) + len(self.negative)

    def to_text(self):
        lines = [str(a) for a in sorted(self.positive, key=str)]
        lines += ['!%s' % a for a in sorted(self.negative, key=str)]
        return '\n'.join(lines) + '\n'


def make_database(mln, positive=(), negative=(), extra_constants=None):
    """Build a validated :class:`Database` for ``mln`` from atom collections.

    ``extra_constants`` maps domain names to constants that belong to this
    database without occurring in any asserted atom.
    """
    decls = mln.declarations
    doms = {}
    for a in list(positive) + list(negative):
        decl = decls.get(a.predicate)
        if decl is None:
            raise EvidenceError('undeclared predicate %r in %s' % (a.predicate, a))
        if decl.arity != len(a.args):
            raise EvidenceError('arity mismatch in %s: %s takes %d arguments' % (a, a.predicate, decl.arity))
        if decl.fuzzy:
            raise EvidenceError('%s: fuzzy predicate %s is computed from the taxonomy and cannot be asserted'
                                % (a, a.predicate))
        if not a.is_ground:
            raise EvidenceError('non-ground atom %s in evidence' % a)
        for t, d in zip(a.args, decl.domains):
            doms.setdefault(d, set()).add(t.name)
    for d, cs in (extra_constants or {}).items():
        doms.setdefault(d, set()).update(cs)
    return Database(frozenset(positive), frozenset(negative),
                    {k: tuple(sorted(v)) for k, v in sorted(doms.items())},
                    mln.fuzzy_predicates)


def parse_db(source, mln, name=None):
    """Parse a ``.db`` stream against the declarations of ``mln``."""
    if isinstance(source, str):
        source = io.StringIO(source)
    pos, neg = set(), set()
    for lineno, raw in enumerate(source, 1):
        line = _strip_comment(raw)
        if not line:
            continue
        f = parse_formula(line, lineno, name)
        negated = isinstance(f, Not)
        a = f.operand if negated else f
        if not isinstance(a, Atom):
            raise ParseError('expected a ground atom, optionally negated with "!"', lineno, source=name)
        try:
            if negated:
                neg.add(a)
            else:
                pos.add(a)
            make_database(mln, [a])
        except EvidenceError as e:
            raise EvidenceError('%s%d: %s' % ('%s:' % name if name else 'line ', lineno, e)) from None
        if a in pos and a in neg:
            raise EvidenceError('%s%d: contradictory assertion of %s' % ('%s:' % name if name else 'line ', lineno, a))
    return make_database(mln, pos, neg)


def read_db(path, mln):
    with open(path, encoding='utf-8') as f:
        return parse_db(f, mln, name=str(path))


def close_world(db, ground_atoms):
    """Truth assignment for the binary atoms under the closed-world assumption.

    Every binary atom not asserted true is false. Fuzzy atoms are left out;
    their values come from the taxonomy.
    """
    out = {}
    for ga in ground_atoms:
        a = getattr(ga, 'atom', ga)
        if a.predicate in db.fuzzy:
            continue
        out[a] = 1.0 if a in db.positive else 0.0
    return out
