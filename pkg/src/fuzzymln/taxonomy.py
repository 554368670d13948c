"""Concept taxonomies and Wu-Palmer similarity.

A taxonomy is a rooted DAG read from ``child parent`` lines. Depth counts
nodes on the longest root path (the root has depth 1), so similarities are
always strictly positive.
"""
import io
import os
import re
from collections import deque

from .errors import ParseError, TaxonomyError, UnknownConcept

ID_RE = re.compile(r'^[A-Za-z0-9_.\-]+$')


def _canon(name):
    return re.sub(r'[._\-]', '.', name.lower())


class Taxonomy:
    """Immutable concept hierarchy.

    :param parents: mapping concept id -> iterable of parent ids.
    """

    def __init__(self, parents):
        self._parents = {c: tuple(sorted(set(ps))) for c, ps in parents.items()}
        for ps in list(self._parents.values()):
            for p in ps:
                self._parents.setdefault(p, ())
        if not self._parents:
            raise TaxonomyError('empty taxonomy')
        roots = sorted(c for c, ps in self._parents.items() if not ps)
        if not roots:
            raise TaxonomyError('cycle detected: no root concept')
        if len(roots) > 1:
            raise TaxonomyError('multiple roots: %s' % ', '.join(roots[:10]))
        self.root = roots[0]
        children = {c: [] for c in self._parents}
        for c, ps in self._parents.items():
            for p in ps:
                children[p].append(c)
        self._children = {c: tuple(sorted(cs)) for c, cs in children.items()}
        self._depth = self._longest_depths()
        self._ancestors = {}
        # similarity memo; values are deterministic, so concurrent fills are benign
        self._memo = {}
        canon = {}
        for c in self._parents:
            canon.setdefault(_canon(c), []).append(c)
        self._canon = {k: v[0] for k, v in canon.items() if len(v) == 1}

    def _longest_depths(self):
        # Kahn's algorithm from the root; any node left unvisited lies on a cycle
        indeg = {c: len(ps) for c, ps in self._parents.items()}
        depth = {self.root: 1}
        queue = deque([self.root])
        seen = 0
        while queue:
            c = queue.popleft()
            seen += 1
            for ch in self._children[c]:
                depth[ch] = max(depth.get(ch, 0), depth[c] + 1)
                indeg[ch] -= 1
                if indeg[ch] == 0:
                    queue.append(ch)
        if seen != len(self._parents):
            stuck = sorted(c for c, d in indeg.items() if d > 0)
            raise TaxonomyError('cycle detected involving %s' % ', '.join(stuck[:5]))
        return depth

    def __contains__(self, c):
        return c in self._parents

    def __len__(self):
        return len(self._parents)

    def __iter__(self):
        return iter(sorted(self._parents))

    @property
    def concepts(self):
        return frozenset(self._parents)

    @property
    def edges(self):
        return frozenset((c, p) for c, ps in self._parents.items() for p in ps)

    def parents(self, c):
        self._check(c)
        return self._parents[c]

    def children(self, c):
        self._check(c)
        return self._children[c]

    def _check(self, c):
        if c not in self._parents:
            raise UnknownConcept(c)

    def resolve(self, name):
        """Map a constant name to a concept id.

        Accepts the exact id, or a spelling that differs only in case and
        in the separators ``.``, ``_`` and ``-`` (``Cup_n_01`` -> ``cup.n.01``).
        Returns None if no unique concept matches.
        """
        if name in self._parents:
            return name
        return self._canon.get(_canon(name))

    def depth(self, c):
        self._check(c)
        return self._depth[c]

    def ancestors(self, c):
        """All superconcepts of c, including c itself."""
        self._check(c)
        anc = self._ancestors.get(c)
        if anc is None:
            anc = {c}
            stack = [c]
            while stack:
                for p in self._parents[stack.pop()]:
                    if p not in anc:
                        anc.add(p)
                        stack.append(p)
            anc = frozenset(anc)
            self._ancestors[c] = anc
        return anc

    def descendants(self, c):
        """All subconcepts of c, including c itself."""
        self._check(c)
        out = {c}
        stack = [c]
        while stack:
            for ch in self._children[stack.pop()]:
                if ch not in out:
                    out.add(ch)
                    stack.append(ch)
        return frozenset(out)

    def leaves(self, c=None):
        nodes = self.descendants(c) if c is not None else self._parents
        return sorted(n for n in nodes if not self._children[n])

    def lcs(self, c1, c2):
        common = self.ancestors(c1) & self.ancestors(c2)
        return min(common, key=lambda a: (-self._depth[a], a))

    def similarity(self, c1, c2):
        """Wu-Palmer similarity 2*depth(lcs) / (depth(c1) + depth(c2))."""
        key = (c1, c2) if c1 <= c2 else (c2, c1)
        v = self._memo.get(key)
        if v is None:
            lcs = self.lcs(c1, c2)
            v = 2.0 * self._depth[lcs] / (self._depth[c1] + self._depth[c2])
            self._memo[key] = v
        return v

    wup = similarity

    def to_text(self):
        lines = []
        for c in sorted(self._parents):
            for p in self._parents[c]:
                lines.append('%s %s' % (c, p))
        if len(self._parents) == 1:
            lines.append(self.root)
        return '\n'.join(lines) + '\n'


class SimilarityTable:
    """Explicit similarity values, optionally backed by a taxonomy.

    Used to pin is-a truth values directly, e.g. for worked examples whose
    similarities are given rather than computed. Pairs are unordered.
    """

    def __init__(self, pins, fallback=None):
        self._pins = {}
        for (a, b), v in dict(pins).items():
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise TaxonomyError('similarity for (%s, %s) outside [0,1]: %r' % (a, b, v))
            self._pins[(a, b)] = v
            self._pins[(b, a)] = v
        self.fallback = fallback
        self._names = {a for a, _ in self._pins}

    def __contains__(self, c):
        return c in self._names or (self.fallback is not None and c in self.fallback)

    def resolve(self, name):
        if name in self._names:
            return name
        if self.fallback is not None:
            return self.fallback.resolve(name)
        return None

    def similarity(self, c1, c2):
        v = self._pins.get((c1, c2))
        if v is not None:
            return v
        if c1 == c2:
            return 1.0
        if self.fallback is None:
            raise UnknownConcept('(%s, %s)' % (c1, c2))
        return self.fallback.similarity(c1, c2)


def load_taxonomy(source, name=None):
    """Parse ``child parent`` lines into a validated :class:`Taxonomy`.

    ``source`` is an iterable of lines (an open file or a string). A line with
    a single id declares a concept without parents, which only makes sense for
    the root.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    parents = {}
    for lineno, raw in enumerate(source, 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) > 2:
            raise ParseError('expected "<child> <parent>", got %d fields' % len(toks), lineno, source=name)
        for t in toks:
            if not ID_RE.match(t):
                raise ParseError('invalid concept id %r' % t, lineno, source=name)
        child = toks[0]
        parents.setdefault(child, set())
        if len(toks) == 2:
            if toks[1] == child:
                raise TaxonomyError('cycle detected: %s is its own parent (line %d)' % (child, lineno))
            parents[child].add(toks[1])
            parents.setdefault(toks[1], set())
    if not parents:
        raise TaxonomyError('empty taxonomy%s' % (' in %s' % name if name else ''))
    return Taxonomy(parents)


def read_taxonomy(path):
    with open(path, encoding='utf-8') as f:
        return load_taxonomy(f, name=os.fspath(path))


def read_similarities(path, fallback=None):
    """Read ``s c value`` lines into a :class:`SimilarityTable`."""
    pins = {}
    with open(path, encoding='utf-8') as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            if len(toks) != 3:
                raise ParseError('expected "<concept> <concept> <value>"', lineno, source=path)
            try:
                pins[(toks[0], toks[1])] = float(toks[2])
            except ValueError:
                raise ParseError('bad similarity value %r' % toks[2], lineno, source=path) from None
    return SimilarityTable(pins, fallback=fallback)
