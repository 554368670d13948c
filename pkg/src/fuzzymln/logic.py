"""First-order formulas, their text syntax, and fuzzy/binary evaluation.

Grammar (ASCII)::

    formula  := iff
    iff      := implies ('<=>' implies)*
    implies  := or ('=>' or)*
    or       := and ('v' and)*
    and      := unary ('^' unary)*
    unary    := '!' unary | '(' formula ')' | atom | term '=/=' term
    atom     := name '(' term (',' term)* ')'
    term     := Constant | "quoted constant" | variable | '+'variable

Identifiers starting with a lowercase letter are variables, everything else
(uppercase start, digits, quoted strings) is a constant. A ``+`` prefix marks
a template slot. Free variables are implicitly universally quantified.
"""
import re
from dataclasses import dataclass

from .errors import ParseError


@dataclass(frozen=True)
class Constant:
    name: str

    @property
    def is_ground(self):
        return True

    def __str__(self):
        if re.match(r'^[A-Z0-9][A-Za-z0-9_]*$', self.name):
            return self.name
        return '"%s"' % self.name


@dataclass(frozen=True)
class Variable:
    name: str
    template: bool = False

    @property
    def is_ground(self):
        return False

    def __str__(self):
        return ('+' if self.template else '') + self.name


class Formula:
    """Base class of all formula nodes."""

    def atoms(self):
        """Yields the atoms in this formula (left to right, with repetitions)."""
        for c in self.children():
            yield from c.atoms()

    def children(self):
        return ()

    def terms(self):
        for a in self.atoms():
            yield from a.args
        for c in self.walk():
            if isinstance(c, NotEquals):
                yield c.left
                yield c.right

    def walk(self):
        yield self
        for c in self.children():
            yield from c.walk()

    def variables(self):
        """Variable names in order of first appearance."""
        seen = {}
        for t in self.terms():
            if isinstance(t, Variable):
                seen.setdefault(t.name, None)
        return list(seen)

    def template_variables(self):
        seen = {}
        for t in self.terms():
            if isinstance(t, Variable) and t.template:
                seen.setdefault(t.name, None)
        return list(seen)

    def constants(self):
        return [t.name for t in self.terms() if isinstance(t, Constant)]

    @property
    def is_ground(self):
        return all(t.is_ground for t in self.terms())

    def substitute(self, binding):
        raise NotImplementedError

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    predicate: str
    args: tuple

    def atoms(self):
        yield self

    def substitute(self, binding):
        return Atom(self.predicate, tuple(_subst_term(t, binding) for t in self.args))

    def __str__(self):
        return '%s(%s)' % (self.predicate, ','.join(str(a) for a in self.args))


@dataclass(frozen=True)
class NotEquals(Formula):
    left: object
    right: object

    def substitute(self, binding):
        return NotEquals(_subst_term(self.left, binding), _subst_term(self.right, binding))

    __str__ = Formula.__str__


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula

    def children(self):
        return (self.operand,)

    def substitute(self, binding):
        return Not(self.operand.substitute(binding))

    __str__ = Formula.__str__


@dataclass(frozen=True)
class _Binary(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def substitute(self, binding):
        return type(self)(self.left.substitute(binding), self.right.substitute(binding))

    __str__ = Formula.__str__


class And(_Binary):
    pass


class Or(_Binary):
    pass


class Implies(_Binary):
    pass


class Iff(_Binary):
    pass


def _subst_term(t, binding):
    if isinstance(t, Variable) and t.name in binding:
        v = binding[t.name]
        return v if isinstance(v, (Constant, Variable)) else Constant(v)
    return t


# printing -----------------------------------------------------------------

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}
_OPS = {Iff: '<=>', Implies: '=>', Or: 'v', And: '^'}


def to_text(f, parent_prec=0, right=False):
    if isinstance(f, Atom):
        return str(f)
    if isinstance(f, NotEquals):
        s = '%s =/= %s' % (f.left, f.right)
        return '(%s)' % s if parent_prec > 4 else s
    if isinstance(f, Not):
        return '!' + to_text(f.operand, 5)
    prec = _PREC[type(f)]
    s = '%s %s %s' % (to_text(f.left, prec), _OPS[type(f)], to_text(f.right, prec, right=True))
    # left-associative: a right operand at equal precedence needs parentheses
    if prec < parent_prec or (prec == parent_prec and right):
        return '(%s)' % s
    return s


# parsing ------------------------------------------------------------------

_TOKEN_RE = re.compile(r'''
    (?P<ws>\s+)
  | (?P<op><=>|=>|=/=|!|\^|\(|\)|,)
  | (?P<tvar>\+[A-Za-z_][A-Za-z0-9_]*)
  | (?P<quoted>"[^"\n]*")
  | (?P<ident>[A-Za-z0-9_]+)
  | (?P<bad>->|<->|&&?|\|\|?|~|=|<|>|.)
''', re.VERBOSE)


class _Tok:
    __slots__ = ('kind', 'text', 'line', 'col')

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return '%s(%r)' % (self.kind, self.text)


def _tokenize(text, line0, source):
    toks = []
    line, linestart = line0, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        s = m.group()
        col = m.start() - linestart + 1
        if kind == 'ws':
            nl = s.count('\n')
            if nl:
                line += nl
                linestart = m.start() + s.rfind('\n') + 1
            continue
        if kind == 'bad':
            if s in ('->', '<->', '&', '&&', '|', '||', '~', '=', '<', '>'):
                raise ParseError('unknown connective %r' % s, line, col, source)
            raise ParseError('unexpected character %r' % s, line, col, source)
        toks.append(_Tok(kind, s, line, col))
    return toks


class _Parser:

    def __init__(self, text, line0=1, source=None):
        self.source = source
        self.toks = _tokenize(text, line0, source)
        self.pos = 0
        self.end_line = line0

    def peek(self, k=0):
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else None
            raise ParseError(msg + ' at end of input', last.line if last else self.end_line,
                             (last.col + len(last.text)) if last else 1, self.source)
        raise ParseError(msg, tok.line, tok.col, self.source)

    def accept_op(self, text):
        t = self.peek()
        if t is not None and t.kind == 'op' and t.text == text:
            self.pos += 1
            return True
        return False

    def expect_op(self, text):
        if not self.accept_op(text):
            t = self.peek()
            self.error('expected %r%s' % (text, '' if t is None else ', found %r' % t.text))

    def parse(self):
        if not self.toks:
            raise ParseError('empty formula', self.end_line, 1, self.source)
        f = self.iff()
        t = self.peek()
        if t is not None:
            if t.kind == 'ident' or t.kind in ('tvar', 'quoted'):
                self.error('unknown connective %r' % t.text)
            self.error('unexpected %r' % t.text)
        return f

    def iff(self):
        f = self.implies()
        while self.accept_op('<=>'):
            f = Iff(f, self.implies())
        return f

    def implies(self):
        f = self.disj()
        while self.accept_op('=>'):
            f = Implies(f, self.disj())
        return f

    def disj(self):
        f = self.conj()
        while True:
            t = self.peek()
            if t is not None and t.kind == 'ident' and t.text == 'v':
                self.pos += 1
                f = Or(f, self.conj())
            else:
                return f

    def conj(self):
        f = self.unary()
        while self.accept_op('^'):
            f = And(f, self.unary())
        return f

    def unary(self):
        if self.accept_op('!'):
            return Not(self.unary())
        if self.accept_op('('):
            f = self.iff()
            self.expect_op(')')
            return f
        t = self.peek()
        if t is None:
            self.error('expected a formula')
        nxt = self.peek(1)
        if t.kind == 'ident' and nxt is not None and nxt.kind == 'op' and nxt.text == '(':
            return self.atom()
        if t.kind in ('ident', 'tvar', 'quoted'):
            left = self.term()
            self.expect_op('=/=')
            return NotEquals(left, self.term())
        self.error('unexpected %r' % t.text)

    def atom(self):
        name = self.peek().text
        if not re.match(r'^[A-Za-z_]', name):
            self.error('invalid predicate name %r' % name)
        self.pos += 1
        self.expect_op('(')
        args = [self.term()]
        while self.accept_op(','):
            args.append(self.term())
        self.expect_op(')')
        return Atom(name, tuple(args))

    def term(self):
        t = self.peek()
        if t is None:
            self.error('expected a term')
        self.pos += 1
        if t.kind == 'tvar':
            return Variable(t.text[1:], template=True)
        if t.kind == 'quoted':
            inner = t.text[1:-1]
            if not inner:
                self.error('empty quoted constant', t)
            return Constant(inner)
        if t.kind == 'ident':
            if t.text[0].islower():
                return Variable(t.text)
            return Constant(t.text)
        self.error('expected a term, found %r' % t.text, t)


def parse_formula(text, line=1, source=None):
    """Parse formula text into an AST; raises :class:`ParseError` with line/column."""
    return _Parser(text, line, source).parse()


def parse_atom(text, line=1, source=None):
    f = parse_formula(text, line, source)
    if not isinstance(f, Atom):
        raise ParseError('expected a single atom, got %s' % f, line, 1, source)
    return f


# evaluation ---------------------------------------------------------------

class EvaluationError(ValueError):
    pass


def _lookup(atom, world):
    try:
        return world[atom]
    except KeyError:
        if not atom.is_ground:
            raise EvaluationError('cannot evaluate non-ground atom %s' % atom) from None
        raise EvaluationError('no truth value for %s' % atom) from None


def fuzzy_eval(f, world):
    """Fuzzy truth of a ground formula: min for ^, max for v, 1-x for !.

    Implications are read as !a v b and biconditionals as the conjunction of
    both implications, so the result coincides with classical truth on 0/1
    inputs.
    """
    if isinstance(f, Atom):
        return float(_lookup(f, world))
    if isinstance(f, And):
        return min(fuzzy_eval(f.left, world), fuzzy_eval(f.right, world))
    if isinstance(f, Or):
        return max(fuzzy_eval(f.left, world), fuzzy_eval(f.right, world))
    if isinstance(f, Not):
        return 1.0 - fuzzy_eval(f.operand, world)
    if isinstance(f, Implies):
        return max(1.0 - fuzzy_eval(f.left, world), fuzzy_eval(f.right, world))
    if isinstance(f, Iff):
        a = fuzzy_eval(f.left, world)
        b = fuzzy_eval(f.right, world)
        return min(max(1.0 - a, b), max(1.0 - b, a))
    if isinstance(f, NotEquals):
        return _not_equals(f)
    raise TypeError('not a formula: %r' % (f,))


def _not_equals(f):
    if not (f.left.is_ground and f.right.is_ground):
        raise EvaluationError('cannot evaluate non-ground constraint %s' % f)
    return 1.0 if f.left.name != f.right.name else 0.0


def binary_eval(f, world):
    """Classical truth (0 or 1) of a ground formula over a binary world."""
    if isinstance(f, Atom):
        v = _lookup(f, world)
        if v not in (0, 1):
            raise EvaluationError('non-binary truth value %r for %s' % (v, f))
        return int(v)
    if isinstance(f, And):
        return int(binary_eval(f.left, world) and binary_eval(f.right, world))
    if isinstance(f, Or):
        return int(binary_eval(f.left, world) or binary_eval(f.right, world))
    if isinstance(f, Not):
        return 1 - binary_eval(f.operand, world)
    if isinstance(f, Implies):
        return int((not binary_eval(f.left, world)) or binary_eval(f.right, world))
    if isinstance(f, Iff):
        return int(binary_eval(f.left, world) == binary_eval(f.right, world))
    if isinstance(f, NotEquals):
        return int(_not_equals(f))
    raise TypeError('not a formula: %r' % (f,))


def conjunction_literals(f):
    """Flatten a conjunction of literals into ``[(node, positive)]``.

    Literals are atoms and inequality constraints, possibly negated. Returns
    None if ``f`` is not a pure conjunction of literals.
    """
    out = []
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, And):
            stack.append(g.right)
            stack.append(g.left)
        elif isinstance(g, (Atom, NotEquals)):
            out.append((g, True))
        elif isinstance(g, Not) and isinstance(g.operand, (Atom, NotEquals)):
            out.append((g.operand, False))
        else:
            return None
    return out
