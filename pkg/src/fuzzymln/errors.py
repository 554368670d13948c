"""Exception hierarchy.

Input errors (bad files, unknown symbols) map to CLI exit code 2,
computational failures (cap exceeded, divergence) to exit code 1.
"""


class FuzzyMLNError(Exception):
    exit_code = 1


class InputError(FuzzyMLNError):
    exit_code = 2


class ParseError(InputError):

    def __init__(self, msg, line=None, col=None, source=None):
        self.msg = msg
        self.line = line
        self.col = col
        self.source = source
        loc = ''
        if source is not None:
            loc += str(source)
        if line is not None:
            loc += '%s%d' % (':' if loc else 'line ', line)
            if col is not None:
                loc += ':%d' % col
        super().__init__('%s: %s' % (loc, msg) if loc else msg)


class TaxonomyError(InputError):
    pass


class UnknownConcept(TaxonomyError, KeyError):

    def __init__(self, concept):
        self.concept = concept
        super().__init__('unknown concept: %s' % concept)

    def __str__(self):
        return self.args[0]


class ModelError(InputError):
    pass


class EvidenceError(InputError):
    pass


class GroundingError(InputError):
    pass


class EvaluationError(FuzzyMLNError):
    pass


class CapExceeded(FuzzyMLNError):

    def __init__(self, n, cap):
        self.n = n
        self.cap = cap
        super().__init__('%d free atoms exceed the enumeration cap of %d; '
                         'use sampling instead' % (n, cap))


class InferenceError(FuzzyMLNError):
    pass


class LearningError(FuzzyMLNError):
    pass
