"""Fuzzy Markov logic networks: MLNs whose is-a atoms take taxonomy similarities as truth values."""
from .errors import (CapExceeded, EvidenceError, FuzzyMLNError, GroundingError, InferenceError, InputError,
                     LearningError, ModelError, ParseError, TaxonomyError, UnknownConcept)
from .evidence import Database, close_world, make_database, parse_db, read_db
from .grounding import FOL, FUZZY, GroundAtom, GroundFormula, GroundMRF, ground, log_partition, world_score
from .inference import (GibbsSampler, MarginalResult, exact_marginals, gibbs_marginals, map_state,
                        sense_posterior, spread_posterior, to_dot)
from .learning import TrainConfig, TrainResult, gradient, log_likelihood, train
from .logic import (And, Atom, Constant, Iff, Implies, Not, NotEquals, Or, Variable, binary_eval, fuzzy_eval,
                    parse_atom, parse_formula)
from .model import HARD, MLN, PredicateDecl, WeightedFormula, collect_domains, expand_templates, parse_mln, read_mln
from .taxonomy import SimilarityTable, Taxonomy, load_taxonomy, read_similarities, read_taxonomy

__version__ = '0.1.0'
