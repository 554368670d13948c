"""Maximum-likelihood weight learning with exact expectations.

Every training database is one fully observed world under the closed-world
assumption. Its partition function ranges over all binary atoms of its
grounding, with is-a atoms pinned as in inference. The objective is

    LL(w) = sum_db [score(x_db) - log Z_db(w)] - |w|^2 / (2 sigma^2)

and is maximized by gradient ascent with an Armijo backtracking line search.
Each search starts from a Barzilai-Borwein step length, which copes with the
poor conditioning that weak-prior directions cause.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import LearningError
from .evidence import close_world
from .grounding import DEFAULT_CAP, FUZZY, ground

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_BACKTRACK = 60
MIN_STEP, MAX_STEP = 1e-10, 1e10
DIVERGENCE_GRAD = 1e-3
_CACHE_WORLDS = 1 << 16


@dataclass(frozen=True)
class TrainConfig:
    rate: float = 1.0        # initial step length
    decay: float = 0.5       # step shrink factor during backtracking
    max_iter: int = 500
    tol: float = 1e-5        # stop when the gradient's max-norm falls below this
    sigma2: float = 100.0    # Gaussian prior variance
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError('rate must be positive')
        if not 0 < self.decay < 1:
            raise ValueError('decay must lie in (0, 1)')
        if self.max_iter < 1:
            raise ValueError('max_iter must be at least 1')
        if not self.sigma2 > 0:
            raise ValueError('sigma2 must be positive')


@dataclass
class TrainResult:
    mln: object
    weights: np.ndarray
    trace: list = field(default_factory=list)  # (iteration, LL, grad max-norm, step)
    converged: bool = False

    @property
    def log_likelihood(self):
        return self.trace[-1][1]

    def log_tsv(self):
        lines = ['iteration\tll\tgrad_norm\tstep']
        lines += ['%d\t%.12g\t%.6g\t%.6g' % row for row in self.trace]
        return '\n'.join(lines) + '\n'


class Objective:
    """The penalized log-likelihood of an expanded MLN over training databases."""

    def __init__(self, mln, dbs, taxonomy, mode=FUZZY, sigma2=100.0, cap=DEFAULT_CAP):
        self.mln = mln
        self.sigma2 = float(sigma2)
        self.soft = ~np.isinf(mln.weights)
        self.n = len(mln.formulas)
        self.const = 0.0
        blocks, coefs, obs, segments = [], [], [], [0]
        self.streams = []
        for db in dbs:
            g = ground(mln, db, taxonomy, mode, evidence=False)
            world = close_world(db, g.atoms)
            x = g.assignment({a: world[a] for a in g.free_atoms})
            m_obs = g.match(x[None, :])[0]
            if len(g.hard_patterns) and m_obs[g.hard_patterns].any():
                raise LearningError('training world violates a hard formula')
            self.const += g.n_isolated * math.log(2.0)
            if len(g.relevant) > cap:
                from .errors import CapExceeded
                raise CapExceeded(len(g.relevant), cap)
            if (1 << len(g.relevant)) > _CACHE_WORLDS:
                self.streams.append((g, m_obs))
                continue
            M = np.concatenate([g.match(X) for X in g.iter_worlds(cap)])
            if len(g.hard_patterns):
                M = M[~M[:, g.hard_patterns].any(axis=1)]
            blocks.append(sparse.csr_matrix(M))
            coefs.append(g.coef)
            obs.append(m_obs)
            segments.append(segments[-1] + M.shape[0])
        if blocks:
            self.M = sparse.block_diag(blocks, format='csr')
            self.MT = self.M.T.tocsr()
            self.C = sparse.vstack(coefs, format='csr')
            self.CT = self.C.T.tocsr()
            self.obs = np.concatenate(obs)
            self.starts = np.array(segments[:-1])
            self.seg_len = np.diff(segments)
        else:
            self.M = None
        self.n_dbs = len(dbs)

    def _weights(self, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n,):
            raise LearningError('expected %d weights, got shape %s' % (self.n, w.shape))
        return np.where(self.soft, w, 0.0)

    def __call__(self, w, grad=True):
        """(LL, gradient) at w; gradient is None when ``grad`` is False."""
        w = self._weights(w)
        ll = -self.const - float(w.dot(w)) / (2 * self.sigma2)
        g = -w / self.sigma2 if grad else None
        if self.M is not None:
            u = self.C.dot(w)
            s = self.M.dot(u)
            mx = np.maximum.reduceat(s, self.starts)
            e = np.exp(s - np.repeat(mx, self.seg_len))
            tot = np.add.reduceat(e, self.starts)
            ll += float(self.obs.dot(u)) - float(np.sum(mx + np.log(tot)))
            if grad:
                p = e / np.repeat(tot, self.seg_len)
                g += self.CT.dot(self.obs - self.MT.dot(p))
        for gr, m_obs in self.streams:
            u = gr.coef.dot(w)
            lz, expected = _stream_moments(gr, u)
            ll += float(m_obs.dot(u)) - lz
            if grad:
                g += gr.coef.T.dot(m_obs - expected)
        if grad:
            g = np.where(self.soft, g, 0.0)
        return ll, g


def _stream_moments(g, u):
    parts, sums, maxes = [], [], []
    for X in g.iter_worlds(len(g.relevant)):
        M = g.match(X)
        s = M.dot(u)
        if len(g.hard_patterns):
            s[M[:, g.hard_patterns].any(axis=1)] = -np.inf
        m = np.max(s)
        e = np.exp(s - m) if m > -np.inf else np.zeros_like(s)
        parts.append(e.sum())
        sums.append(e.dot(M))
        maxes.append(m)
    top = max(maxes)
    scale = np.exp(np.array(maxes) - top)
    z = float(np.dot(scale, parts))
    return top + math.log(z), np.dot(scale, np.array(sums)) / z


def log_likelihood(mln, dbs, taxonomy, mode=FUZZY, sigma2=100.0, cap=DEFAULT_CAP, weights=None):
    obj = Objective(mln, dbs, taxonomy, mode, sigma2, cap)
    return obj(mln.weights if weights is None else weights, grad=False)[0]


def gradient(mln, dbs, taxonomy, mode=FUZZY, sigma2=100.0, cap=DEFAULT_CAP, weights=None):
    obj = Objective(mln, dbs, taxonomy, mode, sigma2, cap)
    return obj(mln.weights if weights is None else weights)[1]


def train(mln, dbs, taxonomy, cfg=None, mode=FUZZY, init=None, objective=None):
    """Fit the soft formula weights; returns a :class:`TrainResult`.

    Starts from zero weights unless ``init`` is given. Each accepted step
    satisfies the Armijo condition, so the likelihood trace never decreases.
    """
    cfg = cfg or TrainConfig()
    obj = objective or Objective(mln, dbs, taxonomy, mode, cfg.sigma2, cfg.cap)
    w = np.zeros(obj.n) if init is None else obj._weights(init).copy()
    f, g = obj(w)
    norm = float(np.max(np.abs(g), initial=0.0))
    trace = [(0, f, norm, 0.0)]
    step = cfg.rate
    converged = norm <= cfg.tol
    for it in range(1, cfg.max_iter + 1):
        if converged:
            break
        gg = float(g.dot(g))
        t = min(max(step, MIN_STEP), MAX_STEP)
        for _ in range(MAX_BACKTRACK):
            w_new = w + t * g
            f_new, g_new = obj(w_new)
            if f_new >= f + ARMIJO_C * t * gg:
                break
            t *= cfg.decay
        else:
            if norm > DIVERGENCE_GRAD:
                raise LearningError('line search failed at iteration %d (gradient norm %.3g)' % (it, norm))
            log.info('line search exhausted at gradient norm %.3g; stopping', norm)
            break
        s_vec, y_vec = w_new - w, g_new - g
        w, f, g = w_new, f_new, g_new
        norm = float(np.max(np.abs(g), initial=0.0))
        trace.append((it, f, norm, t))
        # BB1 step for ascent: |s|^2 / -(s . y); fall back to doubling under non-negative curvature
        sy = -float(s_vec.dot(y_vec))
        step = float(s_vec.dot(s_vec)) / sy if sy > 0 else 2 * t
        converged = norm <= cfg.tol
    log.debug('training stopped after %d iterations, LL %.6f, |grad| %.3g', len(trace) - 1, f, norm)
    weights = np.where(obj.soft, w, mln.weights)
    return TrainResult(mln.with_weights(weights), weights, trace, converged)
