"""Command-line interface: ``fuzzymln {sim,ground,infer,learn,eval}``.

Exit codes: 0 on success, 1 on computational failure, 2 on bad input.
"""
import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import FuzzyMLNError, UnknownConcept
from .evaluation import (KS, SplitSpec, data_path, generate_corpus, read_corpus, read_frames,
                         run_experiment, write_corpus)
from .evidence import read_db
from .grounding import DEFAULT_CAP, FOL, FUZZY, dump_mrf, ground
from .inference import (candidate_atoms, exact_marginals, gibbs_marginals, map_state, resolve_targets,
                        sense_posterior, spread_posterior, to_dot)
from .learning import TrainConfig, train
from .model import collect_domains, expand_templates, read_mln
from .taxonomy import read_similarities, read_taxonomy

log = logging.getLogger('fuzzymln')


def _csv(text):
    return [t.strip() for t in text.split(',') if t.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog='fuzzymln', description='Fuzzy Markov logic networks over concept taxonomies.')
    p.add_argument('--version', action='version', version='%(prog)s ' + __version__)
    sub = p.add_subparsers(dest='command', required=True)

    s = sub.add_parser('sim', help='Wu-Palmer similarity of two concepts')
    s.add_argument('taxonomy')
    s.add_argument('c1')
    s.add_argument('c2')

    def model_args(sp, db_required=True):
        sp.add_argument('mln', help='MLN file')
        if db_required:
            sp.add_argument('db', help='evidence database')
        sp.add_argument('taxonomy', help='taxonomy file (child parent per line)')
        sp.add_argument('--mode', choices=(FUZZY, FOL), default=FUZZY)
        sp.add_argument('--sims', help='file of "concept concept value" lines overriding similarities')
        sp.add_argument('--cw', type=_csv, default=[], metavar='PRED,...',
                        help='predicates whose unasserted atoms are false')
        sp.add_argument('--cap', type=int, default=DEFAULT_CAP, help='enumeration cap on free atoms')

    g = sub.add_parser('ground', help='build the ground MRF and summarize or dump it')
    model_args(g)
    g.add_argument('--dump-mrf', action='store_true', help='print one ground formula per line')

    i = sub.add_parser('infer', help='marginal probabilities of query atoms')
    model_args(i)
    i.add_argument('query', nargs='*', help='query atoms, e.g. "flies(Fred)" or "instance_of(W1,s)"')
    i.add_argument('--method', choices=('exact', 'gibbs'), default='exact')
    i.add_argument('--samples', type=int, default=50000)
    i.add_argument('--burn-in', type=int, default=5000)
    i.add_argument('--seed', type=int, default=0)
    i.add_argument('--format', choices=('json', 'tsv'), default='json')
    i.add_argument('--map', action='store_true', help='also report the MAP state')
    i.add_argument('--dot', metavar='FILE', help='write a taxonomy heatmap of the sense posterior')
    i.add_argument('--spread', metavar='WORD',
                   help='experimental: posterior of WORD over every taxonomy node (used for --dot)')
    i.add_argument('-o', '--output', help='write the result here instead of stdout')

    l = sub.add_parser('learn', help='fit formula weights on training databases')
    l.add_argument('mln')
    l.add_argument('dbs', nargs='+')
    l.add_argument('taxonomy')
    l.add_argument('--mode', choices=(FUZZY, FOL), default=FUZZY)
    l.add_argument('--sims')
    l.add_argument('--cap', type=int, default=DEFAULT_CAP)
    l.add_argument('--rate', type=float, default=1.0)
    l.add_argument('--decay', type=float, default=0.5)
    l.add_argument('--max-iter', type=int, default=500)
    l.add_argument('--tol', type=float, default=1e-5)
    l.add_argument('--sigma2', type=float, default=100.0)
    l.add_argument('-o', '--output', help='fitted MLN file (default stdout)')
    l.add_argument('--log', help='training log TSV')

    e = sub.add_parser('eval', help='inverse k-fold WSD experiment, FOL vs fuzzy')
    e.add_argument('--corpus', help='JSONL corpus (default: generate the synthetic corpus)')
    e.add_argument('--taxonomy', default=None, help='taxonomy (default: bundled kitchen taxonomy)')
    e.add_argument('--template', default=None, help='template MLN (default: bundled role template)')
    e.add_argument('--frames', default=None, help='verb frames for corpus generation')
    e.add_argument('--k', type=_csv, default=[SplitSpec(*k).label for k in KS], metavar='A/B,...')
    e.add_argument('--modes', type=_csv, default=[FOL, FUZZY])
    e.add_argument('--verbs', type=_csv, default=None)
    e.add_argument('--seed', type=int, default=0)
    e.add_argument('--per-verb', type=int, default=20)
    e.add_argument('--jobs', type=int, default=1)
    e.add_argument('--sigma2', type=float, default=100.0)
    e.add_argument('--max-iter', type=int, default=500)
    e.add_argument('--write-corpus', metavar='FILE', help='save the corpus used')
    e.add_argument('--folds', metavar='FILE', help='per-fold detail TSV')
    e.add_argument('-o', '--output', help='table TSV (default stdout)')
    return p


def _similarities(args):
    tax = read_taxonomy(args.taxonomy)
    if args.sims:
        return tax, read_similarities(args.sims, fallback=tax)
    return tax, tax


def _load(args):
    tax, sims = _similarities(args)
    mln = read_mln(args.mln)
    db = read_db(args.db, mln)
    m = expand_templates(collect_domains(mln, [db]))
    return m, db, tax, sims


def _write(text, path):
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_sim(args):
    tax = read_taxonomy(args.taxonomy)
    cs = []
    for c in (args.c1, args.c2):
        r = tax.resolve(c)
        if r is None:
            raise UnknownConcept(c)
        cs.append(r)
    print(repr(tax.similarity(*cs)))


def cmd_ground(args):
    m, db, _, sims = _load(args)
    g = ground(m, db, sims, args.mode, args.cw)
    if args.dump_mrf:
        _write('\n'.join(dump_mrf(g)) + '\n', None)
    else:
        print('%d ground atoms (%d free, %d relevant), %d ground formulas, %d patterns'
              % (len(g.atoms), g.n_free, len(g.relevant), len(g.ground_formulas), len(g.patterns)))


def cmd_infer(args):
    m, db, tax, sims = _load(args)
    g = ground(m, db, sims, args.mode, args.cw)
    targets = args.query or None
    if args.method == 'exact':
        res = exact_marginals(g, targets, cap=args.cap)
    else:
        res = gibbs_marginals(g, targets, args.samples, args.burn_in, args.seed)
    doc = res.to_dict()
    doc['mode'] = args.mode
    if args.method == 'exact':
        doc['seed'] = args.seed
    if args.map:
        world = map_state(g, cap=args.cap, seed=args.seed)
        doc['map'] = {str(a): world[a] for a in g.free_atoms}
    probs = None
    if args.spread:
        probs = spread_posterior(m, db, sims, args.spread, concepts=list(tax), mode=args.mode,
                                 closed_world=args.cw, cap=args.cap)
        doc['spread'] = {'word': args.spread, 'posterior': probs}
    elif args.dot:
        words = sorted({a.args[0].name for a in resolve_targets(g, targets)
                        if a.predicate == 'instance_of'})
        probs = {}
        for w in words:
            full = exact_marginals(g, candidate_atoms(g, w), cap=args.cap) if args.method == 'exact' else res
            for s, p in sense_posterior(g, w, marginals=full):
                probs[s] = probs.get(s, 0.0) + p / len(words)
    if args.dot:
        with open(args.dot, 'w', encoding='utf-8') as f:
            f.write(to_dot(tax, probs or {}, title=' '.join(args.query)))
    if args.format == 'json':
        _write(json.dumps(doc, indent=2) + '\n', args.output)
    else:
        text = res.to_tsv()
        if args.map:
            text += ''.join('map\t%s\t%d\n' % (a, v) for a, v in doc['map'].items())
        _write(text, args.output)


def cmd_learn(args):
    tax, sims = _similarities(args)
    mln = read_mln(args.mln)
    dbs = [read_db(p, mln) for p in args.dbs]
    cfg = TrainConfig(args.rate, args.decay, args.max_iter, args.tol, args.sigma2, args.cap)
    m = expand_templates(collect_domains(mln, dbs))
    res = train(m, dbs, sims, cfg, mode=args.mode)
    if not res.converged:
        log.warning('stopped after %d iterations without reaching tolerance %g', len(res.trace) - 1, args.tol)
    _write(res.mln.to_text(), args.output)
    if args.log:
        with open(args.log, 'w', encoding='utf-8') as f:
            f.write(res.log_tsv())


def cmd_eval(args):
    tax = read_taxonomy(args.taxonomy or data_path('kitchen.tax'))
    template = read_mln(args.template or data_path('wsd_roles.mln'))
    for mode in args.modes:
        if mode not in (FOL, FUZZY):
            raise ArgumentError('unknown mode %r' % mode)
    ks = []
    for k in args.k:
        try:
            ks.append(SplitSpec.parse(k).label)
        except ValueError as e:
            raise ArgumentError('bad split %r: %s' % (k, e)) from None
    if args.corpus:
        corpus = read_corpus(args.corpus, tax)
    else:
        corpus = generate_corpus(tax, read_frames(args.frames), args.seed, args.per_verb)
    if args.write_corpus:
        write_corpus(corpus, args.write_corpus)
    cfg = TrainConfig(max_iter=args.max_iter, sigma2=args.sigma2)
    res = run_experiment(corpus, tax, template, ks, tuple(args.modes), args.seed, cfg, args.jobs, args.verbs)
    _write(res.to_tsv(), args.output)
    if args.folds:
        with open(args.folds, 'w', encoding='utf-8') as f:
            f.write(res.folds_tsv())


class ArgumentError(FuzzyMLNError):
    exit_code = 2


COMMANDS = {'sim': cmd_sim, 'ground': cmd_ground, 'infer': cmd_infer, 'learn': cmd_learn, 'eval': cmd_eval}


def main(argv=None):
    level = os.environ.get('FUZZYMLN_LOG', 'WARNING').upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format='%(levelname)s %(name)s: %(message)s')
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # query atoms may follow the options of infer
    if extra and args.command == 'infer' and not any(e.startswith('-') for e in extra):
        args.query = list(args.query) + extra
    elif extra:
        parser.error('unrecognized arguments: %s' % ' '.join(extra))
    try:
        COMMANDS[args.command](args)
    except FuzzyMLNError as e:
        print('fuzzymln: error: %s' % e, file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print('fuzzymln: error: %s' % e, file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
