'''
Bodies of the ``deepbf`` subcommands.

Each command takes the parsed arguments, reads its inputs, and writes its
outputs atomically with a provenance comment row. Random streams are keyed
by the run seed and a per-command stream id, so commands never share draws.
'''

import numpy as np
import pandas as pd
from dataclasses import replace
from . import __version__
from .config import RunConfig, load_config
from .criticism import criticize
from .errors import ShapeMismatchError, UsageError
from .estimator import (estimate_bf_batch, estimate_log_bf_batch, estimator_from_document, intrinsic_bf,
                        partial_bf, posterior_bf, save_estimator, train)
from .evalkit import AbcEvaluator, EstimatorEvaluator, evaluate, surprise
from .logger import logger
from .models import outlier_dataset, simulate_batch
from .rankabc import abc_estimate_batch
from .report import render_report
from .rngdist import new_stream
from .utility import provenance, read_datasets, read_json, read_provenance, read_table, write_csv, write_json

STREAM_TRAIN = 0
STREAM_SIMULATE = 1
STREAM_ABC = 2
STREAM_EVALUATE = 3
STREAM_CRITICIZE = 4
STREAM_ESTIMATE = 6

def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    overrides = {k : getattr(args, k) for k in ('n', 'direction') if getattr(args, k, None) is not None}
    if 'n' in overrides and overrides['n'] < 1:
        raise UsageError('--n must be positive')
    return replace(cfg, **overrides) if overrides else cfg

def _data_frame(data : np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(data, columns = [f'y{i + 1}' for i in range(data.shape[1])])

def run_simulate(args):
    cfg = _config(args)
    pair = cfg.pair.build()
    model = pair.m1 if args.model == 1 else pair.m2
    rng = new_stream(cfg.seed, STREAM_SIMULATE).substream(args.model)
    data = simulate_batch(model, args.count, cfg.n, rng)
    output = cfg.output_path(args.o)
    write_csv(output, _data_frame(data), provenance(cfg.hash, cfg.seed))
    logger.info(f'Simulated {args.count} datasets of length {cfg.n} from {model.id} into {output}.')

def run_train(args):
    cfg = _config(args)
    pair = cfg.pair.build()
    est = train(pair, cfg.n, cfg.train, new_stream(cfg.seed, STREAM_TRAIN), cfg.direction, cfg.estimate.eps)
    output = cfg.output_path(args.o)
    save_estimator(est, output, cfg.hash)
    logger.info(f'Saved {est} to {output}.')

def _load(path):
    document = read_json(path)
    return estimator_from_document(document), document

def run_estimate(args):
    est, document = _load(args.checkpoint)
    if args.eps is not None:
        est = est.with_eps(args.eps)
    data = read_datasets(args.data)
    if data.ndim != 2 or data.shape[1] != est.n:
        raise ShapeMismatchError(f'{args.data} holds datasets of length {data.shape[-1]}, checkpoint expects {est.n}')
    log_bf = estimate_log_bf_batch(est, data)
    table = pd.DataFrame({'row' : np.arange(len(data)), 'bf' : estimate_bf_batch(est, data), 'log_bf' : log_bf})

    seed = document['seed'] if document['seed'] is not None else 0
    rng = new_stream(seed, STREAM_ESTIMATE)
    if est.pair is not None:
        sign = 1. if est.direction == 1 else -1.
        sims = [sign * estimate_log_bf_batch(est, simulate_batch(model, args.reference_sims, est.n, rng.substream(j)))
                for j, model in enumerate((est.pair.m1, est.pair.m2))]
        tails = [surprise(sign * value, sims[0], sims[1]) for value in log_bf]
        table['p1'] = [t.p1 for t in tails]
        table['p2'] = [t.p2 for t in tails]

    if args.partial is not None:
        sub, _ = _load(args.partial)
        if args.split is not None:
            split = [int(i) for i in args.split.split(',')]
        else:
            split = list(range(sub.n))
        table['pbf'] = [partial_bf(est, sub, y, split) for y in data]
        if sub.n < est.n:
            table['abf'] = [intrinsic_bf(est, sub, y, sub.n, 'arithmetic', args.subset_limit, rng.substream(2 + i))
                            for i, y in enumerate(data)]
            table['gbf'] = [intrinsic_bf(est, sub, y, sub.n, 'geometric', args.subset_limit, rng.substream(2 + i))
                            for i, y in enumerate(data)]
    if args.double is not None:
        if args.reverse is None:
            raise UsageError('--double needs --reverse, a reverse-direction checkpoint over the same length')
        double, _ = _load(args.double)
        reverse, _ = _load(args.reverse)
        if reverse.n != est.n:
            raise ShapeMismatchError(f'--reverse checkpoint expects length {reverse.n}, data have {est.n}')
        table['posterior_bf'] = [posterior_bf(double, reverse, y) for y in data]

    write_csv(args.o, table, provenance(document['config_hash'], seed))
    logger.info(f'Estimated Bayes factors of {len(data)} datasets into {args.o}.')

def run_abc(args):
    cfg = _config(args)
    pair = cfg.pair.build()
    queries = read_datasets(args.data)
    results = abc_estimate_batch(pair, queries, cfg.abc, new_stream(cfg.seed, STREAM_ABC))
    table = pd.DataFrame({
        'query' : np.arange(len(results)),
        'estimate' : [r.estimate for r in results],
        'n1' : [r.n1 for r in results],
        'n2' : [r.n2 for r in results],
        'exact' : [r.exact for r in results],
    })
    output = cfg.output_path(args.o)
    write_csv(output, table, provenance(cfg.hash, cfg.seed))
    logger.info(f'ABC estimates of {len(results)} queries written into {output}.')

def run_evaluate(args):
    cfg = _config(args)
    pair = cfg.pair.build()
    method = args.method or cfg.eval.method
    if method == 'deepbf':
        if args.checkpoint is None:
            raise UsageError('evaluate --method deepbf needs --checkpoint')
        evaluator = EstimatorEvaluator(_load(args.checkpoint)[0])
    else:
        evaluator = AbcEvaluator(pair, cfg.n, cfg.abc, new_stream(cfg.seed, STREAM_ABC))
    report, samples = evaluate(evaluator, pair, cfg.eval.T0, new_stream(cfg.seed, STREAM_EVALUATE), cfg.seed, method)

    output = cfg.output_path(args.o)
    header = provenance(cfg.hash, cfg.seed)
    write_csv(output / 'metrics.csv', report.to_frame(), header)
    write_csv(output / 'samples.csv', samples.to_frame(), header)
    summary = report.summary()
    summary.update({'config_hash' : cfg.hash, 'version' : __version__})
    write_json(output / 'summary.json', summary)
    logger.info(f'Evaluation of {method} written into {output}.')

def run_criticize(args):
    cfg = _config(args)
    pair = cfg.pair.build()
    which = args.model or cfg.criticize.model
    model = pair.m1 if which == 1 else pair.m2
    if args.outlier:
        y_obs = outlier_dataset(pair.name, cfg.n)
    elif args.data is not None:
        data = read_datasets(args.data)
        if not 0 <= args.row < len(data):
            raise UsageError(f'--row {args.row} is out of range for {len(data)} datasets')
        y_obs = data[args.row]
    else:
        raise UsageError('criticize needs --data or --outlier')
    report = criticize(model, y_obs, cfg.criticize.replicates, new_stream(cfg.seed, STREAM_CRITICIZE), cfg.criticize.level)

    output = cfg.output_path(args.o)
    write_csv(output / 'z.csv', report.to_frame(), provenance(cfg.hash, cfg.seed))
    summary = report.summary()
    summary.update({'config_hash' : cfg.hash, 'seed' : cfg.seed, 'version' : __version__, 'model' : model.id})
    write_json(output / 'summary.json', summary)

def run_report(args):
    samples = read_table(args.samples)
    missing = {'model', 'true_log_bf', 'est_log_bf'} - set(samples.columns)
    if missing:
        raise UsageError(f'{args.samples} is not an evaluation samples file (missing {sorted(missing)})')
    paths = render_report(samples, args.o, read_provenance(args.samples))
    logger.info(f'Rendered {", ".join(str(p) for p in paths)}.')

COMMANDS = {
    'simulate' : run_simulate,
    'train' : run_train,
    'estimate' : run_estimate,
    'abc' : run_abc,
    'evaluate' : run_evaluate,
    'criticize' : run_criticize,
    'report' : run_report,
}
