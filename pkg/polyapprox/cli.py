"""
Command line front end.

    python run.py fit --region disk.json --m 6 --seed 7 --out model.json --history history.csv
    python run.py fit --config run.json
    python run.py eval --model model.json --region disk.json --dirs 1000 --seed 3
    python run.py bench hypersphere --dims 2,5,10 --out bench.csv --strict
    python run.py validate model.json

Reports go to standard output as JSON, diagnostics to standard error. Exit codes:
0 success, 1 a benchmark case failed under --strict, 2 runtime failure, 64 usage error.
"""
import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

import numpy as np

from config import Config
from polyapprox.exceptions import PolyApproxError, TrainingAborted, UsageError
from polyapprox.models import MlpParams, TrainConfig
from polyapprox.region_types import LinearLiftedRegion
from polyapprox.services import (
    benchmark_service, error_service, paramnet_service, region_service, serialization_service,
    training_service,
)

logger = logging.getLogger(__name__)

DEFAULT_BENCH_DIMS = {'hypercube': '1,2,3,5', 'hypersphere': '2,5,10'}


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; usage errors here exit with 64."""

    def error(self, message):
        raise UsageError(message)


def _floats(text: Optional[str], what: str) -> Optional[np.ndarray]:
    if text is None:
        return None
    try:
        return np.array([float(t) for t in text.split(',') if t.strip()])
    except ValueError:
        raise UsageError(f"{what} must be a comma separated list of numbers, got '{text}'")


def _ints(text: str, what: str) -> List[int]:
    try:
        values = [int(t) for t in text.split(',') if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma separated list of integers, got '{text}'")
    if not values or any(v < 1 for v in values):
        raise UsageError(f"{what} must list positive integers")
    return values


def _override(config: TrainConfig, args) -> TrainConfig:
    """Applies the training flags given on the command line over `config`."""
    changes = {}
    if getattr(args, 'm', None) is not None:
        changes['M'] = args.m
    if getattr(args, 'seed', None) is not None:
        changes['seed'] = args.seed
    if getattr(args, 'lambda_schedule', None):
        changes['phases'] = serialization_service.parse_lambda_schedule(args.lambda_schedule)
    if getattr(args, 'workers', None) is not None:
        changes['workers'] = args.workers
    return replace(config, **changes) if changes else config


def _print(doc):
    sys.stdout.write(serialization_service.dumps(doc) + '\n')
    sys.stdout.flush()


# fit

def _fit_request(args):
    """Resolves flags and the optional run document into one request, validating inputs."""
    if args.config:
        run = serialization_service.read_run_config(args.config)
        region_path, out = args.region or run.region, args.out or run.out
        history, eval_history = args.history or run.history, args.eval_history or run.eval_history
        mode, theta, box, train = run.mode, run.theta, run.theta_box, run.train
    else:
        if not args.region or not args.out:
            raise UsageError("fit needs --region and --out (or --config)")
        region_path, out, history, eval_history = args.region, args.out, args.history, args.eval_history
        mode, theta, box, train = 'fixed', None, None, TrainConfig()
    if args.parameterized:
        mode = 'parameterized'
    if args.theta is not None:
        theta = args.theta
    region = region_service.load_region(region_path)
    train = _override(train, args)
    if mode == 'parameterized':
        box = box or region.theta_box
        if box is None:
            raise UsageError("Parameterized fit needs a theta_box in the run document or region")
    if isinstance(theta, str):
        theta = _floats(theta, '--theta')
    return region, out, history, eval_history, mode, theta, box, train


def _write_fit_outputs(out, history_path, eval_path, model, history):
    P, mlp = model
    serialization_service.write_model(out, P, mlp)
    if history is not None:
        if history_path:
            serialization_service.write_history_csv(history_path, history)
        if eval_path:
            serialization_service.write_eval_csv(eval_path, history)


def _as_model(result, box_center=None):
    """(Polytope, MlpParams or None) for a fixed polytope or a trained network."""
    if isinstance(result, MlpParams):
        return paramnet_service.emit(result, box_center), result
    return result, None


def cmd_fit(args) -> int:
    region, out, history_path, eval_path, mode, theta, box, train = _fit_request(args)
    logger.info(f"fit: {region.kind} region, mode={mode}, output {out}")
    try:
        if mode == 'parameterized':
            net, history = paramnet_service.fit_parameterized(region, box, train)
            model = _as_model(net, box.center)
        else:
            P, history = training_service.fit(region, theta, train)
            model = _as_model(P)
    except TrainingAborted as e:
        logger.error(f"{e}; writing the last good parameters to {out}")
        if e.last_good is not None:
            _write_fit_outputs(out, history_path, eval_path,
                               _as_model(e.last_good, box.center if box is not None else None), e.history)
        return Config.EXIT_RUNTIME

    _write_fit_outputs(out, history_path, eval_path, model, history)
    summary = {
        'status': 'converged' if history.converged else 'schedule_complete',
        'iterations': history.last_iter,
        'n': model[0].n,
        'M': model[0].M,
        'mode': mode,
    }
    if history.evals:
        summary['last_eval'] = history.evals[-1].estimate.report()
    _print(summary)
    return Config.EXIT_OK


# eval

def cmd_eval(args) -> int:
    P, mlp = serialization_service.read_model(args.model)
    region = region_service.load_region(args.region)
    theta = _floats(args.theta, '--theta')
    if P.n != region.dim:
        raise UsageError(f"Model dimension {P.n} differs from region dimension {region.dim}")
    if mlp is not None:
        theta = mlp.theta_box.center if theta is None else theta
        P = paramnet_service.emit(mlp, theta)
        theta = theta if region.theta_dim else None
    elif theta is None and region.theta_dim:
        theta = region.default_theta()
    estimate = error_service.estimate_errors(P, region, theta, args.dirs, args.seed, args.workers)
    _print(estimate.report())
    return Config.EXIT_OK


# bench

def _bench_config(args, suite: str) -> TrainConfig:
    config = benchmark_service.default_config(suite, seed=args.seed or 0)
    if args.config:
        config = serialization_service.train_config_from_doc(
            serialization_service.read_json(args.config, 'run configuration'), base=config)
    return _override(config, args)


def _snapshot_path(out: str, case: str) -> str:
    stem, _ = os.path.splitext(out)
    return f'{stem}_{case}_snapshots.csv'


def cmd_bench(args) -> int:
    suite = args.suite
    if suite not in benchmark_service.SUITES:
        raise UsageError(f"Unknown suite '{suite}'. Known suites: {', '.join(benchmark_service.SUITES)}")
    if args.m is not None:
        raise UsageError("bench suites fix M per case; --m is not accepted")
    config = _bench_config(args, suite)
    out = args.out or f'bench_{suite}.csv'
    extra = {}

    if suite == 'hypercube':
        reports = benchmark_service.run_hypercube_suite(
            _ints(args.dims or DEFAULT_BENCH_DIMS[suite], '--dims'), config)
    elif suite == 'hypersphere':
        reports = benchmark_service.run_hypersphere_suite(
            _ints(args.dims or DEFAULT_BENCH_DIMS[suite], '--dims'), config)
    elif suite == 'shapes2d':
        reports, snapshots = benchmark_service.run_2d_suite(config, args.snapshot_every)
        for case, frames in snapshots.items():
            path = _snapshot_path(out, case)
            serialization_service.write_snapshot_csv(path, frames)
            extra.setdefault('snapshots', {})[case] = path
    else:
        report, stats = benchmark_service.run_aggregation_demo(args.resources, args.horizon, config,
                                                               n_samples=args.samples)
        reports = [report]
        extra['disaggregation'] = stats

    serialization_service.write_bench_csv(out, reports, timing=args.timing)
    failed = [r.case for r in reports if not r.passed]
    _print(dict({
        'suite': suite,
        'out': out,
        'cases': [{'case': r.case, 'converged_error': r.converged_error, 'passed': r.passed} for r in reports],
        'failed': failed,
    }, **extra))
    if failed:
        logger.warning(f"Cases below their acceptance threshold: {', '.join(failed)}")
        if args.strict:
            return Config.EXIT_THRESHOLD
    return Config.EXIT_OK


# validate

def cmd_validate(args) -> int:
    """Loads a region or model document and writes it back canonically."""
    data = serialization_service.read_json(args.path, 'document')
    kind = args.kind
    if kind == 'auto':
        kind = 'region' if isinstance(data, dict) and 'type' in data else 'model'
    if kind == 'region':
        doc = region_service.parse_region(data).to_spec_data()
    else:
        P, mlp = serialization_service.model_from_doc(data)
        if args.as_region:
            if mlp is not None:
                raise UsageError("--as-region needs a fixed (non-parameterized) model")
            raw = P.to_raw()
            doc = LinearLiftedRegion.from_polytope(raw.A, raw.b).to_spec_data()
        else:
            doc = serialization_service.model_to_doc(P, mlp)
    text = serialization_service.dumps(doc) + '\n'
    if args.out:
        serialization_service.write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return Config.EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='polyapprox', description='Learn polytopic approximations of feasible regions.')
    sub = parser.add_subparsers(dest='command', parser_class=ArgumentParser)
    sub.required = True

    def training_flags(p):
        p.add_argument('--config', help='run configuration document (JSON)')
        p.add_argument('--m', type=int, help='number of hyperplanes')
        p.add_argument('--seed', type=int, help='seed of every random draw')
        p.add_argument('--lambda-schedule', help="phases as 'lambda:iters,lambda:iters,...'")
        p.add_argument('--workers', type=int, help='threads for oracle calls')

    fit = sub.add_parser('fit', help='train a polytope against a region')
    training_flags(fit)
    fit.add_argument('--region', help='region document')
    fit.add_argument('--out', help='model document to write')
    fit.add_argument('--history', help='per-iteration history CSV')
    fit.add_argument('--eval-history', help='evaluation history CSV')
    fit.add_argument('--theta', help='fixed theta for a parameterized region, comma separated')
    fit.add_argument('--parameterized', action='store_true', help='train the A/b networks over the theta box')
    fit.set_defaults(handler=cmd_fit)

    ev = sub.add_parser('eval', help='estimate the errors of a model against a region')
    ev.add_argument('--model', required=True)
    ev.add_argument('--region', required=True)
    ev.add_argument('--dirs', type=int, default=1000)
    ev.add_argument('--seed', type=int, default=0)
    ev.add_argument('--theta')
    ev.add_argument('--workers', type=int, default=1)
    ev.set_defaults(handler=cmd_eval)

    bench = sub.add_parser('bench', help='run a benchmark suite')
    bench.add_argument('suite', help=', '.join(benchmark_service.SUITES))
    training_flags(bench)
    bench.add_argument('--dims', help='dimensions, comma separated (hypercube, hypersphere)')
    bench.add_argument('--out', help='benchmark CSV to write')
    bench.add_argument('--strict', action='store_true', help='exit 1 if a case misses its threshold')
    bench.add_argument('--timing', action='store_true', help='add a wall_time column')
    bench.add_argument('--snapshot-every', type=int, default=50)
    bench.add_argument('--resources', type=int, default=20)
    bench.add_argument('--horizon', type=int, default=6)
    bench.add_argument('--samples', type=int, default=200)
    bench.set_defaults(handler=cmd_bench)

    val = sub.add_parser('validate', help='re-emit a region or model document canonically')
    val.add_argument('path')
    val.add_argument('--kind', choices=['auto', 'region', 'model'], default='auto')
    val.add_argument('--as-region', action='store_true', help='emit a fixed model as a linear_lifted region')
    val.add_argument('--out')
    val.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=Config.LOG_LEVEL, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except UsageError as e:
        logger.error(str(e))
        return Config.EXIT_USAGE
    except PolyApproxError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return Config.EXIT_RUNTIME
    except (OSError, np.linalg.LinAlgError) as e:
        logger.error(f"Internal error: {type(e).__name__}: {e}")
        return Config.EXIT_RUNTIME
