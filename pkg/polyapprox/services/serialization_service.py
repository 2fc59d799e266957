"""
Reading and writing every document the tool produces: model and region JSON,
run configurations and the history, evaluation, benchmark and snapshot CSVs.
Numbers are written with 17 significant digits so doubles survive a round trip,
and every file is replaced atomically.
"""
import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import fields
from typing import Iterable, List, Optional, Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import NonFiniteError, SpecError, UsageError
from polyapprox.models import (
    BenchReport, MlpParams, Phase, Polytope, Region, RunConfigDocument, ThetaBox, TrainConfig,
    TrainHistory,
)

logger = logging.getLogger(__name__)

MODEL_SCHEMA = 1
HISTORY_COLUMNS = ['iter', 'lambda', 'e_feas', 'e_opt', 'loss', 'grad_norm']
EVAL_COLUMNS = ['iter', 'mean_feas', 'mean_opt', 'max_feas', 'max_opt']
BENCH_COLUMNS = ['case', 'n', 'M', 'init_error', 'converged_error', 'ideal_error', 'reduction',
                 'iterations', 'steps_to_tol', 'max_feas', 'max_opt', 'mc_se', 'passed', 'notes']


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return 'true' if x else 'false'
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not np.isfinite(x):
        raise NonFiniteError(f"Cannot serialize non-finite number {x}")
    return format(x, f'.{Config.SIGNIFICANT_DIGITS}g')


def dumps(obj, indent: int = 0) -> str:
    """
    JSON text with numbers at full precision. Objects are laid out one key per line;
    arrays stay on one line.
    """
    pad = '  ' * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return '{}'
        items = [f'{pad}{json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()]
        return '{\n' + ',\n'.join(items) + '\n' + '  ' * indent + '}'
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return '[' + ', '.join(dumps(v, indent) for v in obj) + ']'
    if obj is None:
        return 'null'
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, float, np.integer, np.floating, np.bool_, bool)):
        return format_number(obj)
    raise UsageError(f"Cannot serialize value of type {type(obj).__name__}")


def write_text_atomic(path: str, text: str):
    """Writes to a temporary file next to `path`, then renames it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix='.tmp-', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def read_json(path: str, what: str) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except OSError as e:
        raise UsageError(f"Cannot read {what} '{path}': {e.strerror}")
    except json.JSONDecodeError as e:
        raise SpecError(f"{what} '{path}' is not valid JSON: {e}")


# Model documents

def _net_to_doc(layer) -> dict:
    return {k: layer[k] for k in ('w1', 'b1', 'w2', 'b2')}


def model_to_doc(P: Polytope, mlp: Optional[MlpParams] = None) -> dict:
    doc = {
        'schema': MODEL_SCHEMA,
        'n': P.n,
        'M': P.M,
        'A': P.A,
        'b': P.b,
        'norm': {'scale': P.scale, 'offset': P.offset},
    }
    if mlp is not None:
        doc['mlp'] = {
            'theta_dim': mlp.theta_dim,
            'hidden': mlp.hidden,
            'a_net': _net_to_doc(mlp.a_net),
            'b_net': _net_to_doc(mlp.b_net),
            'theta_box': {'lower': mlp.theta_box.lower, 'upper': mlp.theta_box.upper},
        }
    return doc


def _matrix(value, shape, field_name) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"model field '{field_name}' is not numeric")
    if arr.shape != shape:
        raise SpecError(f"model field '{field_name}' must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"model field '{field_name}' contains non-finite numbers")
    return arr


def model_from_doc(doc: dict) -> Tuple[Polytope, Optional[MlpParams]]:
    if not isinstance(doc, dict):
        raise SpecError("Model document must be an object")
    if doc.get('schema') != MODEL_SCHEMA:
        raise SpecError(f"Unsupported model schema {doc.get('schema')}")
    try:
        n, M = int(doc['n']), int(doc['M'])
        norm = doc['norm']
        P = Polytope(_matrix(doc['A'], (M, n), 'A'), _matrix(doc['b'], (M,), 'b'),
                     _matrix(norm['scale'], (n,), 'norm.scale'), _matrix(norm['offset'], (n,), 'norm.offset'))
    except KeyError as e:
        raise SpecError(f"Model document is missing field {e}")
    if np.any(P.scale <= 0):
        raise SpecError("model field 'norm.scale' must be positive")

    mlp = None
    if doc.get('mlp') is not None:
        block = doc['mlp']
        try:
            d, H = int(block['theta_dim']), int(block['hidden'])
            box = ThetaBox(block['theta_box']['lower'], block['theta_box']['upper'])
            nets = []
            for name, out in (('a_net', M * n), ('b_net', M)):
                layer = block[name]
                nets.append({
                    'w1': _matrix(layer['w1'], (H, d), f'mlp.{name}.w1'),
                    'b1': _matrix(layer['b1'], (H,), f'mlp.{name}.b1'),
                    'w2': _matrix(layer['w2'], (out, H), f'mlp.{name}.w2'),
                    'b2': _matrix(layer['b2'], (out,), f'mlp.{name}.b2'),
                })
        except KeyError as e:
            raise SpecError(f"Model mlp block is missing field {e}")
        except UsageError as e:
            raise SpecError(f"Model mlp block: {e}")
        if box.dim != d:
            raise SpecError("mlp theta_box length differs from theta_dim")
        mlp = MlpParams(d, H, M, n, nets[0], nets[1], box, P.scale.copy(), P.offset.copy())
    return P, mlp


def write_model(path: str, P: Polytope, mlp: Optional[MlpParams] = None):
    write_text_atomic(path, dumps(model_to_doc(P, mlp)) + '\n')


def read_model(path: str) -> Tuple[Polytope, Optional[MlpParams]]:
    return model_from_doc(read_json(path, 'model document'))


def write_region(path: str, region: Region):
    write_text_atomic(path, dumps(region.to_spec_data()) + '\n')


# CSV artifacts

def _csv_text(columns: List[str], rows: Iterable[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow(['' if v is None else v if isinstance(v, str) else format_number(v) for v in row])
    return buf.getvalue()


def write_history_csv(path: str, history: TrainHistory):
    rows = ([r.iter, r.lam, r.e_feas, r.e_opt, r.loss, r.grad_norm] for r in history.iterations)
    write_text_atomic(path, _csv_text(HISTORY_COLUMNS, rows))


def write_eval_csv(path: str, history: TrainHistory):
    rows = ([e.iter, e.estimate.mean_feas, e.estimate.mean_opt, e.estimate.max_feas, e.estimate.max_opt]
            for e in history.evals)
    write_text_atomic(path, _csv_text(EVAL_COLUMNS, rows))


def bench_columns(timing: bool = False) -> List[str]:
    return BENCH_COLUMNS[:8] + ['wall_time'] + BENCH_COLUMNS[8:] if timing else list(BENCH_COLUMNS)


def write_bench_csv(path: str, reports: List[BenchReport], timing: bool = False):
    """
    One row per case. Wall time is only written with `timing`, so that identical
    seeded runs produce identical files.
    """
    columns = bench_columns(timing)
    rows = [[getattr(r, c) for c in columns] for r in reports]
    write_text_atomic(path, _csv_text(columns, rows))


def write_snapshot_csv(path: str, snapshots: List[Tuple[int, Polytope]]):
    """Rows of (iter, row, a1..an, b) in raw coordinates, for external plotting."""
    if not snapshots:
        write_text_atomic(path, '')
        return
    n = snapshots[0][1].n
    columns = ['iter', 'row'] + [f'a{i + 1}' for i in range(n)] + ['b']
    rows = []
    for iteration, P in snapshots:
        raw = P.to_raw()
        for j in range(raw.M):
            rows.append([iteration, j] + list(raw.A[j]) + [raw.b[j]])
    write_text_atomic(path, _csv_text(columns, rows))


# Run configuration documents

def parse_lambda_schedule(text: str) -> List[Phase]:
    """'0.5:500,0.9:200' -> [Phase(0.5, 500), Phase(0.9, 200)]"""
    phases = []
    for part in text.split(','):
        part = part.strip()
        if not part:
            continue
        try:
            lam, iters = part.split(':')
            phases.append(Phase(float(lam), int(iters)))
        except ValueError:
            raise UsageError(f"Bad lambda schedule entry '{part}', expected lambda:iters")
    if not phases:
        raise UsageError("Lambda schedule is empty")
    return phases


TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}


def train_config_from_doc(data: dict, base: Optional[TrainConfig] = None) -> TrainConfig:
    """TrainConfig from the training keys of a run document, over `base` defaults."""
    values = {f: getattr(base, f) for f in TRAIN_FIELDS} if base is not None else {}
    for key, value in data.items():
        if key not in TRAIN_FIELDS:
            continue
        if key == 'phases':
            if isinstance(value, str):
                value = parse_lambda_schedule(value)
            else:
                try:
                    value = [Phase(float(p['lambda']), int(p['iters']),
                                   None if p.get('lr') is None else float(p['lr'])) for p in value]
                except (KeyError, TypeError, ValueError):
                    raise SpecError("phases must be a list of {lambda, iters[, lr]} objects")
        elif key == 'betas':
            value = tuple(float(b) for b in value)
        values[key] = value
    try:
        return TrainConfig(**values)
    except TypeError as e:
        raise SpecError(f"Bad training configuration: {e}")


def read_run_config(path: str) -> RunConfigDocument:
    data = read_json(path, 'run configuration')
    if not isinstance(data, dict):
        raise SpecError("Run configuration must be an object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(key, required=False):
        value = data.get(key)
        if value is None:
            if required:
                raise SpecError(f"Run configuration is missing '{key}'")
            return None
        return value if os.path.isabs(value) else os.path.join(base, value)

    mode = data.get('mode', 'fixed')
    if mode not in ('fixed', 'parameterized'):
        raise SpecError(f"Unknown run mode '{mode}'")
    box = None
    if data.get('theta_box') is not None:
        box = ThetaBox(data['theta_box']['lower'], data['theta_box']['upper'])
    return RunConfigDocument(
        region=resolve('region', required=True),
        out=resolve('out', required=True),
        train=train_config_from_doc(data),
        mode=mode,
        history=resolve('history'),
        eval_history=resolve('eval_history'),
        theta=data.get('theta'),
        theta_box=box,
    )
