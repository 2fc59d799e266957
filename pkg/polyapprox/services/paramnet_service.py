"""
Parameterized polytopes: an A-net and a b-net, each one rectifier hidden layer,
map the varying parameter theta to (A(theta), b(theta)). Gradients are propagated
by hand through row normalization and both networks.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import (
    NonFiniteError, PolyApproxError, SolverError, TrainingAborted, UsageError, ZeroRowError,
)
from polyapprox.models import (
    AdamState, EvalRecord, IterationRecord, MlpParams, Polytope, Region, ThetaBox,
    TrainConfig, TrainHistory,
)
from polyapprox.services import error_service, polytope_service, region_service
from polyapprox.services.training_service import (
    ConvergenceMonitor, adam_step, batch_loss, eval_seed, evaluate_batch, learning_rate,
)

logger = logging.getLogger(__name__)

NET_KEYS = ('w1', 'b1', 'w2', 'b2')


@dataclass
class MlpCache:
    """Intermediate values of one forward pass, consumed by backward."""
    theta_norm: np.ndarray
    a_pre: np.ndarray
    a_hidden: np.ndarray
    b_pre: np.ndarray
    b_hidden: np.ndarray
    token: Tuple[int, int]


def _token(net: MlpParams) -> Tuple[int, int]:
    # Updates always build new weight arrays, so array identity marks the weights a cache belongs to.
    return id(net.a_net['w2']), id(net.b_net['w2'])


def _layer(rng: np.random.Generator, theta_dim: int, hidden: int, out_bias: np.ndarray) -> Dict[str, np.ndarray]:
    return {
        'w1': rng.standard_normal((hidden, theta_dim)) * np.sqrt(2.0 / theta_dim),
        'b1': np.zeros(hidden),
        'w2': np.zeros((out_bias.size, hidden)),
        'b2': out_bias.astype(float).copy(),
    }


def init_mlp(box: ThetaBox, A0, b0, hidden: int, rng: np.random.Generator) -> MlpParams:
    """
    Output weights start at zero and output biases at (A0, b0), so the networks emit
    the same polytope for every theta until the first update.
    """
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    b0 = np.asarray(b0, dtype=float).reshape(-1)
    if A0.shape[0] != b0.size:
        raise UsageError(f"A0 has {A0.shape[0]} rows but b0 has {b0.size} entries")
    if hidden < 1:
        raise UsageError("hidden width must be at least 1")
    M, n = A0.shape
    return MlpParams(theta_dim=box.dim, hidden=hidden, M=M, n=n,
                     a_net=_layer(rng, box.dim, hidden, A0.reshape(-1)),
                     b_net=_layer(rng, box.dim, hidden, b0),
                     theta_box=box)


def _check_shapes(net: MlpParams):
    expected = {
        'w1': (net.hidden, net.theta_dim), 'b1': (net.hidden,),
    }
    for name, layer, out in (('a_net', net.a_net, net.M * net.n), ('b_net', net.b_net, net.M)):
        shapes = dict(expected, w2=(out, net.hidden), b2=(out,))
        for key in NET_KEYS:
            if key not in layer or layer[key].shape != shapes[key]:
                raise UsageError(f"{name}.{key} must have shape {shapes[key]}")


def forward(net: MlpParams, theta) -> Tuple[np.ndarray, np.ndarray, MlpCache]:
    """Raw network outputs (rows not normalized) and the cache for backward."""
    _check_shapes(net)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size != net.theta_dim:
        raise UsageError(f"theta has {theta.size} entries, network expects {net.theta_dim}")
    if not net.theta_box.contains(theta):
        raise UsageError(f"theta {theta.tolist()} outside the network's theta box")
    t = net.theta_box.normalize(theta)

    a_pre = net.a_net['w1'] @ t + net.a_net['b1']
    a_hidden = np.maximum(a_pre, 0.0)
    A = (net.a_net['w2'] @ a_hidden + net.a_net['b2']).reshape(net.M, net.n)

    b_pre = net.b_net['w1'] @ t + net.b_net['b1']
    b_hidden = np.maximum(b_pre, 0.0)
    b = net.b_net['w2'] @ b_hidden + net.b_net['b2']
    return A, b, MlpCache(t, a_pre, a_hidden, b_pre, b_hidden, _token(net))


def _layer_backward(layer, theta_norm, pre, hidden, g_out) -> Dict[str, np.ndarray]:
    g_hidden = layer['w2'].T @ g_out
    g_pre = g_hidden * (pre > 0)
    return {
        'w1': np.outer(g_pre, theta_norm),
        'b1': g_pre,
        'w2': np.outer(g_out, hidden),
        'b2': g_out.copy(),
    }


def backward(net: MlpParams, cache: MlpCache, gradA, gradb) -> Dict[str, np.ndarray]:
    """Gradients on every weight, keyed like MlpParams.flat()."""
    if cache.token != _token(net):
        raise UsageError("Stale cache: weights changed since the forward pass")
    gradA = np.asarray(gradA, dtype=float)
    gradb = np.asarray(gradb, dtype=float).reshape(-1)
    if gradA.shape != (net.M, net.n) or gradb.shape != (net.M,):
        raise UsageError("gradient shapes do not match the network outputs")
    grads = {f'a_{k}': v for k, v in _layer_backward(
        net.a_net, cache.theta_norm, cache.a_pre, cache.a_hidden, gradA.reshape(-1)).items()}
    grads.update({f'b_{k}': v for k, v in _layer_backward(
        net.b_net, cache.theta_norm, cache.b_pre, cache.b_hidden, gradb).items()})
    return grads


def normalize_outputs(A_raw, b_raw) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    norms = np.linalg.norm(A_raw, axis=1)
    zero = np.flatnonzero(norms < Config.ROW_EPS)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    return A_raw / norms[:, None], b_raw / norms, norms


def normalization_backward(A_hat, b_hat, norms, gA, gb) -> Tuple[np.ndarray, np.ndarray]:
    """
    Chain rule through a_hat = a / |a|, b_hat = beta / |a| (quotient rule):
    dL/da = (I - a_hat a_hat^T) gA / |a| - gb b_hat a_hat / |a|, dL/dbeta = gb / |a|.
    """
    inner = np.einsum('ij,ij->i', A_hat, gA)
    dA = (gA - inner[:, None] * A_hat - (gb * b_hat)[:, None] * A_hat) / norms[:, None]
    db = gb / norms
    return dA, db


def emit(net: MlpParams, theta) -> Polytope:
    """Polytope emitted at theta, rows normalized, carrying the network's input map."""
    A_raw, b_raw, _ = forward(net, theta)
    A, b, _ = normalize_outputs(A_raw, b_raw)
    scale = np.ones(net.n) if net.scale is None else net.scale
    offset = np.zeros(net.n) if net.offset is None else net.offset
    return Polytope(A, b, scale.copy(), offset.copy())


def _region_theta(region: Region, theta):
    return theta if region.theta_dim else None


def fit_parameterized(region: Region, box: ThetaBox, config: Optional[TrainConfig] = None,
                      callback: Optional[Callable[[int, MlpParams], None]] = None
                      ) -> Tuple[MlpParams, TrainHistory]:
    """
    Trains the A-net and b-net: each iteration samples theta uniformly from the box,
    emits (A, b), evaluates a batch of directions against the region at theta and
    backpropagates the active-set loss into the weights.
    """
    config = config or TrainConfig()
    if region.theta_dim and region.theta_dim != box.dim:
        raise UsageError(f"theta box has {box.dim} coordinates, region expects {region.theta_dim}")
    rng = np.random.default_rng(config.seed)
    thetas = [_region_theta(region, t) for t in region_service.check_thetas(region, box)]
    view, scale, offset = region_service.normalized_view(region, config.normalization, thetas)
    n = region.dim
    M = config.M or 2 * n

    center = _region_theta(region, box.center)
    A0 = polytope_service.initial_directions(n, M, config.init, rng)
    outer = polytope_service.normalize_rows(Polytope.unscaled(A0, np.zeros(M)))
    b0 = np.array([view.support(center, row)[1] for row in outer.A])
    net = init_mlp(box, outer.A, b0, config.hidden, rng)
    net.scale, net.offset = scale.copy(), offset.copy()

    logger.info(f"Starting parameterized training: {region.kind} n={n} M={M} "
                f"theta_dim={box.dim} hidden={config.hidden} seed={config.seed}")
    history = TrainHistory()
    state = AdamState()
    monitor = ConvergenceMonitor(config)
    last_good = net.copy()
    iteration = 0
    for index, phase in enumerate(config.phases):
        last_phase = index == len(config.phases) - 1
        for _ in range(phase.iters):
            iteration += 1
            theta = box.sample(rng)
            directions = [error_service.sample_direction(rng, n, config.dir_eps) for _ in range(config.batch)]
            try:
                A_raw, b_raw, cache = forward(net, theta)
                A_hat, b_hat, norms = normalize_outputs(A_raw, b_raw)
                P, inflation = polytope_service.repair_nonempty(Polytope.unscaled(A_hat, b_hat))
                if inflation > 0:
                    net.b_net['b2'] = net.b_net['b2'] + inflation * norms
                    A_raw, b_raw, cache = forward(net, theta)
                    A_hat, b_hat, norms = normalize_outputs(A_raw, b_raw)
                    P = Polytope.unscaled(A_hat, b_hat)
                samples = evaluate_batch(P, view, _region_theta(region, theta), directions, config.workers)
                loss, gA, gb = batch_loss(P, samples, phase.lam, config.act_tol)
                if not np.isfinite(loss):
                    raise NonFiniteError(f"Loss is {loss} at iteration {iteration}")
                dA, db = normalization_backward(A_hat, b_hat, norms, gA, gb)
                grads = backward(net, cache, dA, db)
                params, state = adam_step(net.flat(), grads, state,
                                          learning_rate(config, phase, iteration), config.betas, config.eps)
                net = net.with_flat(params)
            except PolyApproxError as e:
                logger.error(f"Parameterized training aborted at iteration {iteration}: {e}")
                raise TrainingAborted(f"Training aborted at iteration {iteration}: {e}",
                                      last_good=last_good, history=history, cause=e)
            last_good = net.copy()
            history.record(IterationRecord(
                iter=iteration, lam=phase.lam,
                e_feas=float(np.mean([s.e_feas for s in samples])),
                e_opt=float(np.mean([s.e_opt for s in samples])),
                loss=float(loss),
                grad_norm=float(np.sqrt(sum(np.sum(g ** 2) for g in grads.values()))),
            ))
            if callback is not None:
                callback(iteration, net)

            if iteration % config.eval_every == 0:
                seed = eval_seed(config.seed, iteration)
                eval_theta = box.sample(np.random.default_rng(seed))
                try:
                    estimate = error_service.estimate_errors(
                        _normalized(net, eval_theta),
                        view, _region_theta(region, eval_theta), config.eval_dirs, seed, config.workers)
                except SolverError as e:
                    raise TrainingAborted(f"Evaluation failed at iteration {iteration}: {e}",
                                          last_good=last_good, history=history, cause=e)
                history.evals.append(EvalRecord(iteration, estimate, phase.lam))
                weighted = estimate.weighted(phase.lam)
                logger.info(f"iter {iteration} lambda={phase.lam} theta={np.round(eval_theta, 4).tolist()}: "
                            f"weighted={weighted:.3e}")
                if monitor.update(weighted):
                    if last_phase or not config.phase_convergence:
                        history.converged = True
                        logger.info(f"Converged at iteration {iteration}")
                        return net, history
                    break
        monitor.reset()
    logger.info(f"Schedule complete after {iteration} iterations")
    return net, history


def _normalized(net: MlpParams, theta) -> Polytope:
    """Emitted polytope in the training space (no input map attached)."""
    A_raw, b_raw, _ = forward(net, theta)
    A, b, _ = normalize_outputs(A_raw, b_raw)
    return Polytope.unscaled(A, b)
