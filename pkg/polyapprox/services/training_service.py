"""
Fixed-region training loop: sample directions, evaluate the directional errors,
form the active-set loss, take an Adam step on (A, b), renormalize rows and keep
the polytope nonempty.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import (
    ConsistencyError, NonFiniteError, PolyApproxError, SolverError, TrainingAborted,
    UnboundedPolytopeError, UsageError,
)
from polyapprox.models import (
    AdamState, DirectionalSample, EvalRecord, IterationRecord, Phase, Polytope, Region,
    TrainConfig, TrainHistory,
)
from polyapprox.services import error_service, polytope_service, region_service

logger = logging.getLogger(__name__)

Callback = Callable[[int, Polytope], None]


def init_outer(region: Region, theta0, A0) -> Polytope:
    """
    Outer initialization: rows of A0 are normalized and each b_j is set to the
    region's support value along A_j, so the region lies inside the polytope.
    """
    P = polytope_service.normalize_rows(Polytope.unscaled(A0, np.zeros(np.atleast_2d(A0).shape[0])))
    if P.n != region.dim:
        raise UsageError(f"A0 has {P.n} columns, region dimension is {region.dim}")
    b = np.array([region.support(theta0, row)[1] for row in P.A])
    return Polytope(P.A, b, P.scale, P.offset)


def loss_and_grads(P: Polytope, sample: DirectionalSample, lam: float,
                   act_tol: float = Config.ACT_TOL) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    L = lam * ||A_J z* - b_J||^2 + (1 - lam) * ||A_K z' - b_K||^2 with J the rows
    active at x' and K the rows active at x*. z* and z' are held fixed, so only the
    active rows receive gradient; rows in both sets accumulate both terms.
    """
    J = polytope_service.active_at(P, sample.x_prime, act_tol).indices
    K = polytope_service.active_at(P, sample.x_star, act_tol).indices
    if not J and sample.e_feas > Config.FEAS_TOL:
        raise ConsistencyError(
            f"Support point is not on the boundary of P but e_feas={sample.e_feas:.3e}")

    gA = np.zeros_like(P.A)
    gb = np.zeros_like(P.b)
    loss = 0.0
    for rows, z, weight in ((J, sample.z_star, lam), (K, sample.z_prime, 1.0 - lam)):
        for j in rows:
            r = float(P.A[j] @ z - P.b[j])
            loss += weight * r * r
            gA[j] += 2.0 * weight * r * z
            gb[j] -= 2.0 * weight * r
    return loss, gA, gb


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdamState,
              lr: float, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8
              ) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update with bias correction. Returns new parameter arrays and a new
    state; the inputs are left untouched.
    """
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"Non-finite gradient for '{k}'")
        if k not in params or params[k].shape != g.shape:
            raise UsageError(f"Gradient '{k}' does not match any parameter shape")
    beta1, beta2 = betas
    t = state.t + 1
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    new_params, m_new, v_new = {}, {}, {}
    for k, p in params.items():
        g = grads.get(k, np.zeros_like(p))
        m = beta1 * state.m.get(k, np.zeros_like(p)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(k, np.zeros_like(p)) + (1.0 - beta2) * (g * g)
        new_params[k] = p - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        m_new[k], v_new[k] = m, v
    return new_params, AdamState(t=t, m=m_new, v=v_new)


def learning_rate(config: TrainConfig, phase: Phase, iteration: int) -> float:
    base = phase.lr if phase.lr is not None else config.lr
    return max(config.lr_min, base * config.lr_decay ** (iteration - 1))


def eval_seed(seed: int, iteration: int) -> int:
    """Seed of the fresh direction sample drawn for the evaluation at `iteration`."""
    return int(np.random.SeedSequence([seed, iteration]).generate_state(1)[0])


def evaluate_batch(P: Polytope, region: Region, theta, directions: List[np.ndarray],
                   workers: int = 1) -> List[DirectionalSample]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda v: error_service.dir_errors(P, region, theta, v), directions))
    return [error_service.dir_errors(P, region, theta, v) for v in directions]


def batch_loss(P: Polytope, samples: List[DirectionalSample], lam: float, act_tol: float
               ) -> Tuple[float, np.ndarray, np.ndarray]:
    """Average loss and gradients over a batch of directional samples."""
    loss, gA, gb = 0.0, np.zeros_like(P.A), np.zeros_like(P.b)
    for sample in samples:
        l, a, b = loss_and_grads(P, sample, lam, act_tol)
        loss += l
        gA += a
        gb += b
    k = len(samples)
    return loss / k, gA / k, gb / k


def warm_start(start: Polytope, scale: np.ndarray, offset: np.ndarray) -> Polytope:
    """`start`, in any coordinates its map describes, rewritten in the training space."""
    raw = start.to_raw()
    if raw.n != scale.size:
        raise UsageError(f"start polytope has dimension {raw.n}, region dimension is {scale.size}")
    P = polytope_service.normalize_rows(Polytope.unscaled(raw.A * scale, raw.b - raw.A @ offset))
    if not polytope_service.is_bounded(P.A):
        raise UsageError("start polytope is unbounded")
    P, _ = polytope_service.repair_nonempty(P)
    return P


def initial_state(region: Region, theta0, config: TrainConfig, rng: np.random.Generator,
                  start: Optional[Polytope] = None) -> Tuple[Region, np.ndarray, np.ndarray, Polytope]:
    """
    Normalized view of the region, its (scale, offset) and the initial polytope: the
    outer initialization, or `start` when one is given.
    """
    view, scale, offset = region_service.normalized_view(region, config.normalization, [theta0])
    if start is not None:
        return view, scale, offset, warm_start(start, scale, offset)
    M = config.M or 2 * region.dim
    A0 = polytope_service.initial_directions(region.dim, M, config.init, rng)
    return view, scale, offset, init_outer(view, theta0, A0)


def initial_polytope(region: Region, theta0, config: TrainConfig) -> Polytope:
    """The polytope `fit` starts from, with its input map attached."""
    theta0 = region.default_theta() if theta0 is None else np.asarray(theta0, dtype=float)
    _, scale, offset, P = initial_state(region, theta0, config, np.random.default_rng(config.seed))
    return Polytope(P.A, P.b, scale, offset)


def bounded_step(P: Polytope, gA: np.ndarray, gb: np.ndarray, state: AdamState, lr: float,
                 config: TrainConfig) -> Tuple[Polytope, AdamState]:
    """
    Adam step on (A, b) followed by row normalization. A step whose rows no longer
    bound a polytope is retried at half the learning rate, up to STEP_BACKOFF_MAX
    times; the Adam moments do not depend on the learning rate.
    """
    for halving in range(Config.STEP_BACKOFF_MAX + 1):
        step_lr = lr * 0.5 ** halving
        params, new_state = adam_step({'A': P.A, 'b': P.b}, {'A': gA, 'b': gb}, state,
                                      step_lr, config.betas, config.eps)
        candidate = polytope_service.normalize_rows(Polytope.unscaled(params['A'], params['b']))
        if polytope_service.is_bounded(candidate.A):
            if halving:
                logger.warning(f"Step would leave P unbounded; taken at lr={step_lr:.3e} instead of {lr:.3e}")
            return candidate, new_state
    raise UnboundedPolytopeError(
        f"Every step down to lr={lr * 0.5 ** Config.STEP_BACKOFF_MAX:.3e} leaves P unbounded")


class ConvergenceMonitor:
    """Counts consecutive evaluations whose weighted error is below tol."""

    def __init__(self, config: TrainConfig):
        self.tol = config.tol
        self.patience = config.patience
        self.streak = 0

    def update(self, weighted_error: float) -> bool:
        self.streak = self.streak + 1 if weighted_error < self.tol else 0
        return self.streak >= self.patience

    def reset(self):
        self.streak = 0


def fit(region: Region, theta0=None, config: Optional[TrainConfig] = None,
        callback: Optional[Callback] = None, start: Optional[Polytope] = None
        ) -> Tuple[Polytope, TrainHistory]:
    """
    Trains P(A, b) against a fixed region (at theta0) under the phased lambda schedule,
    from the outer initialization or from `start`.

    Training happens in the normalized space chosen by `config.normalization`; the
    returned polytope carries that map. Any failure during an iteration raises
    TrainingAborted holding the last polytope that passed every check.
    """
    config = config or TrainConfig()
    theta0 = region.default_theta() if theta0 is None else np.asarray(theta0, dtype=float)
    rng = np.random.default_rng(config.seed)
    view, scale, offset, P = initial_state(region, theta0, config, rng, start)
    n, M = P.n, P.M
    history = TrainHistory()

    def with_norm(Q: Polytope) -> Polytope:
        return Polytope(Q.A.copy(), Q.b.copy(), scale.copy(), offset.copy())

    logger.info(f"Starting training: {region.kind} n={n} M={M} "
                f"phases={[(p.lam, p.iters) for p in config.phases]} seed={config.seed}")
    state = AdamState()
    monitor = ConvergenceMonitor(config)
    iteration = 0
    last_good = P
    for index, phase in enumerate(config.phases):
        last_phase = index == len(config.phases) - 1
        for _ in range(phase.iters):
            iteration += 1
            directions = [error_service.sample_direction(rng, n, config.dir_eps) for _ in range(config.batch)]
            try:
                samples = evaluate_batch(P, view, theta0, directions, config.workers)
                loss, gA, gb = batch_loss(P, samples, phase.lam, config.act_tol)
                if not np.isfinite(loss):
                    raise NonFiniteError(f"Loss is {loss} at iteration {iteration}")
                P, state = bounded_step(P, gA, gb, state, learning_rate(config, phase, iteration), config)
                P, _ = polytope_service.repair_nonempty(P)
            except PolyApproxError as e:
                logger.error(f"Training aborted at iteration {iteration}: {e}")
                raise TrainingAborted(f"Training aborted at iteration {iteration}: {e}",
                                      last_good=with_norm(last_good), history=history, cause=e)
            last_good = P
            history.record(IterationRecord(
                iter=iteration, lam=phase.lam,
                e_feas=float(np.mean([s.e_feas for s in samples])),
                e_opt=float(np.mean([s.e_opt for s in samples])),
                loss=float(loss), grad_norm=float(np.sqrt(np.sum(gA ** 2) + np.sum(gb ** 2))),
            ))
            if callback is not None:
                callback(iteration, with_norm(P))

            if iteration % config.eval_every == 0:
                try:
                    estimate = error_service.estimate_errors(
                        P, view, theta0, config.eval_dirs, eval_seed(config.seed, iteration), config.workers)
                except SolverError as e:
                    raise TrainingAborted(f"Evaluation failed at iteration {iteration}: {e}",
                                          last_good=with_norm(last_good), history=history, cause=e)
                history.evals.append(EvalRecord(iteration, estimate, phase.lam))
                weighted = estimate.weighted(phase.lam)
                logger.info(f"iter {iteration} lambda={phase.lam}: mean_feas={estimate.mean_feas:.3e} "
                            f"mean_opt={estimate.mean_opt:.3e} weighted={weighted:.3e}")
                if monitor.update(weighted):
                    if last_phase or not config.phase_convergence:
                        history.converged = True
                        logger.info(f"Converged at iteration {iteration}")
                        return with_norm(P), history
                    logger.info(f"Phase {index + 1} converged at iteration {iteration}")
                    break
        monitor.reset()
    logger.info(f"Schedule complete after {iteration} iterations")
    return with_norm(P), history
