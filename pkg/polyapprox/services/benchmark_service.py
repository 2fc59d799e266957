"""
Benchmark suites: hypercubes and hyperspheres of growing dimension, three 2D shapes
(with shape snapshots for plotting) and a small resource-aggregation study whose
learned polytope is checked by disaggregating sampled aggregate points.
"""
import logging
import time
from dataclasses import replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from polyapprox.exceptions import TrainingAborted, UsageError
from polyapprox.models import BenchReport, Phase, Polytope, Region, TrainConfig, TrainHistory
from polyapprox.region_types import (
    DiskDifferenceRegion, EllipseRegion, HypercubeRegion, HypersphereRegion, MinkowskiRegion,
    PolygonRegion, regular_polygon,
)
from polyapprox.services import error_service, polytope_service, region_service, training_service

logger = logging.getLogger(__name__)

SUITES = ('hypercube', 'hypersphere', 'shapes2d', 'aggregation')

# Errors in reports are total errors at lambda = 0.5
REPORT_LAMBDA = 0.5
REPORT_DIRS = 500
REDUCTION_THRESHOLD = 0.99
INNER_FEAS_TOL = 1e-8
HULL_TOL = 1e-3
HULL_SUPPORT_TOL = 5e-3
DISAGGREGATION_TOL = 1e-6


def default_config(suite: str, seed: int = 0) -> TrainConfig:
    """Training settings each suite uses unless the caller overrides them."""
    if suite in ('hypercube', 'hypersphere'):
        iters = 4000
        return TrainConfig(phases=[Phase(0.5, iters)], lr=1e-2, lr_decay=0.01 ** (1.0 / iters),
                           lr_min=1e-5, init='random', seed=seed)
    if suite == 'shapes2d':
        return TrainConfig(seed=seed, lr_decay=0.999, lr_min=1e-4)
    if suite == 'aggregation':
        return TrainConfig(seed=seed, batch=4, lr_decay=0.999, lr_min=1e-4, eval_dirs=100)
    raise UsageError(f"Unknown suite '{suite}'")


def ideal_hypersphere_error(n: int) -> float:
    """Best total error (lambda = 0.5) of 2n hyperplanes around the unit n-ball."""
    return 1.0 - 2.0 * np.sqrt(n) / (n + 1)


def reduction_rate(init_error: float, converged_error: float) -> float:
    if init_error > 0:
        return max(0.0, (init_error - converged_error) / init_error)
    return 1.0 if converged_error == 0 else 0.0


def steps_to_tol(history: TrainHistory, tol: float, lam: float = REPORT_LAMBDA) -> Optional[int]:
    for record in history.evals:
        if record.estimate.weighted(lam) < tol:
            return record.iter
    return None


def _fit(region: Region, theta, config: TrainConfig, callback=None) -> Tuple[Polytope, TrainHistory, str]:
    try:
        P, history = training_service.fit(region, theta, config, callback)
        return P, history, ''
    except TrainingAborted as e:
        logger.error(f"{region.kind}: {e}")
        return e.last_good, e.history, f'aborted: {e.cause}'


def _judge(report: BenchReport, ok: bool):
    """A case that aborted never passes, whatever its last polytope scores."""
    report.passed = bool(ok) and not report.notes.startswith('aborted')


def run_case(case: str, region: Region, config: TrainConfig, theta=None, ideal: Optional[float] = None,
             eval_dirs: int = REPORT_DIRS, callback=None) -> Tuple[BenchReport, Polytope, TrainHistory]:
    """Trains one case and measures initial and converged errors on the same directions."""
    start = time.perf_counter()
    P0 = training_service.initial_polytope(region, theta, config)
    P, history, notes = _fit(region, theta, config, callback)
    wall = time.perf_counter() - start

    seed = training_service.eval_seed(config.seed, 0)
    before = error_service.estimate_errors(P0, region, theta, eval_dirs, seed, config.workers)
    after = error_service.estimate_errors(P, region, theta, eval_dirs, seed, config.workers)
    init_error = before.weighted(REPORT_LAMBDA)
    converged = after.weighted(REPORT_LAMBDA)
    report = BenchReport(
        case=case, n=region.dim, M=P.M, init_error=init_error, converged_error=converged,
        ideal_error=ideal, reduction=reduction_rate(init_error, converged),
        iterations=history.last_iter if history is not None else 0, wall_time=wall,
        steps_to_tol=steps_to_tol(history, config.tol) if history is not None else None,
        max_feas=after.max_feas, max_opt=after.max_opt, mc_se=after.weighted_se(REPORT_LAMBDA),
        notes=notes,
    )
    logger.info(f"{case}: init={init_error:.4e} converged={converged:.4e} "
                f"reduction={report.reduction:.4f} iterations={report.iterations} ({wall:.1f}s)")
    return report, P, history


def _suite_config(config: Optional[TrainConfig], suite: str, M: int) -> TrainConfig:
    base = config or default_config(suite)
    return replace(base, M=M)


def run_hypercube_suite(dims: List[int], config: Optional[TrainConfig] = None) -> List[BenchReport]:
    """Unit hypercubes with M = 2n; a case passes once the total error drops below tol."""
    reports = []
    for n in dims:
        cfg = _suite_config(config, 'hypercube', 2 * n)
        region = HypercubeRegion(np.zeros(n), np.ones(n))
        report, _, _ = run_case(f'hypercube-{n}', region, cfg)
        _judge(report, report.converged_error < cfg.tol)
        reports.append(report)
    return reports


def run_hypersphere_suite(dims: List[int], config: Optional[TrainConfig] = None) -> List[BenchReport]:
    """
    Unit balls with M = 2n. The ideal total error is reported next to the converged
    one; a case passes when the error reduction reaches REDUCTION_THRESHOLD.
    """
    reports = []
    for n in dims:
        cfg = _suite_config(config, 'hypersphere', 2 * n)
        region = HypersphereRegion(np.zeros(n), 1.0)
        ideal = ideal_hypersphere_error(n)
        report, _, _ = run_case(f'hypersphere-{n}', region, cfg, ideal=ideal)
        _judge(report, report.reduction >= REDUCTION_THRESHOLD)
        gap = report.converged_error - ideal
        achievable = report.init_error - ideal
        notes = [f'gap_to_ideal={gap:.6e}']
        if achievable > 0:
            notes.append(f'reduction_of_excess={(report.init_error - report.converged_error) / achievable:.6f}')
        if report.converged_error < ideal - 3 * report.mc_se:
            notes.append('below_ideal_beyond_3se')
        report.notes = ';'.join(filter(None, [report.notes] + notes))
        reports.append(report)
    return reports


def shapes_2d() -> Dict[str, Tuple[Region, int]]:
    """The three 2D cases and their hyperplane counts."""
    return {
        'octagon': (PolygonRegion(regular_polygon(8)), 4),
        'ellipse': (EllipseRegion([0.0, 0.0], [1.0, 0.5]), 6),
        'disk_difference': (DiskDifferenceRegion([0.0, 0.0], 1.0, [1.0, 0.0], 0.5), 6),
    }


def hull_coverage(P: Polytope, region: DiskDifferenceRegion, n_dirs: int = 100, seed: int = 0,
                  count: int = 10000) -> Tuple[float, float]:
    """
    Largest violation of P's constraints over the hull vertices of the region, and
    largest support-value difference between P and the hull along random directions.
    """
    raw = P.to_raw()
    hull = region.hull_vertices(count=count)
    violation = float(np.max(raw.A @ hull.T - raw.b[:, None]))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        v = error_service.sample_direction(rng, 2)
        p_value = float(v @ polytope_service.support_pt(raw, v))
        worst = max(worst, abs(p_value - float(np.max(hull @ v))))
    return violation, worst


def run_2d_suite(config: Optional[TrainConfig] = None, snapshot_every: int = 50
                 ) -> Tuple[List[BenchReport], Dict[str, List[Tuple[int, Polytope]]]]:
    """Trains the octagon, ellipse and disk-difference cases, keeping shape snapshots."""
    reports, snapshots = [], {}
    for case, (region, M) in shapes_2d().items():
        cfg = _suite_config(config, 'shapes2d', M)
        frames = [(0, training_service.initial_polytope(region, None, cfg))]

        def snapshot(iteration, P, frames=frames):
            if iteration % snapshot_every == 0:
                frames.append((iteration, P))

        report, P, history = run_case(case, region, cfg, callback=snapshot)
        if not frames or frames[-1][0] != report.iterations:
            frames.append((report.iterations, P))
        snapshots[case] = frames

        if case == 'octagon':
            _judge(report, report.converged_error < 0.5 * report.init_error)
        elif case == 'ellipse':
            _judge(report, report.max_feas < INNER_FEAS_TOL)
        else:
            violation, support_gap = hull_coverage(P, region)
            _judge(report, violation <= HULL_TOL and support_gap <= HULL_SUPPORT_TOL)
            report.notes = ';'.join(filter(None, [
                report.notes, f'hull_violation={violation:.6e}', f'hull_support_gap={support_gap:.6e}']))
        reports.append(report)
    return reports, snapshots


# Resource generators for the aggregation study

def _cumulative(T: int) -> np.ndarray:
    return np.tril(np.ones((T, T)))


def box_budget_resource(T: int, lo: float = 0.0, hi: float = 1.0, budget: Optional[float] = None
                        ) -> Tuple[np.ndarray, np.ndarray]:
    """Power box lo <= p_t <= hi plus an optional energy budget sum_t p_t <= budget."""
    I = np.eye(T)
    G = [I, -I]
    h = [np.full(T, hi), np.full(T, -lo)]
    if budget is not None:
        G.append(np.ones((1, T)))
        h.append([budget])
    return np.vstack(G), np.concatenate(h)


def storage_resource(T: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Bidirectional power |p_t| <= p_max and a state-of-energy window
    0 <= e0 + sum_{tau <= t} p_tau <= capacity.
    """
    p_max = rng.uniform(0.5, 1.5)
    capacity = rng.uniform(1.0, 4.0)
    e0 = rng.uniform(0.2, 0.8) * capacity
    I, L = np.eye(T), _cumulative(T)
    G = np.vstack([I, -I, L, -L])
    h = np.concatenate([np.full(T, p_max), np.full(T, p_max), np.full(T, capacity - e0), np.full(T, e0)])
    return G, h


def ev_resource(T: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    Charging-only power 0 <= p_t <= p_max, cumulative energy cap and a minimum
    energy delivered over the horizon.
    """
    p_max = rng.uniform(0.5, 1.5)
    cap = rng.uniform(0.5, 1.0) * T * p_max
    need = rng.uniform(0.2, 0.5) * cap
    I, L = np.eye(T), _cumulative(T)
    G = np.vstack([I, -I, L, -np.ones((1, T))])
    h = np.concatenate([np.full(T, p_max), np.zeros(T), np.full(T, cap), [-need]])
    return G, h


def aggregation_region(n_resources: int, T: int, rng: np.random.Generator) -> MinkowskiRegion:
    """Alternating storage-like and EV-like resources."""
    systems = [storage_resource(T, rng) if i % 2 == 0 else ev_resource(T, rng) for i in range(n_resources)]
    return region_service.check_region(MinkowskiRegion(systems))


def disaggregation_stats(P: Polytope, region: MinkowskiRegion, n_samples: int, rng: np.random.Generator,
                         tol: float = DISAGGREGATION_TOL) -> dict:
    samples = polytope_service.hit_and_run(P.to_raw(), n_samples, rng)
    feasible = sum(region.disaggregate(x, tol=tol) is not None for x in samples)
    return {'samples': n_samples, 'feasible': int(feasible), 'feasible_fraction': feasible / n_samples}


def run_aggregation_demo(resources: int = 20, T: int = 6, config: Optional[TrainConfig] = None,
                         n_samples: int = 200, eval_dirs: int = REPORT_DIRS) -> Tuple[BenchReport, dict]:
    """
    Learns an inner approximation of the Minkowski sum of `resources` random
    resources with M = 4T, then disaggregates uniformly sampled points of it.
    """
    cfg = _suite_config(config, 'aggregation', 4 * T)
    rng = np.random.default_rng(cfg.seed)
    region = aggregation_region(resources, T, rng)
    report, P, _ = run_case(f'aggregation-{resources}x{T}', region, cfg, eval_dirs=eval_dirs)
    stats = disaggregation_stats(P, region, n_samples, rng)
    inner = report.max_feas < INNER_FEAS_TOL
    stats['inconsistent'] = inner and stats['feasible'] < n_samples
    if stats['inconsistent']:
        logger.error(f"{report.case}: max_feas={report.max_feas:.3e} but only "
                     f"{stats['feasible']}/{n_samples} samples disaggregate")
    _judge(report, inner and stats['feasible'] == n_samples)
    report.notes = ';'.join(filter(None, [report.notes, f"disaggregated={stats['feasible']}/{n_samples}"]))
    return report, stats
