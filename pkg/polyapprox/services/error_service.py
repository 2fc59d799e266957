"""
Directional feasibility and optimality errors between a polytope P and a region,
and their Monte-Carlo averages over Gaussian directions.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List

import numpy as np

from config import Config
from polyapprox.exceptions import UsageError
from polyapprox.models import DirectionalSample, ErrorEstimate, Polytope, Region
from polyapprox.services import polytope_service

logger = logging.getLogger(__name__)


def sample_direction(rng: np.random.Generator, n: int, dir_eps: float = Config.DIR_EPS) -> np.ndarray:
    """Standard normal direction, redrawn while its norm is at or below dir_eps."""
    while True:
        v = rng.standard_normal(n)
        if np.linalg.norm(v) > dir_eps:
            return v


def dir_errors(P: Polytope, region: Region, theta, v) -> DirectionalSample:
    """
    Feasibility error: squared distance from P's support point x' along v to its
    projection onto the region. Optimality error: squared distance from the region's
    support point z' to its projection onto P. P is compared in raw coordinates.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if np.linalg.norm(v) <= Config.DIR_EPS:
        raise UsageError("direction is (numerically) zero")
    raw = P.to_raw()
    x_prime = polytope_service.support_pt(raw, v)
    z_star = region.project(theta, x_prime)
    z_prime, _ = region.support(theta, v)
    x_star = polytope_service.project_pt(raw, z_prime)
    return DirectionalSample(
        v=v, x_prime=x_prime, z_star=z_star, z_prime=z_prime, x_star=x_star,
        e_feas=float(np.sum((z_star - x_prime) ** 2)),
        e_opt=float(np.sum((x_star - z_prime) ** 2)),
    )


def summarize(samples: List[DirectionalSample], seed: int) -> ErrorEstimate:
    feas = np.array([s.e_feas for s in samples])
    opt = np.array([s.e_opt for s in samples])
    k = len(samples)
    se_feas = float(feas.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    se_opt = float(opt.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    return ErrorEstimate(
        mean_feas=float(feas.mean()), mean_opt=float(opt.mean()),
        max_feas=float(feas.max()), max_opt=float(opt.max()),
        n_dirs=k, seed=int(seed), se_feas=se_feas, se_opt=se_opt,
    )


def estimate_errors(P: Polytope, region: Region, theta, n_dirs: int, seed: int,
                    workers: int = 1) -> ErrorEstimate:
    """
    Averages the directional errors over n_dirs i.i.d. standard normal directions.
    All directions are drawn up front from one seeded generator and results are
    reduced in draw order, so the estimate does not depend on `workers`.
    """
    if n_dirs < 1:
        raise UsageError("n_dirs must be at least 1")
    if P.n != region.dim:
        raise UsageError(f"polytope dimension {P.n} does not match region dimension {region.dim}")
    rng = np.random.default_rng(seed)
    directions = [sample_direction(rng, P.n) for _ in range(n_dirs)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(lambda v: dir_errors(P, region, theta, v), directions))
    else:
        samples = [dir_errors(P, region, theta, v) for v in directions]
    return summarize(samples, seed)
