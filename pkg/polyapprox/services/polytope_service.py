"""
Queries and maintenance for the learned polytope P(A, b): row normalization,
support points, projections, active sets, the nonemptiness repair used during
training and uniform sampling.
"""
import logging
from typing import Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import (
    EmptyPolytopeError, UnboundedPolytopeError, UsageError, ZeroRowError,
)
from polyapprox.models import ActiveSet, LinearSystem, Polytope
from polyapprox.services import solver_service

logger = logging.getLogger(__name__)

# Slack added on top of the measured violation when a collapsed polytope is inflated
REPAIR_MARGIN = 1e-9


def normalize_rows(P: Polytope) -> Polytope:
    """Divides every row of A, and the matching entry of b, by the row norm."""
    norms = np.linalg.norm(P.A, axis=1)
    zero = np.flatnonzero(norms < Config.ROW_EPS)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    return Polytope(P.A / norms[:, None], P.b / norms, P.scale.copy(), P.offset.copy())


def _direction(P: Polytope, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != P.n:
        raise UsageError(f"direction has {v.size} entries, polytope dimension is {P.n}")
    return v


def support_pt(P: Polytope, v) -> np.ndarray:
    outcome = solver_service.solve_lp(_direction(P, v), P.system())
    if outcome.status == 'unbounded':
        raise UnboundedPolytopeError(f"Polytope is unbounded along direction {np.round(v, 6).tolist()}")
    if outcome.status == 'infeasible':
        raise EmptyPolytopeError("Polytope is empty")
    return outcome.point


def project_pt(P: Polytope, z) -> np.ndarray:
    return solver_service.project_qp(_direction(P, z), P.system())


def active_at(P: Polytope, x, act_tol: float = Config.ACT_TOL) -> ActiveSet:
    x = _direction(P, x)
    residual = np.abs(P.A @ x - P.b)
    return ActiveSet(indices=[int(j) for j in np.flatnonzero(residual <= act_tol)], point=x)


def contains(P: Polytope, x, tol: float = Config.FEAS_TOL) -> bool:
    return bool(np.all(P.A @ np.asarray(x, dtype=float) <= P.b + tol))


def is_bounded(A) -> bool:
    """
    {x | A x <= b} is bounded (for any b making it nonempty) iff the rows positively
    span R^n: they have rank n and some y >= 1 satisfies A^T y = 0.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    M, n = A.shape
    if M < n + 1 or np.linalg.matrix_rank(A) < n:
        return False
    dependence = LinearSystem(np.vstack([A.T, -A.T, -np.eye(M)]),
                              np.concatenate([np.zeros(2 * n), -np.ones(M)]))
    return solver_service.solve_lp(np.zeros(M), dependence).status != 'infeasible'


def chebyshev(P: Polytope) -> Tuple[np.ndarray, float]:
    return solver_service.chebyshev_center(P.system())


def repair_nonempty(P: Polytope) -> Tuple[Polytope, float]:
    """
    Inflates b uniformly when the polytope has collapsed. Returns the (possibly)
    repaired polytope and the inflation applied, 0 when none was needed.
    """
    _, radius = solver_service.chebyshev_center(P.system(), allow_negative=True)
    if radius >= 0:
        return P, 0.0
    inflation = -radius + REPAIR_MARGIN
    logger.warning(f"Polytope collapsed (Chebyshev radius {radius:.3e}); inflating b by {inflation:.3e}")
    return Polytope(P.A, P.b + inflation, P.scale, P.offset), inflation


def initial_directions(n: int, M: int, mode: str, rng: np.random.Generator,
                       max_tries: int = 100) -> np.ndarray:
    """
    Unit rows for the initial A.
    axes: +-e_i first, random unit rows beyond 2n.
    rotated: +-Q e_i for a random orthogonal Q, then random rows.
    random: random unit rows, redrawn until they bound a polytope.
    """
    if M < n + 1:
        raise UsageError(f"M={M} hyperplanes cannot bound a polytope in {n} dimensions")

    def random_rows(k):
        rows = rng.standard_normal((k, n))
        return rows / np.linalg.norm(rows, axis=1, keepdims=True)

    if mode not in ('axes', 'rotated', 'random'):
        raise UsageError(f"Unknown init mode '{mode}'")
    if mode in ('axes', 'rotated'):
        basis = np.eye(n)
        if mode == 'rotated':
            Q, R = np.linalg.qr(rng.standard_normal((n, n)))
            basis = (Q * np.sign(np.diag(R))).T
        fixed = np.vstack([basis, -basis])[np.argsort(np.r_[np.arange(n) * 2, np.arange(n) * 2 + 1])]
        if M <= 2 * n:
            A0 = fixed[:M]
        else:
            A0 = np.vstack([fixed, random_rows(M - 2 * n)])
        if is_bounded(A0):
            return A0
        logger.info("Axis rows do not bound a polytope for this M; drawing random rows instead")
        mode = 'random'
    if mode == 'random':
        for _ in range(max_tries):
            A0 = random_rows(M)
            if is_bounded(A0):
                return A0
    raise UsageError(f"Could not draw {M} bounded initial directions in {n} dimensions")


def hit_and_run(P: Polytope, n_samples: int, rng: np.random.Generator,
                burn_in: int = 1000, thin: int = 1) -> np.ndarray:
    """
    Approximately uniform samples from P by hit-and-run started at the Chebyshev
    center: pick a random direction, intersect the line with P, move to a uniform
    point of the chord.
    """
    x, radius = chebyshev(P)
    if radius <= 0:
        raise EmptyPolytopeError("Cannot sample a polytope with empty interior")
    samples = np.empty((n_samples, P.n))
    total = burn_in + n_samples * thin
    kept = 0
    for step in range(total):
        d = rng.standard_normal(P.n)
        Ad = P.A @ d
        slack = P.b - P.A @ x
        with np.errstate(divide='ignore'):
            bounds = slack / Ad
        upper = bounds[Ad > 0].min() if np.any(Ad > 0) else np.inf
        lower = bounds[Ad < 0].max() if np.any(Ad < 0) else -np.inf
        if not (np.isfinite(upper) and np.isfinite(lower)):
            raise UnboundedPolytopeError("Hit-and-run chord is unbounded")
        x = x + rng.uniform(lower, upper) * d
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            samples[kept] = x
            kept += 1
    return samples
