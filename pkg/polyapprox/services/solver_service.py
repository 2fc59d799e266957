"""
Dense linear-program and projection solvers used by every oracle and by the polytope
core. Everything here is a pure function of its inputs, except that `nearest_point`
extends the vertex pool it is handed.
"""
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import (
    ConvergenceError, CyclingError, EmptyPolytopeError, InfeasibleRegionError,
    UnboundedPolytopeError, UsageError,
)
from polyapprox.models import LinearSystem, LpOutcome, QpOutcome

logger = logging.getLogger(__name__)


def _simplex(A: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: list,
             allowed: np.ndarray, pivots: int) -> Tuple[str, np.ndarray, int]:
    """
    Revised simplex on min cost.x s.t. A x = b, x >= 0 starting from a feasible basis.
    Entering and leaving variables follow Bland's rule. Returns (status, B^-1, pivots).
    """
    tol = Config.LP_PIVOT_TOL
    Binv = np.linalg.inv(A[:, basis])
    since_refactor = 0
    while True:
        x_B = np.maximum(Binv @ b, 0.0)
        y = cost[basis] @ Binv
        reduced = cost - y @ A
        reduced[basis] = 0.0
        reduced[~allowed] = 0.0
        entering = np.flatnonzero(reduced < -tol)
        if entering.size == 0:
            return 'optimal', Binv, pivots
        j = int(entering[0])

        d = Binv @ A[:, j]
        rows = np.flatnonzero(d > tol)
        if rows.size == 0:
            return 'unbounded', Binv, pivots
        ratios = x_B[rows] / d[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol]
        i = int(min(tied, key=lambda r: basis[r]))

        if pivots >= Config.LP_MAX_PIVOTS:
            raise CyclingError(pivots)
        pivot_row = Binv[i] / d[i]
        Binv -= np.outer(d, pivot_row)
        Binv[i] = pivot_row
        basis[i] = j
        pivots += 1
        since_refactor += 1
        if since_refactor >= Config.LP_REFACTOR_EVERY:
            Binv = np.linalg.inv(A[:, basis])
            since_refactor = 0


def solve_lp(objective, sys: LinearSystem) -> LpOutcome:
    """
    Maximize objective.x over {x | G x <= h} with x free.

    The free variables are split into x+ - x-, every row gets a slack, and rows with a
    negative right-hand side start from an artificial variable (two-phase method).
    """
    c = np.asarray(objective, dtype=float).reshape(-1)
    if c.size != sys.cols:
        raise UsageError(f"objective has {c.size} entries but the system has {sys.cols} columns")
    G, h = sys.G, sys.h
    m, n = G.shape

    A = np.hstack([G, -G, np.eye(m)])
    b = h.copy()
    flipped = b < 0
    A[flipped] *= -1.0
    b[flipped] *= -1.0
    art_rows = np.flatnonzero(flipped)
    n_struct = 2 * n + m
    if art_rows.size:
        art = np.zeros((m, art_rows.size))
        art[art_rows, np.arange(art_rows.size)] = 1.0
        A = np.hstack([A, art])
    n_total = A.shape[1]

    basis = [2 * n + i for i in range(m)]
    for k, r in enumerate(art_rows):
        basis[r] = n_struct + k

    pivots = 0
    allowed = np.ones(n_total, dtype=bool)
    if art_rows.size:
        phase1 = np.zeros(n_total)
        phase1[n_struct:] = 1.0
        _, Binv, pivots = _simplex(A, b, phase1, basis, allowed, pivots)
        x_B = Binv @ b
        infeasibility = float(sum(x_B[i] for i, j in enumerate(basis) if j >= n_struct))
        if infeasibility > Config.FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return LpOutcome(status='infeasible', pivots=pivots)
        # Drive zero-valued artificials out of the basis before phase two.
        for i, j in enumerate(basis):
            if j < n_struct:
                continue
            row = Binv[i] @ A[:, :n_struct]
            row[basis_mask(basis, n_struct)] = 0.0
            candidates = np.flatnonzero(np.abs(row) > Config.LP_PIVOT_TOL)
            if candidates.size:
                basis[i] = int(candidates[0])
                Binv = np.linalg.inv(A[:, basis])
        allowed[n_struct:] = False

    cost = np.zeros(n_total)
    cost[:n] = -c
    cost[n:2 * n] = c
    status, Binv, pivots = _simplex(A, b, cost, basis, allowed, pivots)
    if status == 'unbounded':
        return LpOutcome(status='unbounded', pivots=pivots)

    x = np.zeros(n_total)
    x[basis] = Binv @ b
    point = x[:n] - x[n:2 * n]
    return LpOutcome(status='optimal', point=point, value=float(c @ point), pivots=pivots)


def basis_mask(basis: Sequence[int], width: int) -> np.ndarray:
    mask = np.zeros(width, dtype=bool)
    mask[[j for j in basis if j < width]] = True
    return mask


def chebyshev_center(sys: LinearSystem, allow_negative: bool = False) -> Tuple[np.ndarray, float]:
    """
    Center and radius of the largest ball inside {x | G x <= h}.

    With allow_negative the radius is left free: a negative radius then measures the
    uniform relaxation of h needed to make the set nonempty.
    """
    G, h = sys.G, sys.h
    norms = np.linalg.norm(G, axis=1, keepdims=True)
    G_ext = np.hstack([G, norms])
    h_ext = h
    if not allow_negative:
        radius_row = np.zeros((1, G.shape[1] + 1))
        radius_row[0, -1] = -1.0
        G_ext = np.vstack([G_ext, radius_row])
        h_ext = np.append(h, 0.0)
    objective = np.zeros(G.shape[1] + 1)
    objective[-1] = 1.0
    outcome = solve_lp(objective, LinearSystem(G_ext, h_ext))
    if outcome.status == 'infeasible':
        raise EmptyPolytopeError("Polytope is empty (Chebyshev LP infeasible)")
    if outcome.status == 'unbounded':
        raise UnboundedPolytopeError("Polytope is unbounded (Chebyshev radius unbounded)")
    return outcome.point[:-1], float(outcome.point[-1])


def _require_feasible(sys: LinearSystem, context: str):
    if solve_lp(np.zeros(sys.cols), sys).status == 'infeasible':
        raise InfeasibleRegionError(f"Projection system is infeasible ({context})")


def hildreth(target, sys: LinearSystem, weights=None, mu0=None) -> QpOutcome:
    """
    Minimize 1/2 sum_i w_i (x_i - target_i)^2 subject to G x <= h by coordinate ascent
    on the dual multipliers, one constraint at a time.

    Stops once the primal residual is below QP_TOL and complementary slackness
    (the duality gap) is below QP_GAP_TOL. When the residual stalls over a QP_WINDOW
    window, or the sweep cap is reached, a phase-one LP decides whether the system
    is infeasible (InfeasibleRegionError) or merely slow (ConvergenceError).
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    G, h = sys.G, sys.h
    if target.size != sys.cols:
        raise UsageError(f"target has {target.size} entries but the system has {sys.cols} columns")
    winv = np.ones_like(target) if weights is None else 1.0 / np.asarray(weights, dtype=float)
    GW = G * winv
    denom = np.einsum('ij,ij->i', G, GW)

    if mu0 is None:
        if np.all(G @ target - h <= Config.QP_TOL):
            return QpOutcome(point=target.copy(), multipliers=np.zeros(sys.rows), sweeps=0, gap=0.0)
        mu = np.zeros(sys.rows)
    else:
        mu = np.asarray(mu0, dtype=float).copy()
    x = target - GW.T @ mu

    G_rows = list(G)
    GW_rows = list(GW)
    prev_residual = residual = np.inf
    gap = np.inf
    feasible = False
    for sweep in range(1, Config.QP_MAX_SWEEPS + 1):
        for j in range(sys.rows):
            new = mu[j] + (G_rows[j] @ x - h[j]) / denom[j]
            if new < 0.0:
                new = 0.0
            delta = new - mu[j]
            if delta != 0.0:
                x -= delta * GW_rows[j]
                mu[j] = new
        slack = h - G @ x
        residual = max(0.0, float(-slack.min()))
        gap = abs(float(mu @ slack))
        if residual <= Config.QP_TOL and gap <= Config.QP_GAP_TOL:
            return QpOutcome(point=x, multipliers=mu, sweeps=sweep, gap=gap)
        if sweep % Config.QP_WINDOW == 0:
            if not feasible and residual > Config.QP_TOL and residual >= 0.999 * prev_residual:
                _require_feasible(sys, f"residual {residual:.3e} stalled after {sweep} sweeps")
                feasible = True
            prev_residual = residual
    if not feasible:
        _require_feasible(sys, f"sweep cap reached with residual {residual:.3e}")
    raise ConvergenceError(f"Hildreth did not converge in {Config.QP_MAX_SWEEPS} sweeps", gap)


# Weights at or below this are treated as zero when a vertex leaves the working set
AFFINE_EPS = 1e-12


def _affine_weights(points: np.ndarray) -> np.ndarray:
    """Weights, summing to one, of the smallest-norm point in the affine hull of the rows of `points`."""
    k = points.shape[0]
    kkt = np.ones((k + 1, k + 1))
    kkt[:k, :k] = points @ points.T
    kkt[k, k] = 0.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    return np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]


def nearest_point(target, support: Callable[[np.ndarray], np.ndarray],
                  pool: Optional[List[np.ndarray]] = None) -> np.ndarray:
    """
    Euclidean projection of `target` onto a polytope known only through `support`,
    which maps a unit direction to a vertex maximizing it.

    Minimum-norm-point method on the polytope shifted by -target: a working set of at
    most dim+1 vertices, the current point a convex combination of them. Each major
    step adds the vertex most opposed to the current point; minor steps move to the
    smallest-norm point of the working set's affine hull, backing off to the convex
    hull and dropping vertices whose weight reaches zero. Stops when no vertex lowers
    the squared distance by more than QP_GAP_TOL.

    `pool`, when given, holds vertices from earlier calls: they are tried before the
    oracle, and vertices the oracle returns are appended to it.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    gap_tol = Config.QP_GAP_TOL

    def oracle(direction):
        vertex = np.asarray(support(direction), dtype=float).reshape(-1)
        if pool is not None:
            pool.append(vertex)
        return vertex - target

    if pool:
        known = np.asarray(list(pool)) - target
        first = known[int(np.argmin(np.einsum('ij,ij->i', known, known)))]
    else:
        norm = np.linalg.norm(target)
        first = oracle(target / norm if norm > 0 else np.eye(target.size)[0])
    corral = first[None, :]
    weights = np.ones(1)
    x = first.copy()

    gap = np.inf
    for _ in range(Config.LIFT_MAX_ROUNDS):
        norm2 = float(x @ x)
        if norm2 <= AFFINE_EPS ** 2:
            return target + x
        candidate = None
        if pool:
            known = np.asarray(list(pool)) - target
            best = known[int(np.argmin(known @ x))]
            if norm2 - float(x @ best) > gap_tol:
                candidate = best
        if candidate is None:
            candidate = oracle(-x / np.sqrt(norm2))
        gap = norm2 - float(x @ candidate)
        if gap <= gap_tol:
            return target + x
        if np.any(np.all(np.abs(corral - candidate) <= AFFINE_EPS, axis=1)):
            logger.debug(f"Nearest point stalled with gap {gap:.3e}")
            return target + x

        corral = np.vstack([corral, candidate])
        weights = np.append(weights, 0.0)
        while True:
            alpha = _affine_weights(corral)
            if np.all(alpha > AFFINE_EPS):
                weights = alpha
                break
            low = alpha <= AFFINE_EPS
            drop = weights[low] - alpha[low]
            ratios = np.where(drop > 0, weights[low] / np.where(drop > 0, drop, 1.0), 1.0)
            theta = min(1.0, float(ratios.min()))
            weights = theta * alpha + (1.0 - theta) * weights
            keep = weights > AFFINE_EPS
            if keep.all():
                keep[int(np.argmin(weights))] = False
            corral, weights = corral[keep], weights[keep]
            weights = weights / weights.sum()
        x_new = weights @ corral
        if float(x_new @ x_new) >= norm2:
            logger.debug(f"Nearest point made no progress with gap {gap:.3e}")
            return target + x
        x = x_new
    raise ConvergenceError(f"Nearest point did not settle in {Config.LIFT_MAX_ROUNDS} rounds", gap)


def project_qp(target, sys: LinearSystem, selector: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Nearest point, in the coordinates named by `selector`, of {full | G full <= h}.

    Without a selector (or with every column selected) this is the Euclidean projection
    by Hildreth's method. With a strict subset the remaining columns are free, so the
    target is projected onto the shadow of the system on the selected coordinates,
    whose vertices come from LPs over the full system. The returned vector holds the
    selected coordinates only.
    """
    target = np.asarray(target, dtype=float).reshape(-1)
    if selector is None or len(selector) == sys.cols and list(selector) == list(range(sys.cols)):
        return hildreth(target, sys).point
    sel = np.asarray(selector, dtype=int)
    if sel.size != target.size:
        raise UsageError(f"selector names {sel.size} columns but target has {target.size} entries")
    if sel.size and (sel.min() < 0 or sel.max() >= sys.cols or np.unique(sel).size != sel.size):
        raise UsageError("selector must hold distinct column indices of the system")

    def shadow_vertex(direction):
        objective = np.zeros(sys.cols)
        objective[sel] = direction
        outcome = solve_lp(objective, sys)
        if outcome.status == 'infeasible':
            raise InfeasibleRegionError("Projection system is infeasible")
        if outcome.status == 'unbounded':
            raise UnboundedPolytopeError(f"Shadow is unbounded along {np.round(direction, 6).tolist()}")
        return outcome.point[sel]

    return nearest_point(target, shadow_vertex)
