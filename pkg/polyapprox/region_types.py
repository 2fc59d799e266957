"""
Concrete region kinds.
Each class parses its own RegionSpec document and implements the support and
projection oracles for its geometry.
"""
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import ConvexHull

from polyapprox.exceptions import (
    EmptyRegionError, SpecError, UnboundedRegionError, UsageError,
)
from polyapprox.models import LinearSystem, Region, ThetaBox
from polyapprox.services import solver_service

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _require(data: dict, key: str, kind: str):
    if key not in data:
        raise SpecError(f"{kind}: missing required field '{key}'")
    return data[key]


def _array(value, kind: str, key: str, shape: Optional[Tuple] = None) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"{kind}: field '{key}' is not numeric")
    if not np.all(np.isfinite(arr)):
        raise SpecError(f"{kind}: field '{key}' contains non-finite numbers")
    if shape is not None and arr.shape != shape:
        raise SpecError(f"{kind}: field '{key}' must have shape {shape}, got {arr.shape}")
    return arr


def _common(data: dict, kind: str) -> Tuple[Optional[ThetaBox], Dict[str, np.ndarray]]:
    """Theta box and modulation block shared by every kind."""
    box = None
    if data.get('theta_box') is not None:
        tb = data['theta_box']
        try:
            box = ThetaBox(_array(_require(tb, 'lower', kind), kind, 'theta_box.lower'),
                           _array(_require(tb, 'upper', kind), kind, 'theta_box.upper'))
        except UsageError as e:
            raise SpecError(f"{kind}: {e}")
    modulation = {name: _array(mat, kind, f'modulation.{name}')
                  for name, mat in (data.get('modulation') or {}).items()}
    return box, modulation


def _lst(arr: np.ndarray):
    return np.asarray(arr, dtype=float).tolist()


class SpecRegion(Region):
    """Adds the shared spec document fields to a Region."""

    def _spec_header(self) -> dict:
        return {'schema': SCHEMA_VERSION, 'type': self.kind}

    def _spec_footer(self, out: dict) -> dict:
        if self.theta_box is not None:
            out['theta_box'] = {'lower': _lst(self.theta_box.lower), 'upper': _lst(self.theta_box.upper)}
        if self.modulation:
            out['modulation'] = {name: _lst(mat) for name, mat in sorted(self.modulation.items())}
        return out


class HypercubeRegion(SpecRegion):
    """Axis-aligned box [lo, hi]."""
    kind = 'hypercube'
    per_axis_ok = True

    def __init__(self, lo, hi, theta_box=None, modulation=None):
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        super().__init__(lo.size, {'lo': lo, 'hi': hi}, theta_box, modulation)

    def _validate(self, params):
        if params['lo'].shape != params['hi'].shape:
            raise SpecError("hypercube: lo and hi differ in length")
        if np.any(params['lo'] > params['hi']):
            raise EmptyRegionError("hypercube: lo exceeds hi in some coordinate")

    def _support(self, params, v):
        return np.where(v >= 0, params['hi'], params['lo'])

    def _project(self, params, z0):
        return np.clip(z0, params['lo'], params['hi'])

    def affine_image(self, scale, offset):
        lo, hi = self.base_params['lo'], self.base_params['hi']
        modulation = {k: m / np.asarray(scale)[:, None] for k, m in self.modulation.items()}
        return HypercubeRegion((lo - offset) / scale, (hi - offset) / scale, self.theta_box, modulation)

    def to_spec_data(self):
        out = self._spec_header()
        out.update({'n': self.dim, 'lo': _lst(self.base_params['lo']), 'hi': _lst(self.base_params['hi'])})
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        n = int(_require(data, 'n', cls.kind))
        if n < 1:
            raise SpecError("hypercube: n must be at least 1")
        lo = np.broadcast_to(_array(data.get('lo', 0.0), cls.kind, 'lo'), (n,)).copy()
        hi = np.broadcast_to(_array(data.get('hi', 1.0), cls.kind, 'hi'), (n,)).copy()
        return cls(lo, hi, *_common(data, cls.kind))


class HypersphereRegion(SpecRegion):
    """Euclidean ball of the given radius."""
    kind = 'hypersphere'

    def __init__(self, center, radius, theta_box=None, modulation=None):
        center = np.asarray(center, dtype=float).reshape(-1)
        super().__init__(center.size, {'center': center, 'radius': np.atleast_1d(float(radius))},
                         theta_box, modulation)

    def _validate(self, params):
        if params['radius'][0] <= 0:
            raise EmptyRegionError("hypersphere: radius must be positive")

    def _support(self, params, v):
        return params['center'] + params['radius'][0] * v / np.linalg.norm(v)

    def _project(self, params, z0):
        c, r = params['center'], params['radius'][0]
        dist = np.linalg.norm(z0 - c)
        if dist <= r:
            return z0.copy()
        return c + r * (z0 - c) / dist

    def to_spec_data(self):
        out = self._spec_header()
        out.update({'n': self.dim, 'radius': float(self.base_params['radius'][0]),
                    'center': _lst(self.base_params['center'])})
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        n = int(_require(data, 'n', cls.kind))
        if n < 1:
            raise SpecError("hypersphere: n must be at least 1")
        center = _array(data.get('center', np.zeros(n)), cls.kind, 'center', (n,))
        radius = float(data.get('radius', 1.0))
        return cls(center, radius, *_common(data, cls.kind))


def _rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


class EllipseRegion(SpecRegion):
    """
    Ellipse with semi-axes `axes`, rotated counterclockwise by `angle` radians about `center`.
    """
    kind = 'ellipse2d'

    def __init__(self, center, axes, angle=0.0, theta_box=None, modulation=None):
        super().__init__(2, {'center': np.asarray(center, dtype=float).reshape(2),
                             'axes': np.asarray(axes, dtype=float).reshape(2),
                             'angle': np.atleast_1d(float(angle))}, theta_box, modulation)

    def _validate(self, params):
        if np.any(params['axes'] <= 0):
            raise EmptyRegionError("ellipse2d: semi-axes must be positive")

    def _support(self, params, v):
        R = _rotation(params['angle'][0])
        a2u = params['axes'] ** 2 * (R.T @ v)
        local = a2u / np.sqrt(a2u @ (R.T @ v))
        return params['center'] + R @ local

    def _project(self, params, z0):
        R = _rotation(params['angle'][0])
        a2 = params['axes'] ** 2
        y = R.T @ (z0 - params['center'])
        if np.sum(y ** 2 / a2) <= 1.0:
            return z0.copy()

        # Lagrange condition x_i = a_i^2 y_i / (a_i^2 + t); t is the root of the boundary equation.
        def boundary(t):
            return np.sum(a2 * y ** 2 / (a2 + t) ** 2) - 1.0

        upper = float(np.sqrt(a2.max()) * np.linalg.norm(y))
        t = brentq(boundary, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        return params['center'] + R @ (a2 * y / (a2 + t))

    def to_spec_data(self):
        out = self._spec_header()
        out.update({'center': _lst(self.base_params['center']), 'axes': _lst(self.base_params['axes']),
                    'angle': float(self.base_params['angle'][0])})
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        center = _array(data.get('center', [0.0, 0.0]), cls.kind, 'center', (2,))
        axes = _array(_require(data, 'axes', cls.kind), cls.kind, 'axes', (2,))
        return cls(center, axes, float(data.get('angle', 0.0)), *_common(data, cls.kind))


def regular_polygon(k: int, radius: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Vertices (counterclockwise) of a regular k-gon inscribed in a circle."""
    angles = phase + 2.0 * np.pi * np.arange(k) / k
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


class PolygonRegion(SpecRegion):
    """Convex polygon given by its vertices in counterclockwise order."""
    kind = 'polygon2d'
    per_axis_ok = True

    def __init__(self, vertices, theta_box=None, modulation=None):
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        super().__init__(2, {'vertices': vertices}, theta_box, modulation)

    def _validate(self, params):
        V = params['vertices']
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise SpecError("polygon2d: need at least 3 vertices with 2 coordinates each")
        edges = np.roll(V, -1, axis=0) - V
        turns = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(turns <= 0):
            raise SpecError("polygon2d: vertices must form a strictly convex counterclockwise polygon")

    def _support(self, params, v):
        V = params['vertices']
        return V[int(np.argmax(V @ v))].copy()

    def _project(self, params, z0):
        V = params['vertices']
        W = np.roll(V, -1, axis=0)
        edges = W - V
        rel = z0 - V
        if np.all(edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0] >= 0):
            return z0.copy()
        t = np.clip(np.einsum('ij,ij->i', rel, edges) / np.einsum('ij,ij->i', edges, edges), 0.0, 1.0)
        candidates = V + t[:, None] * edges
        return candidates[int(np.argmin(np.linalg.norm(candidates - z0, axis=1)))]

    def affine_image(self, scale, offset):
        V = self.base_params['vertices']
        modulation = {k: m / np.tile(np.asarray(scale), V.shape[0])[:, None]
                      for k, m in self.modulation.items()}
        return PolygonRegion((V - offset) / scale, self.theta_box, modulation)

    def to_spec_data(self):
        out = self._spec_header()
        out['vertices'] = _lst(self.base_params['vertices'])
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        if 'vertices' in data:
            vertices = _array(data['vertices'], cls.kind, 'vertices')
        elif 'sides' in data:
            vertices = regular_polygon(int(data['sides']), float(data.get('radius', 1.0)),
                                       float(data.get('phase', 0.0)))
        else:
            raise SpecError("polygon2d: give either 'vertices' or 'sides'")
        return cls(vertices, *_common(data, cls.kind))


class DiskDifferenceRegion(SpecRegion):
    """
    Closed disk minus an open disk. Nonconvex: projection returns the nearest point of
    the set itself, which may lie on the concave (cut) boundary.
    """
    kind = 'disk_difference'
    convex = False

    def __init__(self, outer_center, outer_radius, cut_center, cut_radius,
                 theta_box=None, modulation=None):
        super().__init__(2, {
            'outer_center': np.asarray(outer_center, dtype=float).reshape(2),
            'outer_radius': np.atleast_1d(float(outer_radius)),
            'cut_center': np.asarray(cut_center, dtype=float).reshape(2),
            'cut_radius': np.atleast_1d(float(cut_radius)),
        }, theta_box, modulation)

    @staticmethod
    def _geometry(params):
        return (params['outer_center'], params['outer_radius'][0],
                params['cut_center'], params['cut_radius'][0])

    def _validate(self, params):
        c0, R, c1, r = self._geometry(params)
        if R <= 0 or r <= 0:
            raise EmptyRegionError("disk_difference: radii must be positive")
        if np.linalg.norm(c1 - c0) + R <= r:
            raise EmptyRegionError("disk_difference: the cut disk covers the outer disk")

    @staticmethod
    def _corners(c0, R, c1, r) -> List[np.ndarray]:
        d = float(np.linalg.norm(c1 - c0))
        if d == 0.0 or d > R + r or d < abs(R - r):
            return []
        u = (c1 - c0) / d
        a = (R ** 2 - r ** 2 + d ** 2) / (2.0 * d)
        height = np.sqrt(max(R ** 2 - a ** 2, 0.0))
        base = c0 + a * u
        perp = np.array([-u[1], u[0]])
        return [base + height * perp, base - height * perp]

    @staticmethod
    def _radial(center, radius, toward, fallback) -> np.ndarray:
        diff = toward - center
        norm = np.linalg.norm(diff)
        direction = diff / norm if norm > 0 else fallback
        return center + radius * direction

    def _contains(self, params, z, slack=1e-12) -> bool:
        c0, R, c1, r = self._geometry(params)
        return np.linalg.norm(z - c0) <= R + slack and np.linalg.norm(z - c1) >= r - slack

    def _support(self, params, v):
        c0, R, c1, r = self._geometry(params)
        unit = v / np.linalg.norm(v)
        candidates = list(self._corners(c0, R, c1, r))
        outer = c0 + R * unit
        if np.linalg.norm(outer - c1) >= r:
            candidates.append(outer)
        cut = c1 + r * unit
        if np.linalg.norm(cut - c0) <= R:
            candidates.append(cut)
        values = [v @ p for p in candidates]
        return candidates[int(np.argmax(values))].copy()

    def _project(self, params, z0):
        if self._contains(params, z0, slack=0.0):
            return z0.copy()
        c0, R, c1, r = self._geometry(params)
        away = c0 - c1
        away = away / np.linalg.norm(away) if np.linalg.norm(away) > 0 else np.array([1.0, 0.0])
        candidates = list(self._corners(c0, R, c1, r))
        outer = self._radial(c0, R, z0, -away)
        if np.linalg.norm(outer - c1) >= r:
            candidates.append(outer)
        cut = self._radial(c1, r, z0, away)
        if np.linalg.norm(cut - c0) <= R:
            candidates.append(cut)
        dists = [np.linalg.norm(p - z0) for p in candidates]
        return candidates[int(np.argmin(dists))].copy()

    def boundary_points(self, theta=None, count: int = 10000) -> np.ndarray:
        """Points sampled along the boundary of the set: both circle arcs plus the corners."""
        params = self.params_at(theta)
        c0, R, c1, r = self._geometry(params)
        angles = 2.0 * np.pi * np.arange(count) / count
        ring = np.column_stack([np.cos(angles), np.sin(angles)])
        outer = c0 + R * ring
        outer = outer[np.linalg.norm(outer - c1, axis=1) >= r]
        inner = c1 + r * ring
        inner = inner[np.linalg.norm(inner - c0, axis=1) <= R]
        parts = [outer, inner] + [c[None, :] for c in self._corners(c0, R, c1, r)]
        return np.vstack(parts)

    def hull_vertices(self, theta=None, count: int = 10000) -> np.ndarray:
        """Vertices of the convex hull of densely sampled boundary points."""
        pts = self.boundary_points(theta, count)
        return pts[ConvexHull(pts).vertices]

    def to_spec_data(self):
        out = self._spec_header()
        p = self.base_params
        out.update({'outer_center': _lst(p['outer_center']), 'outer_radius': float(p['outer_radius'][0]),
                    'cut_center': _lst(p['cut_center']), 'cut_radius': float(p['cut_radius'][0])})
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        return cls(_array(data.get('outer_center', [0.0, 0.0]), cls.kind, 'outer_center', (2,)),
                   float(data.get('outer_radius', 1.0)),
                   _array(_require(data, 'cut_center', cls.kind), cls.kind, 'cut_center', (2,)),
                   float(_require(data, 'cut_radius', cls.kind)),
                   *_common(data, cls.kind))


def _system(G, h, kind: str) -> LinearSystem:
    try:
        return LinearSystem(G, h)
    except UsageError as e:
        raise SpecError(f"{kind}: {e}")


def _lp_point(objective, sys: LinearSystem, kind: str) -> np.ndarray:
    outcome = solver_service.solve_lp(objective, sys)
    if outcome.status == 'infeasible':
        raise EmptyRegionError(f"{kind}: defining system is infeasible")
    if outcome.status == 'unbounded':
        raise UnboundedRegionError(f"{kind}: region is unbounded along the requested direction")
    return outcome.point


class LinearLiftedRegion(SpecRegion):
    """
    {x | exists y: G [x; y] <= h}, where the columns listed in `x_dims` carry x and
    every other column is an auxiliary variable.
    """
    kind = 'linear_lifted'
    per_axis_ok = True

    def __init__(self, G, h, x_dims, theta_box=None, modulation=None):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        self.x_dims = [int(i) for i in x_dims]
        if not self.x_dims:
            raise SpecError("linear_lifted: x_dims is empty")
        if min(self.x_dims) < 0 or max(self.x_dims) >= G.shape[1] or len(set(self.x_dims)) != len(self.x_dims):
            raise SpecError("linear_lifted: x_dims must be distinct column indices of G")
        super().__init__(len(self.x_dims), {'G': G, 'h': np.asarray(h, dtype=float).reshape(-1)},
                         theta_box, modulation)
        self.per_axis_ok = not self.modulation

    def system(self, theta=None) -> LinearSystem:
        params = self.params_at(theta)
        return _system(params['G'], params['h'], self.kind)

    def _validate(self, params):
        _system(params['G'], params['h'], self.kind)

    def _support(self, params, v):
        sys = _system(params['G'], params['h'], self.kind)
        objective = np.zeros(sys.cols)
        objective[self.x_dims] = v
        return _lp_point(objective, sys, self.kind)[self.x_dims]

    def _project(self, params, z0):
        sys = _system(params['G'], params['h'], self.kind)
        return solver_service.project_qp(z0, sys, self.x_dims)

    def affine_image(self, scale, offset):
        G, h = self.base_params['G'], self.base_params['h']
        Gx = G[:, self.x_dims]
        G_new = G.copy()
        G_new[:, self.x_dims] = Gx * scale
        if self.modulation:
            raise UsageError("linear_lifted: per-axis normalization of a modulated system is not supported")
        return LinearLiftedRegion(G_new, h - Gx @ offset, self.x_dims, self.theta_box)

    def to_spec_data(self):
        out = self._spec_header()
        out.update({'G': _lst(self.base_params['G']), 'h': _lst(self.base_params['h']),
                    'x_dims': list(self.x_dims)})
        return self._spec_footer(out)

    @classmethod
    def from_polytope(cls, A, b) -> 'LinearLiftedRegion':
        """The polytope {x | A x <= b} as a region with no auxiliary variables."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A, b, list(range(A.shape[1])))

    @classmethod
    def from_spec_data(cls, data):
        G = _array(_require(data, 'G', cls.kind), cls.kind, 'G')
        h = _array(_require(data, 'h', cls.kind), cls.kind, 'h')
        x_dims = _require(data, 'x_dims', cls.kind)
        if G.ndim != 2:
            raise SpecError("linear_lifted: G must be a matrix")
        return cls(G, h, x_dims, *_common(data, cls.kind))


# Vertices a Minkowski region keeps between projections
VERTEX_POOL_LIMIT = 4096


class MinkowskiRegion(SpecRegion):
    """
    Minkowski sum of per-resource polytopes {p_i | G_i p_i <= h_i}, each over the same
    T coordinates. Parameter names are G0, h0, G1, h1, ... in resource order.
    """
    kind = 'minkowski_linear'
    per_axis_ok = True

    def __init__(self, systems: List[Tuple[np.ndarray, np.ndarray]], theta_box=None, modulation=None):
        if not systems:
            raise SpecError("minkowski_linear: at least one resource is required")
        params = {}
        T = None
        for i, (G, h) in enumerate(systems):
            G = np.atleast_2d(np.asarray(G, dtype=float))
            if T is None:
                T = G.shape[1]
            elif G.shape[1] != T:
                raise SpecError(f"minkowski_linear: resource {i} has {G.shape[1]} columns, expected {T}")
            params[f'G{i}'] = G
            params[f'h{i}'] = np.asarray(h, dtype=float).reshape(-1)
        self.n_resources = len(systems)
        super().__init__(T, params, theta_box, modulation)
        self.per_axis_ok = not self.modulation
        self._vertex_pool: List[np.ndarray] = []

    def resource_systems(self, theta=None) -> List[LinearSystem]:
        return self._systems(self.params_at(theta))

    def _systems(self, params) -> List[LinearSystem]:
        return [_system(params[f'G{i}'], params[f'h{i}'], self.kind) for i in range(self.n_resources)]

    def _validate(self, params):
        self._systems(params)

    def support_parts(self, theta, v) -> List[np.ndarray]:
        """Per-resource support points; their sum is the support point of the sum."""
        v = np.asarray(v, dtype=float).reshape(-1)
        return [_lp_point(v, sys, self.kind) for sys in self.resource_systems(theta)]

    def _support(self, params, v):
        point = np.sum([_lp_point(v, sys, self.kind) for sys in self._systems(params)], axis=0)
        if not self.modulation:
            self._vertex_pool.append(point)
        return point

    def _project(self, params, z0):
        """
        Nearest point of the sum, found from its vertices: a vertex of the sum along v
        is the sum of the resources' vertices along v. Vertices of an unmodulated
        region are pooled across calls.
        """
        systems = self._systems(params)

        def vertex(v):
            return np.sum([_lp_point(v, sys, self.kind) for sys in systems], axis=0)

        pool = None
        if not self.modulation:
            pool = self._vertex_pool
            if len(pool) > VERTEX_POOL_LIMIT:
                del pool[:len(pool) // 2]
        return solver_service.nearest_point(z0, vertex, pool)

    def lifted_system(self, theta=None) -> LinearSystem:
        """
        System over [x; p_1; ...; p_N]: block-diagonal resource rows plus the coupling
        x = sum_i p_i written as two inequality blocks.
        """
        systems = self.resource_systems(theta)
        T, N = self.dim, len(systems)
        rows, rhs = [], []
        for i, sys in enumerate(systems):
            block = np.zeros((sys.rows, T * (N + 1)))
            block[:, T * (i + 1):T * (i + 2)] = sys.G
            rows.append(block)
            rhs.append(sys.h)
        coupling = np.hstack([np.eye(T)] + [-np.eye(T)] * N)
        rows += [coupling, -coupling]
        rhs += [np.zeros(T), np.zeros(T)]
        return LinearSystem(np.vstack(rows), np.concatenate(rhs))

    def disaggregate(self, x, theta=None, tol: float = 1e-6) -> Optional[List[np.ndarray]]:
        """
        Per-resource trajectories p_i with G_i p_i <= h_i and |sum_i p_i - x| <= tol,
        or None when no such split exists.
        """
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise UsageError(f"aggregate point has {x.size} entries, region dimension is {self.dim}")
        systems = self.resource_systems(theta)
        T, N = self.dim, len(systems)
        rows, rhs = [], []
        for i, sys in enumerate(systems):
            block = np.zeros((sys.rows, T * N))
            block[:, T * i:T * (i + 1)] = sys.G
            rows.append(block)
            rhs.append(sys.h)
        total = np.hstack([np.eye(T)] * N)
        rows += [total, -total]
        rhs += [x + tol, -x + tol]
        outcome = solver_service.solve_lp(np.zeros(T * N), LinearSystem(np.vstack(rows), np.concatenate(rhs)))
        if outcome.status != 'optimal':
            return None
        return [outcome.point[T * i:T * (i + 1)] for i in range(N)]

    def affine_image(self, scale, offset):
        if self.modulation:
            raise UsageError("minkowski_linear: per-axis normalization of a modulated region is not supported")
        scale = np.asarray(scale, dtype=float)
        share = np.asarray(offset, dtype=float) / self.n_resources
        systems = []
        for i in range(self.n_resources):
            G, h = self.base_params[f'G{i}'], self.base_params[f'h{i}']
            systems.append((G * scale, h - G @ share))
        return MinkowskiRegion(systems, self.theta_box)

    def to_spec_data(self):
        out = self._spec_header()
        out['T'] = self.dim
        out['resources'] = [{'G': _lst(self.base_params[f'G{i}']), 'h': _lst(self.base_params[f'h{i}'])}
                            for i in range(self.n_resources)]
        return self._spec_footer(out)

    @classmethod
    def from_spec_data(cls, data):
        resources = _require(data, 'resources', cls.kind)
        if not isinstance(resources, list) or not resources:
            raise SpecError("minkowski_linear: 'resources' must be a nonempty list")
        systems = []
        for i, res in enumerate(resources):
            G = _array(_require(res, 'G', cls.kind), cls.kind, f'resources[{i}].G')
            h = _array(_require(res, 'h', cls.kind), cls.kind, f'resources[{i}].h')
            if G.ndim != 2:
                raise SpecError(f"minkowski_linear: resources[{i}].G must be a matrix")
            systems.append((G, h))
        region = cls(systems, *_common(data, cls.kind))
        if 'T' in data and int(data['T']) != region.dim:
            raise SpecError(f"minkowski_linear: T={data['T']} but resources have {region.dim} columns")
        return region


REGION_TYPES = {cls.kind: cls for cls in (
    HypercubeRegion, HypersphereRegion, EllipseRegion, PolygonRegion,
    DiskDifferenceRegion, LinearLiftedRegion, MinkowskiRegion,
)}
