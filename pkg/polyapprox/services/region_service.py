"""
Service for building region oracles from RegionSpec documents and for viewing them
in the normalized training space.
"""
import itertools
import json
import logging
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from polyapprox.exceptions import SpecError, UnboundedRegionError, UsageError
from polyapprox.models import Region, ThetaBox
from polyapprox.region_types import REGION_TYPES, SCHEMA_VERSION

logger = logging.getLogger(__name__)

# Box corners are checked exhaustively up to this theta dimension, sampled beyond it.
MAX_CORNER_DIM = 6
SAMPLED_CHECKS = 64


def parse_region(spec: Union[str, dict]) -> Region:
    """
    Builds a region oracle from a RegionSpec document (JSON text or an already decoded
    dict) and checks it is nonempty and bounded over its whole theta box.
    """
    if isinstance(spec, str):
        try:
            data = json.loads(spec)
        except json.JSONDecodeError as e:
            raise SpecError(f"Region document is not valid JSON: {e}")
    else:
        data = spec
    if not isinstance(data, dict):
        raise SpecError("Region document must be an object")

    schema = data.get('schema', SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise SpecError(f"Unsupported region schema {schema}")
    kind = data.get('type')
    cls = REGION_TYPES.get(kind)
    if cls is None:
        raise SpecError(f"Unknown region type '{kind}'. Known types: {', '.join(sorted(REGION_TYPES))}")
    try:
        region = cls.from_spec_data(data)
    except (TypeError, ValueError, KeyError) as e:
        if isinstance(e, SpecError):
            raise
        raise SpecError(f"{kind}: malformed document ({e})")
    check_region(region)
    logger.debug(f"Parsed {kind} region of dimension {region.dim} (theta_dim={region.theta_dim})")
    return region


def load_region(path: str) -> Region:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise UsageError(f"Cannot read region document '{path}': {e.strerror}")
    return parse_region(text)


def check_thetas(region: Region, box: Optional[ThetaBox] = None) -> List[np.ndarray]:
    """Theta values at which a region is checked: the box center plus its corners."""
    box = box or region.theta_box
    if box is None:
        return [region.default_theta()]
    thetas = [box.center]
    if box.dim <= MAX_CORNER_DIM:
        for corner in itertools.product(*zip(box.lower, box.upper)):
            thetas.append(np.array(corner))
    else:
        rng = np.random.default_rng(0)
        thetas.extend(box.sample(rng) for _ in range(SAMPLED_CHECKS))
    return thetas


def check_region(region: Region) -> Region:
    """
    Validates shape parameters and boundedness (supports along +-e_i) at every checked
    theta. Modulation is affine, so linear parameter constraints that hold at the
    corners hold over the whole box.
    """
    for theta in check_thetas(region):
        region._validate(region.params_at(theta))
        lo, hi = region.bounding_box(theta)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnboundedRegionError(f"{region.kind}: region is unbounded at theta {theta.tolist()}")
    return region


class NormalizedRegion(Region):
    """
    Read-only view of a region under x_norm = (x_raw - offset) / scale with one
    scale shared by every coordinate, so projections commute with the map.
    """

    def __init__(self, inner: Region, scale: float, offset):
        self.inner = inner
        self.kind = inner.kind
        self.convex = inner.convex
        self.scale = float(scale)
        self.offset = np.asarray(offset, dtype=float).reshape(-1)
        super().__init__(inner.dim, {}, inner.theta_box)

    def support(self, theta, v):
        point, _ = self.inner.support(theta, v)
        mapped = (point - self.offset) / self.scale
        v = np.asarray(v, dtype=float).reshape(-1)
        return mapped, float(v @ mapped)

    def project(self, theta, z0):
        z0 = np.asarray(z0, dtype=float).reshape(-1)
        raw = self.inner.project(theta, self.scale * z0 + self.offset)
        return (raw - self.offset) / self.scale

    def to_spec_data(self):
        return self.inner.to_spec_data()


def normalization(region: Region, mode: str, thetas: Optional[Iterable] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Scale and offset taking the region's bounding box (over the given thetas) onto
    [0,1] per axis, or onto a cube of side 1 along the widest axis (isotropic).
    """
    n = region.dim
    if mode == 'none':
        return np.ones(n), np.zeros(n)
    thetas = list(thetas) if thetas is not None else check_thetas(region)
    boxes = [region.bounding_box(t) for t in thetas]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    width = hi - lo
    if mode == 'auto':
        mode = 'per_axis' if region.per_axis_ok else 'isotropic'
    if mode == 'per_axis':
        scale = np.where(width > 0, width, 1.0)
    elif mode == 'isotropic':
        widest = float(width.max())
        scale = np.full(n, widest if widest > 0 else 1.0)
    else:
        raise UsageError(f"Unknown normalization mode '{mode}'")
    return scale, lo


def normalized_view(region: Region, mode: str, thetas: Optional[Iterable] = None
                    ) -> Tuple[Region, np.ndarray, np.ndarray]:
    """Returns (view, scale, offset) with the view living in the normalized space."""
    scale, offset = normalization(region, mode, thetas)
    if np.all(scale == 1.0) and np.all(offset == 0.0):
        return region, scale, offset
    if np.all(scale == scale[0]):
        return NormalizedRegion(region, scale[0], offset), scale, offset
    return region.affine_image(scale, offset), scale, offset
