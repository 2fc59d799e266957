from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Optional, Tuple

import numpy as np

from config import Config
from polyapprox.exceptions import SpecError, UsageError


@dataclass(frozen=True)
class LinearSystem:
    """The constraint form G x <= h shared by every polyhedral object."""
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if G.shape[0] != h.shape[0]:
            raise UsageError(f"G has {G.shape[0]} rows but h has {h.shape[0]} entries")
        if not (np.all(np.isfinite(G)) and np.all(np.isfinite(h))):
            raise UsageError("Linear system contains non-finite entries")
        norms = np.linalg.norm(G, axis=1)
        zero = np.flatnonzero(norms < Config.ROW_EPS)
        if zero.size:
            raise UsageError(f"Row {int(zero[0])} of G is all zero")
        object.__setattr__(self, 'G', G)
        object.__setattr__(self, 'h', h)

    @property
    def rows(self) -> int:
        return self.G.shape[0]

    @property
    def cols(self) -> int:
        return self.G.shape[1]


@dataclass
class LpOutcome:
    status: str  # 'optimal', 'unbounded' or 'infeasible'
    point: Optional[np.ndarray] = None
    value: Optional[float] = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == 'optimal'


@dataclass
class QpOutcome:
    point: np.ndarray
    multipliers: np.ndarray
    sweeps: int
    gap: float


@dataclass
class Polytope:
    """
    P(A, b) = {x | A x <= b} in the normalized training space. The affine map
    x_norm = (x_raw - offset) / scale takes raw coordinates into that space.
    """
    A: np.ndarray
    b: np.ndarray
    scale: np.ndarray
    offset: np.ndarray

    @classmethod
    def unscaled(cls, A, b) -> 'Polytope':
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[1]
        return cls(A=A, b=np.asarray(b, dtype=float).reshape(-1),
                   scale=np.ones(n), offset=np.zeros(n))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def M(self) -> int:
        return self.A.shape[0]

    def system(self) -> LinearSystem:
        return LinearSystem(self.A, self.b)

    @property
    def is_unscaled(self) -> bool:
        return bool(np.all(self.scale == 1.0) and np.all(self.offset == 0.0))

    def to_raw(self) -> 'Polytope':
        """The same set written in raw coordinates, rows renormalized."""
        if self.is_unscaled:
            return self
        A_raw = self.A / self.scale
        b_raw = self.b + A_raw @ self.offset
        norms = np.linalg.norm(A_raw, axis=1)
        return Polytope.unscaled(A_raw / norms[:, None], b_raw / norms)

    def copy(self) -> 'Polytope':
        return Polytope(self.A.copy(), self.b.copy(), self.scale.copy(), self.offset.copy())


@dataclass
class ActiveSet:
    indices: List[int]
    point: np.ndarray


@dataclass
class DirectionalSample:
    v: np.ndarray
    x_prime: np.ndarray
    z_star: np.ndarray
    z_prime: np.ndarray
    x_star: np.ndarray
    e_feas: float
    e_opt: float


@dataclass
class ErrorEstimate:
    mean_feas: float
    mean_opt: float
    max_feas: float
    max_opt: float
    n_dirs: int
    seed: int
    se_feas: float = 0.0
    se_opt: float = 0.0

    def weighted(self, lam: float) -> float:
        return lam * self.mean_feas + (1.0 - lam) * self.mean_opt

    def weighted_se(self, lam: float) -> float:
        return float(np.hypot(lam * self.se_feas, (1.0 - lam) * self.se_opt))

    def report(self) -> dict:
        return {
            'mean_feas': self.mean_feas,
            'mean_opt': self.mean_opt,
            'max_feas': self.max_feas,
            'max_opt': self.max_opt,
            'n_dirs': self.n_dirs,
            'seed': self.seed,
        }


@dataclass
class Phase:
    lam: float
    iters: int
    lr: Optional[float] = None  # overrides TrainConfig.lr for this phase


DEFAULT_PHASES = ((0.5, 500), (0.9, 200), (0.9999, 100))


@dataclass
class TrainConfig:
    M: Optional[int] = None  # None means 2n
    phases: List[Phase] = field(default_factory=lambda: [Phase(l, i) for l, i in DEFAULT_PHASES])
    lr: float = 1e-2
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    lr_decay: float = 1.0
    lr_min: float = 0.0
    batch: int = 8
    act_tol: float = Config.ACT_TOL
    dir_eps: float = Config.DIR_EPS
    eval_every: int = 50
    eval_dirs: int = 200
    seed: int = 0
    tol: float = 1e-5
    patience: int = 3
    init: str = 'axes'
    normalization: str = 'auto'
    hidden: int = 128
    workers: int = 1
    phase_convergence: bool = False  # convergence ends only the current phase, except the last

    def __post_init__(self):
        self.phases = [p if isinstance(p, Phase) else Phase(*p) for p in self.phases]
        if not self.phases or sum(p.iters for p in self.phases) < 1:
            raise UsageError("Phase schedule must contain at least one iteration")
        for p in self.phases:
            if not 0.0 <= p.lam <= 1.0:
                raise UsageError(f"Phase lambda {p.lam} outside [0, 1]")
            if p.iters < 0:
                raise UsageError(f"Phase iteration count {p.iters} is negative")
            if p.lr is not None and p.lr <= 0:
                raise UsageError("Phase learning rate must be positive")
        if self.lr <= 0:
            raise UsageError("Learning rate must be positive")
        if not (0.0 <= self.betas[0] < 1.0 and 0.0 <= self.betas[1] < 1.0):
            raise UsageError("Adam betas must lie in [0, 1)")
        if self.batch < 1 or self.eval_dirs < 1 or self.eval_every < 1 or self.patience < 1:
            raise UsageError("batch, eval_dirs, eval_every and patience must be positive")
        if self.M is not None and self.M < 2:
            raise UsageError("M must be at least 2")
        if self.init not in ('axes', 'rotated', 'random'):
            raise UsageError(f"Unknown init mode '{self.init}'")
        if self.normalization not in ('auto', 'isotropic', 'per_axis', 'none'):
            raise UsageError(f"Unknown normalization mode '{self.normalization}'")

    @property
    def total_iters(self) -> int:
        return sum(p.iters for p in self.phases)


@dataclass
class IterationRecord:
    iter: int
    lam: float
    e_feas: float
    e_opt: float
    loss: float
    grad_norm: float


@dataclass
class EvalRecord:
    iter: int
    estimate: ErrorEstimate
    lam: float


@dataclass
class TrainHistory:
    iterations: List[IterationRecord] = field(default_factory=list)
    evals: List[EvalRecord] = field(default_factory=list)
    converged: bool = False

    def record(self, rec: IterationRecord):
        if self.iterations and rec.iter <= self.iterations[-1].iter:
            raise UsageError("History iterations must be strictly increasing")
        self.iterations.append(rec)

    @property
    def last_iter(self) -> int:
        return self.iterations[-1].iter if self.iterations else 0


@dataclass
class AdamState:
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class ThetaBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise UsageError("theta box bounds differ in length")
        if np.any(self.lower >= self.upper):
            raise UsageError("theta box requires lower < upper in every coordinate")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        return theta.shape == self.lower.shape and bool(
            np.all(theta >= self.lower) and np.all(theta <= self.upper))

    def normalize(self, theta) -> np.ndarray:
        return (np.asarray(theta, dtype=float) - self.lower) / (self.upper - self.lower)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + (self.upper - self.lower) * rng.random(self.dim)


@dataclass
class MlpParams:
    """Weights of the A-net and b-net, each a single rectifier hidden layer."""
    theta_dim: int
    hidden: int
    M: int
    n: int
    a_net: Dict[str, np.ndarray]
    b_net: Dict[str, np.ndarray]
    theta_box: ThetaBox
    # Input normalization of the x-space the emitted polytopes live in
    scale: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None

    def flat(self) -> Dict[str, np.ndarray]:
        out = {f'a_{k}': v for k, v in self.a_net.items()}
        out.update({f'b_{k}': v for k, v in self.b_net.items()})
        return out

    def with_flat(self, flat: Dict[str, np.ndarray]) -> 'MlpParams':
        return MlpParams(self.theta_dim, self.hidden, self.M, self.n,
                         {k: flat[f'a_{k}'] for k in self.a_net},
                         {k: flat[f'b_{k}'] for k in self.b_net},
                         self.theta_box, self.scale, self.offset)

    def copy(self) -> 'MlpParams':
        return MlpParams(self.theta_dim, self.hidden, self.M, self.n,
                         {k: v.copy() for k, v in self.a_net.items()},
                         {k: v.copy() for k, v in self.b_net.items()},
                         ThetaBox(self.theta_box.lower.copy(), self.theta_box.upper.copy()),
                         None if self.scale is None else self.scale.copy(),
                         None if self.offset is None else self.offset.copy())


@dataclass
class BenchReport:
    case: str
    n: int
    M: int
    init_error: float
    converged_error: float
    ideal_error: Optional[float]
    reduction: float
    iterations: int
    wall_time: float
    steps_to_tol: Optional[int] = None
    max_feas: Optional[float] = None
    max_opt: Optional[float] = None
    mc_se: float = 0.0
    passed: bool = True
    notes: str = ''


@dataclass
class RunConfigDocument:
    """A `fit` run: the training configuration plus the files it reads and writes."""
    region: str
    out: str
    train: TrainConfig
    mode: str = 'fixed'  # 'fixed' or 'parameterized'
    history: Optional[str] = None
    eval_history: Optional[str] = None
    theta: Optional[List[float]] = None
    theta_box: Optional[ThetaBox] = None


class Region:
    """
    Base class for every region Omega(theta). A region exposes the two oracles the
    error metrics need: support(theta, v), the maximizer of v.z over Omega, and
    project(theta, z0), the nearest point of Omega to z0.

    Shape parameters are held in `base_params`; an optional `modulation` maps each
    parameter name to a matrix so that param(theta) = param + matrix @ theta.
    Subclasses implement `_support`, `_project`, `_validate` and build themselves
    from a spec document through `from_spec_data`.
    """
    kind: ClassVar[str] = ''
    convex: ClassVar[bool] = True
    per_axis_ok: ClassVar[bool] = False

    def __init__(self, dim: int, base_params: Dict[str, np.ndarray],
                 theta_box: Optional[ThetaBox] = None,
                 modulation: Optional[Dict[str, np.ndarray]] = None):
        self.dim = int(dim)
        self.base_params = {k: np.asarray(v, dtype=float) for k, v in base_params.items()}
        self.theta_box = theta_box
        self.modulation = {}
        for name, mat in (modulation or {}).items():
            if name not in self.base_params:
                raise SpecError(f"{self.kind}: cannot modulate unknown parameter '{name}'")
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            if mat.shape != (self.base_params[name].size, self.theta_dim):
                raise SpecError(
                    f"{self.kind}: modulation of '{name}' must be "
                    f"{self.base_params[name].size}x{self.theta_dim}, got {mat.shape[0]}x{mat.shape[1]}")
            self.modulation[name] = mat
        if self.modulation and theta_box is None:
            raise SpecError(f"{self.kind}: modulation given without a theta_box")

    @property
    def theta_dim(self) -> int:
        return 0 if self.theta_box is None else self.theta_box.dim

    def default_theta(self) -> np.ndarray:
        return np.zeros(0) if self.theta_box is None else self.theta_box.center

    def params_at(self, theta=None) -> Dict[str, np.ndarray]:
        theta = np.zeros(0) if theta is None else np.asarray(theta, dtype=float).reshape(-1)
        if self.theta_box is None:
            if theta.size:
                raise UsageError(f"{self.kind} region takes no theta, got {theta.size} values")
            return self.base_params
        if not self.theta_box.contains(theta):
            raise UsageError(f"theta {theta.tolist()} outside the declared theta box")
        params = dict(self.base_params)
        for name, mat in self.modulation.items():
            base = self.base_params[name]
            params[name] = (base.reshape(-1) + mat @ theta).reshape(base.shape)
        return params

    def support(self, theta, v) -> Tuple[np.ndarray, float]:
        v = np.asarray(v, dtype=float).reshape(-1)
        if v.size != self.dim:
            raise UsageError(f"direction has {v.size} entries, region dimension is {self.dim}")
        if np.linalg.norm(v) <= Config.DIR_EPS:
            raise UsageError("support direction is (numerically) zero")
        point = self._support(self.params_at(theta), v)
        return point, float(v @ point)

    def project(self, theta, z0) -> np.ndarray:
        z0 = np.asarray(z0, dtype=float).reshape(-1)
        if z0.size != self.dim:
            raise UsageError(f"point has {z0.size} entries, region dimension is {self.dim}")
        return self._project(self.params_at(theta), z0)

    def bounding_box(self, theta=None) -> Tuple[np.ndarray, np.ndarray]:
        lo = np.empty(self.dim)
        hi = np.empty(self.dim)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            hi[i] = self.support(theta, e)[1]
            lo[i] = -self.support(theta, -e)[1]
        return lo, hi

    def affine_image(self, scale, offset) -> 'Region':
        """The region {(z - offset) / scale | z in Omega}; only some kinds support per-axis maps."""
        raise UsageError(f"{self.kind} does not support per-axis normalization")

    def _support(self, params, v) -> np.ndarray:
        raise NotImplementedError("Subclasses must implement _support()")

    def _project(self, params, z0) -> np.ndarray:
        raise NotImplementedError("Subclasses must implement _project()")

    def _validate(self, params):
        """Raise SpecError/EmptyRegionError when params do not describe a valid region."""

    def to_spec_data(self) -> dict:
        raise NotImplementedError("Subclasses must implement to_spec_data()")

    @classmethod
    def from_spec_data(cls, data: dict) -> 'Region':
        """
        Factory method building the region from its spec document.

        Raises:
            NotImplementedError: If called on the base Region class
        """
        raise NotImplementedError("Subclasses must implement from_spec_data()")
