"""Benchmark systems, fixed-step RK4 discretization and trajectory sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.spatial import cKDTree

from ._validation import check_points, check_positive
from .exceptions import IntegrationDivergenceError, ParameterError

__all__ = [
    "SystemDef",
    "SampleSet",
    "brusselator",
    "lienard",
    "linear_system",
    "linear_map",
    "get_system",
    "step",
    "simulate",
    "sample_trajectories",
    "fill_distance",
    "grid_points",
]

SUBSTEPS = 10


@dataclass(frozen=True)
class SystemDef:
    """An autonomous system with an equilibrium at the origin.

    Exactly one of ``vector_field`` (continuous time) or ``discrete_map`` is
    set.  Both act on arrays of shape ``(..., dim)``.  ``jacobian_at_origin``
    is the Jacobian of whichever of the two is given.
    """

    name: str
    dim: int
    jacobian_at_origin: np.ndarray
    domain: tuple[np.ndarray, np.ndarray]
    vector_field: Callable[[np.ndarray], np.ndarray] | None = None
    discrete_map: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.vector_field is None) == (self.discrete_map is None):
            raise ParameterError("exactly one of vector_field or discrete_map must be given")
        lo, hi = (np.asarray(b, dtype=float).reshape(self.dim) for b in self.domain)
        if np.any(hi <= lo):
            raise ParameterError("domain box must have hi > lo in every coordinate")
        object.__setattr__(self, "domain", (lo, hi))
        J = np.asarray(self.jacobian_at_origin, dtype=float).reshape(self.dim, self.dim)
        object.__setattr__(self, "jacobian_at_origin", J)

    @property
    def is_discrete(self) -> bool:
        return self.discrete_map is not None

    def discrete_jacobian(self, delta: float) -> np.ndarray:
        """Jacobian at the origin of the sampled map ``x -> x(delta)``."""
        if self.is_discrete:
            return self.jacobian_at_origin.copy()
        return expm(delta * self.jacobian_at_origin)

    def contraction_rate(self, delta: float) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.discrete_jacobian(delta)))))


@dataclass(frozen=True)
class SampleSet:
    """Snapshot pairs ``y[j] = f(x[j])`` with trajectory provenance."""

    x: np.ndarray
    y: np.ndarray
    trajectory_id: np.ndarray
    step_index: np.ndarray
    delta: float

    def __post_init__(self):
        if self.x.shape != self.y.shape or self.x.ndim != 2 or len(self.x) == 0:
            raise ParameterError("x and y must be non-empty arrays of equal shape (n, d)")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def subset(self, n_traj: int) -> "SampleSet":
        """Pairs from the first ``n_traj`` trajectories."""
        mask = self.trajectory_id < n_traj
        return SampleSet(self.x[mask], self.y[mask], self.trajectory_id[mask],
                         self.step_index[mask], self.delta)


def brusselator(a: float = 1.0, b: float = 1.0, half_width: float = 1.0) -> SystemDef:
    """Brusselator in coordinates centred at its equilibrium ``(a, b/a)``."""
    if a <= 0 or not 0 < b < 1 + a * a:
        raise ParameterError("Brusselator needs a > 0 and 0 < b < 1 + a^2 for a stable equilibrium")
    x1e, x2e = a, b / a

    def field_(x):
        u = x[..., 0] + x1e
        v = x[..., 1] + x2e
        return np.stack([a + u * u * v - (b + 1) * u, b * u - u * u * v], axis=-1)

    J = np.array([[2 * x1e * x2e - (b + 1), x1e ** 2],
                  [b - 2 * x1e * x2e, -x1e ** 2]])
    box = (np.full(2, -half_width), np.full(2, half_width))
    return SystemDef("brusselator", 2, J, box, vector_field=field_,
                     params={"a": a, "b": b, "half_width": half_width})


def lienard(half_width: float = 2.0) -> SystemDef:
    """``x1' = x2, x2' = -x1 / (1 + x1^2) - x2``."""

    def field_(x):
        x1 = x[..., 0]
        x2 = x[..., 1]
        return np.stack([x2, -x1 / (1.0 + x1 * x1) - x2], axis=-1)

    J = np.array([[0.0, 1.0], [-1.0, -1.0]])
    box = (np.full(2, -half_width), np.full(2, half_width))
    return SystemDef("lienard", 2, J, box, vector_field=field_, params={"half_width": half_width})


def linear_system(J, half_width: float = 2.0) -> SystemDef:
    """Continuous-time ``x' = J x``."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    d = J.shape[0]

    def field_(x):
        return x @ J.T

    box = (np.full(d, -half_width), np.full(d, half_width))
    return SystemDef("linear", d, J, box, vector_field=field_,
                     params={"J": J.tolist(), "half_width": half_width})


def linear_map(F, half_width: float = 2.0) -> SystemDef:
    """Discrete-time ``x+ = F x``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    d = F.shape[0]

    def map_(x):
        return x @ F.T

    box = (np.full(d, -half_width), np.full(d, half_width))
    return SystemDef("linear_map", d, F, box, discrete_map=map_,
                     params={"F": F.tolist(), "half_width": half_width})


_REGISTRY = {
    "brusselator": brusselator,
    "lienard": lienard,
    "linear": linear_system,
    "linear_map": linear_map,
}


def get_system(name: str, **params) -> SystemDef:
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ParameterError(f"unknown system {name!r}; choose from {sorted(_REGISTRY)}") from None
    return factory(**params)


def _rk4(F, x, h, substeps):
    for _ in range(substeps):
        k1 = F(x)
        k2 = F(x + 0.5 * h * k1)
        k3 = F(x + 0.5 * h * k2)
        k4 = F(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def step(sys: SystemDef, x, delta: float, substeps: int = SUBSTEPS) -> np.ndarray:
    """Advance ``x`` (shape ``(d,)`` or ``(n, d)``) by one sampling interval.

    Continuous systems use classical RK4 with ``substeps`` equal substeps of
    ``delta / substeps``.  Discrete maps are applied once.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != sys.dim:
        raise ParameterError(f"state has dimension {x.shape[-1]}, system {sys.name} has {sys.dim}")
    # overflow is reported as IntegrationDivergenceError below
    with np.errstate(over="ignore", invalid="ignore"):
        if sys.is_discrete:
            out = sys.discrete_map(x)
        else:
            delta = check_positive(delta, "delta")
            out = _rk4(sys.vector_field, x, delta / substeps, substeps)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergenceError(f"non-finite state produced while stepping {sys.name}")
    return out


def simulate(sys: SystemDef, x0, delta: float, steps: int) -> np.ndarray:
    """Trajectory ``[x0, f(x0), ..., f^steps(x0)]`` of shape ``(steps + 1, ...)``."""
    x = np.asarray(x0, dtype=float)
    out = [x]
    for _ in range(int(steps)):
        x = step(sys, x, delta)
        out.append(x)
    return np.stack(out)


def _initial_states(sys: SystemDef, n_traj: int, seed: int) -> np.ndarray:
    # one PCG64 stream per trajectory, keyed on (seed, index): prefixes nest
    lo, hi = sys.domain
    return np.stack([np.random.default_rng([seed, i]).uniform(lo, hi) for i in range(n_traj)])


def sample_trajectories(sys: SystemDef, n_traj: int, horizon: float, delta: float,
                        seed: int = 0) -> SampleSet:
    """Sample ``n_traj`` trajectories started uniformly in ``sys.domain``.

    Each trajectory contributes ``floor(horizon / delta)`` consecutive pairs.
    The initial state of trajectory ``i`` depends only on ``(seed, i)``, so the
    first ``m`` trajectories of a larger sample equal a sample of size ``m``.
    """
    if int(n_traj) != n_traj or n_traj < 1:
        raise ParameterError(f"n_traj must be a positive integer, got {n_traj!r}")
    delta = check_positive(delta, "delta")
    horizon = check_positive(horizon, "horizon")
    # tolerate horizon/delta landing just below an integer, e.g. 5/0.2
    n_steps = int(np.floor(horizon / delta + 1e-9))
    if n_steps < 1:
        raise ParameterError("horizon must be at least delta")
    n_traj = int(n_traj)
    traj = simulate(sys, _initial_states(sys, n_traj, int(seed)), delta, n_steps)
    # traj has shape (n_steps + 1, n_traj, d); order pairs trajectory-major
    x = traj[:-1].transpose(1, 0, 2).reshape(-1, sys.dim)
    y = traj[1:].transpose(1, 0, 2).reshape(-1, sys.dim)
    tid = np.repeat(np.arange(n_traj), n_steps)
    sidx = np.tile(np.arange(n_steps), n_traj)
    return SampleSet(x, y, tid, sidx, delta)


def grid_points(lo, hi, per_dim: int) -> np.ndarray:
    """Tensor grid with ``per_dim`` nodes per axis, first axis slowest."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [np.linspace(a, b, int(per_dim)) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def fill_distance(pts, domain, grid_per_dim: int = 100) -> float:
    """Grid approximation of ``sup_{x in box} min_j |x - x_j|``.

    The supremum is taken over a uniform tensor grid of the box
    ``domain = (lo, hi)``; the value converges from below as the grid is
    refined.
    """
    lo, hi = domain
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    pts = check_points(pts, lo.shape[0], name="pts")
    if int(grid_per_dim) < 2:
        raise ParameterError("grid_per_dim must be at least 2")
    grid = grid_points(lo, hi, grid_per_dim)
    dist, _ = cKDTree(pts).query(grid)
    return float(np.max(dist))
