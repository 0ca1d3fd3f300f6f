"""
Shared Data Model
Control-affine systems, tracking problems and sampled trajectories
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from core.desired import DesiredTrajectory

Array = np.ndarray

RANK_TOL = 1e-12


class Flavor(Enum):
    """Which solution path produced a trajectory"""
    OUTER = "outer"
    INNER_LEFT = "inner-left"
    INNER_RIGHT = "inner-right"
    COMPOSITE = "composite"
    EXACT_EPS0 = "exact-eps0"
    ORACLE = "oracle"
    CLOSED_LOOP = "closed-loop"


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """
    Dynamics ẋ = R(x) + B(x) u.

    Fields:
    -------
    n, p        : state and control dimension
    R           : x -> (n,) drift
    gradR       : x -> (n, n) Jacobian of R
    B           : x -> (n, p) input matrix
    gradB       : x -> (n, p, n) array with [i, k, j] = ∂_j B_ik
    affine_part : optional declared (A, b) with Q·R(x) = Q·(A x + b)
    constant_B  : True when B does not depend on the state
    planar      : optional (a0, a1, a2) for systems of the form
                  ẋ = a0 + a1 x + a2 y, ẏ = R(x, y) + b(x, y) u
    """

    n: int
    p: int
    R: Callable[[Array], Array]
    gradR: Callable[[Array], Array]
    B: Callable[[Array], Array]
    gradB: Callable[[Array], Array]
    affine_part: Optional[Tuple[Array, Array]] = None
    constant_B: bool = False
    planar: Optional[Tuple[float, float, float]] = None
    name: str = 'system'

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.p > self.n:
            raise ValueError(f"Need 1 <= p <= n, got n={self.n}, p={self.p}")
        if self.affine_part is not None:
            A, b = self.affine_part
            A = np.asarray(A, dtype=float)
            b = np.asarray(b, dtype=float)
            if A.shape != (self.n, self.n) or b.shape != (self.n,):
                raise ValueError("affine_part must be an (n, n) matrix and an n-vector")
            A.setflags(write=False)
            b.setflags(write=False)
            object.__setattr__(self, 'affine_part', (A, b))

    def drift(self, x) -> Array:
        return np.asarray(self.R(np.asarray(x, dtype=float)), dtype=float).reshape(self.n)

    def drift_jacobian(self, x) -> Array:
        return np.asarray(self.gradR(np.asarray(x, dtype=float)), dtype=float).reshape(self.n, self.n)

    def input_matrix(self, x) -> Array:
        return np.asarray(self.B(np.asarray(x, dtype=float)), dtype=float).reshape(self.n, self.p)

    def input_gradient(self, x) -> Array:
        return np.asarray(self.gradB(np.asarray(x, dtype=float)), dtype=float).reshape(self.n, self.p, self.n)

    def rhs(self, x, u) -> Array:
        return self.drift(x) + self.input_matrix(x) @ np.atleast_1d(np.asarray(u, dtype=float))

    def has_full_rank(self, x, tol: float = RANK_TOL) -> bool:
        sv = np.linalg.svd(self.input_matrix(x), compute_uv=False)
        return bool(np.all(np.isfinite(sv)) and sv.min() > tol)

    def gradient_errors(self, states: Sequence[Array], h: float = 1e-6) -> Dict[str, float]:
        """
        Compare gradR / gradB with central finite differences.

        Returns:
            dict with max abs error of each Jacobian over the given states
        """
        err_R = 0.0
        err_B = 0.0
        for x in states:
            x = np.asarray(x, dtype=float)
            fd_R = np.zeros((self.n, self.n))
            fd_B = np.zeros((self.n, self.p, self.n))
            for j in range(self.n):
                e = np.zeros(self.n)
                e[j] = h
                fd_R[:, j] = (self.drift(x + e) - self.drift(x - e)) / (2 * h)
                fd_B[:, :, j] = (self.input_matrix(x + e) - self.input_matrix(x - e)) / (2 * h)
            err_R = max(err_R, float(np.max(np.abs(fd_R - self.drift_jacobian(x)))))
            err_B = max(err_B, float(np.max(np.abs(fd_B - self.input_gradient(x)))))
        return {'gradR': err_R, 'gradB': err_B}


@dataclass(frozen=True, eq=False)
class TrackingProblem:
    """Minimize ½∫(x−x_d)ᵀS(x−x_d) + (ε²/2)∫|u|² subject to the system and x(t0)=x0, x(t1)=x1"""

    system: ControlAffineSystem
    S: Array
    epsilon: float
    xd: DesiredTrajectory
    t0: float
    t1: float
    x0: Array
    x1: Array

    def __post_init__(self):
        n = self.system.n
        S = np.array(self.S, dtype=float)
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        x1 = np.array(self.x1, dtype=float).reshape(-1)
        if S.shape != (n, n):
            raise ValueError(f"S must be {n}x{n}, got {S.shape}")
        if not np.allclose(S, S.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(S).max())):
            raise ValueError("S must be symmetric")
        if np.linalg.eigvalsh(0.5 * (S + S.T)).min() <= 0.0:
            raise ValueError("S must be positive definite")
        if x0.shape != (n,) or x1.shape != (n,):
            raise ValueError(f"Boundary states must have length {n}")
        if self.xd.n != n:
            raise ValueError(f"Desired trajectory has {self.xd.n} components, system has {n}")
        if not self.t1 > self.t0:
            raise ValueError("t1 must be greater than t0")
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be nonnegative")
        for arr in (S, x0, x1):
            arr.setflags(write=False)
        object.__setattr__(self, 'S', S)
        object.__setattr__(self, 'x0', x0)
        object.__setattr__(self, 'x1', x1)
        object.__setattr__(self, 'epsilon', float(self.epsilon))
        object.__setattr__(self, 't0', float(self.t0))
        object.__setattr__(self, 't1', float(self.t1))

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def horizon(self) -> float:
        return self.t1 - self.t0

    def with_epsilon(self, epsilon: float) -> 'TrackingProblem':
        return replace(self, epsilon=epsilon)

    def with_start(self, t0: float, x0: Array) -> 'TrackingProblem':
        return replace(self, t0=t0, x0=np.asarray(x0, dtype=float))

    def with_boundary(self, x0: Array, x1: Array) -> 'TrackingProblem':
        return replace(self, x0=np.asarray(x0, dtype=float), x1=np.asarray(x1, dtype=float))

    def uniform_grid(self, dt: float) -> Array:
        """Uniform grid from t0 to t1 with step as close to dt as divides the horizon"""
        steps = max(1, int(round(self.horizon / dt)))
        return np.linspace(self.t0, self.t1, steps + 1)


@dataclass(frozen=True)
class DeltaKick:
    """Impulsive control at a boundary of the ε=0 solution"""

    time: float
    strength: Array
    jump: Array

    def to_dict(self) -> Dict:
        return {
            'time': float(self.time),
            'strength': [float(v) for v in np.atleast_1d(self.strength)],
            'jump': [float(v) for v in np.atleast_1d(self.jump)],
        }


@dataclass(frozen=True, eq=False)
class TrajectorySolution:
    """
    Sampled trajectory.

    Fields:
    -------
    grid   : (N,) strictly increasing times
    x      : (N, n) states
    lam    : (N, n) co-states or None for plant-only simulations
    u      : (N, p) controls
    flavor : Flavor of the producing path
    kicks  : DeltaKick records (exact-eps0 only)
    xdot   : optional (N, n) analytic state derivative
    """

    grid: Array
    x: Array
    lam: Optional[Array]
    u: Array
    flavor: Flavor
    kicks: Tuple[DeltaKick, ...] = ()
    xdot: Optional[Array] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).reshape(-1)
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 1:
            u = u.reshape(-1, 1)
        arrays = {'grid': grid, 'x': x, 'u': u}
        lam = None
        if self.lam is not None:
            lam = np.atleast_2d(np.asarray(self.lam, dtype=float))
            arrays['lam'] = lam
        xdot = None
        if self.xdot is not None:
            xdot = np.atleast_2d(np.asarray(self.xdot, dtype=float))
            arrays['xdot'] = xdot
        if grid.size < 2 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("Trajectory grid must be strictly increasing with at least two samples")
        for name, arr in arrays.items():
            if arr.shape[0] != grid.size:
                raise ValueError(f"Trajectory field '{name}' has {arr.shape[0]} samples, grid has {grid.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"Trajectory field '{name}' contains non-finite entries")
        if self.kicks and self.flavor is not Flavor.EXACT_EPS0:
            raise ValueError("Only exact ε=0 solutions carry delta kicks")
        for arr in arrays.values():
            arr.setflags(write=False)
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'xdot', xdot)
        object.__setattr__(self, 'kicks', tuple(self.kicks))

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.u.shape[1]

    def resample(self, grid: Array) -> 'TrajectorySolution':
        """Linear interpolation onto another grid inside [grid[0], grid[-1]]"""
        grid = np.asarray(grid, dtype=float)

        def interp(arr):
            if arr is None:
                return None
            return np.column_stack([np.interp(grid, self.grid, arr[:, i]) for i in range(arr.shape[1])])

        return TrajectorySolution(
            grid=grid, x=interp(self.x), lam=interp(self.lam), u=interp(self.u),
            flavor=self.flavor, kicks=self.kicks, xdot=interp(self.xdot),
        )
