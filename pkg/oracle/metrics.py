"""
Cost and Comparison Metrics
Quadrature of the tracking cost and pointwise differences between trajectories
"""

from typing import Dict, Optional

import numpy as np
from scipy import integrate

from core.errors import GridMismatchError
from core.types import Flavor, TrackingProblem, TrajectorySolution
from perturbation.projectors import projector_set

GRID_TOL = 1e-9


def _check_covers(traj: TrajectorySolution, problem: TrackingProblem):
    scale = max(1.0, abs(problem.t0), abs(problem.t1))
    if abs(traj.grid[0] - problem.t0) > GRID_TOL * scale or abs(traj.grid[-1] - problem.t1) > GRID_TOL * scale:
        raise GridMismatchError(
            f"Trajectory grid [{traj.grid[0]:.6g}, {traj.grid[-1]:.6g}] does not cover "
            f"[{problem.t0:.6g}, {problem.t1:.6g}]")


def cost_terms(traj: TrajectorySolution, problem: TrackingProblem) -> Dict[str, float]:
    """Tracking term ½∫(x−x_d)ᵀS(x−x_d), control term (ε²/2)∫|u|² and their sum"""
    _check_covers(traj, problem)
    xd, _ = problem.xd.evaluate(traj.grid)
    err = traj.x - xd
    tracking = 0.5 * integrate.simpson(np.einsum('ki,ij,kj->k', err, problem.S, err), x=traj.grid)
    control = 0.5 * problem.epsilon ** 2 * integrate.simpson(np.sum(traj.u ** 2, axis=1), x=traj.grid)
    total = tracking + control
    if traj.flavor is Flavor.EXACT_EPS0 and traj.kicks and problem.epsilon > 0.0:
        # a delta kick has unbounded energy
        total = float('inf')
    return {'tracking': float(tracking), 'control': float(control), 'total': float(total)}


def evaluate_cost(traj: TrajectorySolution, problem: TrackingProblem) -> float:
    """
    Cost J of a trajectory.

    Exact ε=0 trajectories with kicks evaluate to +inf when ε > 0; for ε = 0
    only the tracking term counts.
    """
    return cost_terms(traj, problem)['total']


def feedforward_energy(problem: TrackingProblem, grid: Optional[np.ndarray] = None) -> float:
    """½∫|B^g(x_d)(ẋ_d − R(x_d))|² dt, the control energy of following x_d exactly"""
    if grid is None:
        grid = problem.uniform_grid(1e-3)
    xd, xd_dot = problem.xd.evaluate(grid)
    system = problem.system
    u = np.array([projector_set(system, problem.S, xd[k]).bg @ (xd_dot[k] - system.drift(xd[k]))
                  for k in range(grid.size)])
    return float(0.5 * integrate.simpson(np.sum(u ** 2, axis=1), x=grid))


def compare_solutions(a: TrajectorySolution, b: TrajectorySolution, exclude_width: float = 0.0) -> Dict[str, float]:
    """
    Per-component max and L² differences over the full overlap and over the
    interior that excludes `exclude_width` at both ends.

    Raises:
        GridMismatchError: if the grids do not overlap
    """
    lo = max(a.grid[0], b.grid[0])
    hi = min(a.grid[-1], b.grid[-1])
    if hi <= lo:
        raise GridMismatchError("Trajectories do not overlap in time")
    if a.x.shape[1] != b.x.shape[1]:
        raise GridMismatchError("Trajectories have different state dimensions")
    keep = (a.grid >= lo) & (a.grid <= hi)
    grid = a.grid[keep]
    if grid.size < 2:
        raise GridMismatchError("Overlap contains fewer than two samples")
    same = b.grid.size == a.grid.size and np.allclose(b.grid, a.grid, rtol=0.0, atol=GRID_TOL)
    other = b if same else b.resample(grid)
    mine_x = a.x[keep]
    diff = {'x': mine_x - other.x}
    if a.lam is not None and other.lam is not None:
        diff['lam'] = a.lam[keep] - other.lam
    if a.u.shape[1] == other.u.shape[1]:
        diff['u'] = a.u[keep] - other.u

    start, end = grid[0] + exclude_width, grid[-1] - exclude_width
    inner = (grid >= start) & (grid <= end)
    if inner.sum() < 2:
        raise GridMismatchError(f"exclude_width {exclude_width:.3g} leaves no interior samples")

    metrics: Dict[str, float] = {'exclude_width': float(exclude_width)}
    for name, d in diff.items():
        for i in range(d.shape[1]):
            col = np.abs(d[:, i])
            key = f"{name}{i + 1}"
            metrics[f"{key}_max_full"] = float(col.max())
            metrics[f"{key}_max_interior"] = float(col[inner].max())
            metrics[f"{key}_l2_full"] = float(np.sqrt(integrate.trapezoid(col ** 2, x=grid)))
            metrics[f"{key}_l2_interior"] = float(np.sqrt(integrate.trapezoid(col[inner] ** 2, x=grid[inner])))
    state = np.max(np.abs(diff['x']), axis=1)
    metrics['state_max_full'] = float(state.max())
    metrics['state_max_interior'] = float(state[inner].max())
    metrics['state_argmax_time'] = float(grid[int(np.argmax(state))])
    return metrics
