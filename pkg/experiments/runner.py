"""
Experiment Runner
Dispatches a validated config over the solution paths and runs ε sweeps
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import NotLinearizableError, NotSupportedError
from core.types import Flavor, TrackingProblem, TrajectorySolution
from experiments.config import ExperimentConfig, Settings
from models.zoo import sample_box
from oracle.metrics import compare_solutions, cost_terms
from oracle.residuals import ResidualReport, optimality_residuals
from oracle.shooting import ShootingConfig, solve_tpbvp
from perturbation.composite import (CompositeSolution, compose, exact_eps0, layer_width, rebind_outer,
                                    solve_composite)
from perturbation.inner import solve_boundary_layers
from perturbation.outer import OuterSolution, solve_outer
from perturbation.projectors import LinearizingReport, latin_hypercube_samples, projector_set, verify_linearizing

logger = logging.getLogger(__name__)

# layer region excluded from interior metrics, in units of ε
LAYER_EXCLUSION = 10.0


@dataclass
class ExperimentResult:
    """Everything one run produced"""

    config: ExperimentConfig
    problem: TrackingProblem
    report: LinearizingReport
    solutions: Dict[str, TrajectorySolution] = field(default_factory=dict)
    primary: str = ''
    # flat name -> scalar map, written as metrics.json
    metrics: Dict[str, float] = field(default_factory=dict)
    residuals: Dict[str, ResidualReport] = field(default_factory=dict)
    composite: Optional[CompositeSolution] = None

    def summary(self) -> Dict:
        """Run summary with the residual audits; the linearizing report is written on its own"""
        return {
            'name': self.config.name,
            'method': self.config.method,
            'primary': self.primary,
            'residuals': {k: v.to_dict() for k, v in self.residuals.items()},
            'kicks': len(self.solutions[self.primary].kicks) if self.primary else 0,
        }


def certify(cfg: ExperimentConfig, problem: TrackingProblem) -> LinearizingReport:
    """
    Linearizing check over the configured sample box (the model's default box otherwise).

    Raises:
        NotLinearizableError: if Ω varies or Q·R is not affine over the samples
    """
    box = cfg.samples
    if 'lo' in box and 'hi' in box:
        lo, hi = np.asarray(box['lo'], dtype=float), np.asarray(box['hi'], dtype=float)
    else:
        lo, hi = sample_box(cfg.model.name)
    states = latin_hypercube_samples(lo, hi, count=int(box.get('count', 64)), seed=int(box.get('seed', 0)))
    report = verify_linearizing(problem.system, problem.S, states)
    if not report.passed:
        raise NotLinearizableError(
            f"Model '{cfg.model.name}' fails the linearizing assumption "
            f"(Ω deviation {report.omega_deviation:.3e}, Q·R residual {report.qr_residual:.3e}). "
            "Please choose a model with constant Ω and affine Q·R")
    return report


def outer_trajectory(outer: OuterSolution) -> TrajectorySolution:
    """Outer solution as a trajectory; λ = QᵀΛ and u the regular control along X"""
    problem = outer.problem
    system = problem.system
    u = np.array([projector_set(system, problem.S, outer.X[k]).bg @ (outer.Xdot[k] - system.drift(outer.X[k]))
                  for k in range(outer.grid.size)])
    return TrajectorySolution(grid=outer.grid, x=outer.X, lam=outer.QLambda, u=u,
                              flavor=Flavor.OUTER, xdot=outer.Xdot)


def shooting_config(cfg: ExperimentConfig, guess: Optional[TrajectorySolution] = None) -> ShootingConfig:
    options = {k: v for k, v in cfg.shooting.items() if k != 'warm_start'}
    if cfg.shooting.get('warm_start', True) and guess is not None:
        options['initial_guess'] = guess
    return ShootingConfig(**options)


def _prefixed(prefix: str, values: Dict[str, float]) -> Dict[str, float]:
    return {f"{prefix}_{key}": value for key, value in values.items()}


def _layer_metrics(a: TrajectorySolution, b: TrajectorySolution, width: float) -> Dict[str, float]:
    """Max state difference restricted to the two excluded boundary regions"""
    other = b.resample(a.grid) if a.grid.size != b.grid.size or not np.allclose(a.grid, b.grid) else b
    gap = np.max(np.abs(a.x - other.x), axis=1)
    near_left = a.grid < a.grid[0] + width
    near_right = a.grid > a.grid[-1] - width
    return {
        'state_max_layer_left': float(gap[near_left].max()) if near_left.any() else 0.0,
        'state_max_layer_right': float(gap[near_right].max()) if near_right.any() else 0.0,
    }


def run_experiment(cfg: ExperimentConfig, settings: Optional[Settings] = None) -> ExperimentResult:
    """
    Certify the linearizing assumption, then run the configured method.

    Methods:
        outer     : outer solution only
        composite : outer + boundary layers
        exact0    : ε=0 limit with kicks
        oracle    : multiple shooting, warm-started from the composite unless disabled
        compare   : composite and oracle plus difference metrics
    """
    settings = settings or Settings()
    problem = cfg.build_problem()
    grid = cfg.grid()
    report = certify(cfg, problem)
    result = ExperimentResult(config=cfg, problem=problem, report=report)
    logger.info("Running '%s' with method %s (ε=%g)", cfg.name, cfg.method, cfg.epsilon)

    method = cfg.method
    outer = solve_outer(problem, report, grid, rtol=settings.rtol)
    if method == 'exact0':
        traj = exact_eps0(problem, outer, grid)
        result.solutions['exact0'] = traj
        result.primary = 'exact0'
        result.metrics.update(_prefixed('cost', cost_terms(traj, problem)))
        result.metrics['kick_count'] = len(traj.kicks)
        return result

    if method == 'outer':
        traj = outer_trajectory(outer)
        result.solutions['outer'] = traj
        result.primary = 'outer'
        result.metrics.update(_prefixed('cost', cost_terms(traj, problem)))
        return result

    guess = None
    composite = None
    if method in ('composite', 'compare') or cfg.shooting.get('warm_start', True):
        try:
            composite = solve_composite(outer, grid, workers=settings.workers)
        except NotSupportedError:
            if method != 'oracle':
                raise
            logger.warning("No composite warm start for %s; shooting from a straight line", cfg.model.name)
    if composite is not None:
        result.composite = composite
        guess = composite.trajectory
        if method in ('composite', 'compare'):
            result.solutions['composite'] = guess
            result.primary = 'composite'
            result.metrics.update(_prefixed('cost_composite', cost_terms(guess, problem)))
            result.metrics['layer_width_left'] = layer_width(composite, 'left')
            result.metrics['layer_width_right'] = layer_width(composite, 'right')
    if method == 'composite':
        return result

    oracle = solve_tpbvp(problem, shooting_config(cfg, guess), grid)
    result.solutions['oracle'] = oracle
    result.metrics.update(_prefixed('cost_oracle', cost_terms(oracle, problem)))
    result.residuals['oracle'] = optimality_residuals(oracle, problem)
    if method == 'oracle':
        result.primary = 'oracle'
        return result

    width = LAYER_EXCLUSION * cfg.epsilon
    comparison = compare_solutions(guess, oracle, exclude_width=width)
    comparison.update(_layer_metrics(guess, oracle, width))
    comparison['cost_gap'] = result.metrics['cost_composite_total'] - result.metrics['cost_oracle_total']
    result.metrics.update(comparison)
    logger.info("Composite vs oracle: interior %.3e, full %.3e",
                comparison['state_max_interior'], comparison['state_max_full'])
    return result


def layer_refined_grid(base: np.ndarray, problem: TrackingProblem, rates: Sequence[float],
                       points: int = 400, foldings: float = 40.0) -> np.ndarray:
    """Base grid plus dense samples across both boundary layers"""
    left_w = min(problem.horizon / 4.0, foldings * problem.epsilon / rates[0])
    right_w = min(problem.horizon / 4.0, foldings * problem.epsilon / rates[1])
    extra = [problem.t0 + left_w * np.linspace(0.0, 1.0, points) ** 2,
             problem.t1 - right_w * np.linspace(0.0, 1.0, points) ** 2]
    return np.unique(np.concatenate([base] + extra))


def _sweep_row(cfg: ExperimentConfig, outer: OuterSolution, exact: TrajectorySolution,
               eps: float, workers: int) -> Dict[str, float]:
    problem = cfg.build_problem(epsilon=eps)
    scaled = rebind_outer(outer, problem)
    left, right = solve_boundary_layers(scaled, workers=workers)
    grid = layer_refined_grid(cfg.grid(), problem, (left.decay_rate, right.decay_rate))
    composite = compose(scaled, left, right, grid)
    traj = composite.trajectory
    deviation = compare_solutions(exact, traj, exclude_width=LAYER_EXCLUSION * eps)
    row = {
        'eps': float(eps),
        'layer_width': layer_width(composite, 'left'),
        'u_peak': float(np.max(np.abs(traj.u))),
        'interior_deviation': deviation['state_max_interior'],
        'J': cost_terms(traj, problem)['total'],
    }
    logger.info("Sweep ε=%.1e: width %.3e, u_peak %.3e, J %.6g", eps, row['layer_width'], row['u_peak'], row['J'])
    return row


def epsilon_sweep(cfg: ExperimentConfig, eps_list: Sequence[float],
                  settings: Optional[Settings] = None) -> pd.DataFrame:
    """
    Composite solution for each ε; rows keep the order of `eps_list`.

    The outer solution does not depend on ε, so it is solved once and shared.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2:
        raise ValueError("Please give at least two epsilon values for a sweep")
    if min(eps_list) <= 0.0:
        raise ValueError("Sweep epsilons must be positive")
    settings = settings or Settings()
    problem = cfg.build_problem()
    report = certify(cfg, problem)
    grid = cfg.grid()
    outer = solve_outer(problem, report, grid, rtol=settings.rtol)
    exact = exact_eps0(problem.with_epsilon(0.0), rebind_outer(outer, problem.with_epsilon(0.0)), grid)

    with ThreadPoolExecutor(max_workers=settings.workers) as pool:
        futures = [pool.submit(_sweep_row, cfg, outer, exact, eps, 1) for eps in eps_list]
        rows: List[Dict[str, float]] = [f.result() for f in futures]
    return pd.DataFrame(rows, columns=['eps', 'layer_width', 'u_peak', 'interior_deviation', 'J'])
