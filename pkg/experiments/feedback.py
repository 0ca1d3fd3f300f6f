"""
Sampled-Data Feedback
Re-solves the composite from each measured state over the remaining horizon and
applies its control until the next sample, with the plant integrated under the
true dynamics
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from core.errors import HorizonTooShortError, IntegratorFailureError, ParseError
from core.types import Flavor, TrajectorySolution
from experiments.config import ExperimentConfig, Settings
from experiments.runner import LAYER_EXCLUSION, certify
from perturbation.composite import CompositeSolution, solve_composite
from perturbation.outer import solve_outer
from perturbation.projectors import projector_set

logger = logging.getLogger(__name__)

Disturbance = Union[None, Sequence[float], Callable[[float], np.ndarray]]

PLANT_RTOL = 1e-10
PLANT_ATOL = 1e-12


def _disturbance_fn(disturbance: Disturbance, n: int) -> Callable[[float], np.ndarray]:
    if disturbance is None:
        zero = np.zeros(n)
        return lambda t: zero
    if callable(disturbance):
        return lambda t: np.asarray(disturbance(t), dtype=float)
    constant = np.asarray(disturbance, dtype=float)
    if constant.shape != (n,):
        raise ParseError(f"Disturbance must have {n} entries", field='feedback.disturbance')
    return lambda t: constant


class FeedbackLoop:
    """
    Receding-horizon loop around the composite solution.

    Attributes:
        log: one entry per sample with the measured state, the model's
             prediction for it, and the remaining horizon
    """

    def __init__(self, cfg: ExperimentConfig, sample_dt: float, disturbance: Disturbance = None,
                 settings: Optional[Settings] = None):
        if sample_dt < cfg.dt * (1.0 - 1e-12):
            raise ParseError(f"sample_dt {sample_dt:g} is shorter than the grid step {cfg.dt:g}",
                             field='feedback.sample_dt')
        if cfg.epsilon <= 0.0:
            raise ParseError("Feedback needs epsilon > 0", field='cost.epsilon')
        self.cfg = cfg
        self.sample_dt = float(sample_dt)
        self.settings = settings or Settings()
        self.problem = cfg.build_problem()
        self.disturbance = _disturbance_fn(disturbance, self.problem.n)
        self.log: List[Dict] = []

    def sample_times(self) -> np.ndarray:
        t0, t1 = self.problem.t0, self.problem.t1
        count = int(np.ceil((t1 - t0) / self.sample_dt - 1e-9))
        return t0 + self.sample_dt * np.arange(count)

    def control(self, plan: CompositeSolution, t: float) -> np.ndarray:
        """Composite control u = B^g(x)(ẋ − R(x)) at time t"""
        system = self.problem.system
        state = plan.evaluate(t)
        x, xdot = state['x'][0], state['xdot'][0]
        return projector_set(system, self.problem.S, x).bg @ (xdot - system.drift(x))

    def _plan(self, t_start: float, x_start: np.ndarray, report) -> CompositeSolution:
        problem = self.problem
        remaining = problem.t1 - t_start
        if remaining < LAYER_EXCLUSION * problem.epsilon:
            raise HorizonTooShortError(
                f"Remaining horizon {remaining:.3g} at t={t_start:.6g} is shorter than {LAYER_EXCLUSION:g}ε. "
                "Please use a sample interval that leaves room for both boundary layers")
        sub = problem.with_start(t_start, x_start)
        grid = self._local_grid(t_start, problem.t1)
        outer = solve_outer(sub, report, grid, prefer_closed_form=False, rtol=self.settings.rtol)
        return solve_composite(outer, grid, workers=self.settings.workers)

    def _local_grid(self, a: float, b: float) -> np.ndarray:
        base = self.cfg.grid()
        tol = 1e-9 * self.cfg.dt
        inside = base[(base > a + tol) & (base < b - tol)]
        return np.concatenate([[a], inside, [b]])

    def _integrate(self, plan: CompositeSolution, span, x_start, t_eval, with_disturbance: bool):
        system = self.problem.system

        def rhs(t, x):
            dx = system.rhs(x, self.control(plan, t))
            if with_disturbance:
                dx = dx + self.disturbance(t)
            return dx

        sol = solve_ivp(rhs, span, x_start, t_eval=t_eval, rtol=PLANT_RTOL, atol=PLANT_ATOL,
                        first_step=self.problem.epsilon / 100.0)
        if not sol.success:
            raise IntegratorFailureError(f"Plant integration failed on [{span[0]:.6g}, {span[1]:.6g}]: {sol.message}")
        return sol.y.T

    def run(self) -> TrajectorySolution:
        problem = self.problem
        report = certify(self.cfg, problem)
        starts = self.sample_times()
        x_meas = problem.x0.copy()
        predicted = problem.x0.copy()
        times, states, controls = [], [], []
        self.log = []
        print(f"Sampled feedback: {starts.size} re-solves every {self.sample_dt:g}")

        for k, a in enumerate(starts):
            last = k == starts.size - 1
            b = problem.t1 if last else starts[k + 1]
            self.log.append({'time': float(a), 'measured': x_meas.tolist(), 'predicted': predicted.tolist(),
                             'prediction_gap': float(np.max(np.abs(x_meas - predicted))),
                             'remaining': float(problem.t1 - a)})
            plan = self._plan(a, x_meas, report)
            t_eval = self._local_grid(a, b)
            x_seg = self._integrate(plan, (a, b), x_meas, t_eval, with_disturbance=True)
            keep = slice(None) if last else slice(0, -1)
            times.append(t_eval[keep])
            states.append(x_seg[keep])
            controls.append(np.array([self.control(plan, t) for t in t_eval[keep]]))
            predicted = self._integrate(plan, (a, b), x_meas, [b], with_disturbance=False)[-1]
            x_meas = x_seg[-1]
            logger.debug("Sample %d at t=%.6g: state %s", k, a, x_meas)

        return TrajectorySolution(grid=np.concatenate(times), x=np.vstack(states), lam=None,
                                  u=np.vstack(controls), flavor=Flavor.CLOSED_LOOP)


def sampled_feedback(cfg: ExperimentConfig, sample_dt: float, disturbance: Disturbance = None,
                     settings: Optional[Settings] = None) -> TrajectorySolution:
    """
    Closed-loop simulation with the composite re-solved at every sample.

    Raises:
        HorizonTooShortError: when a sample leaves less than 10ε of horizon
    """
    return FeedbackLoop(cfg, sample_dt, disturbance, settings).run()


def open_loop_response(cfg: ExperimentConfig, disturbance: Disturbance = None,
                       settings: Optional[Settings] = None) -> TrajectorySolution:
    """Plant response to the composite control planned once at t0"""
    return sampled_feedback(cfg, cfg.t1 - cfg.t0, disturbance, settings)
