"""
Direct Solver of the Necessary Conditions
Multiple shooting with damped Newton on the 2n-dimensional state/co-state system,
with the control eliminated as u = −Bᵀλ/ε²
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import integrate

from core.errors import IntegratorFailureError, NewtonDivergedError, NotSupportedError
from core.types import Flavor, TrackingProblem, TrajectorySolution

logger = logging.getLogger(__name__)

JACOBIAN_MODES = ('analytic', 'finite-difference')


@dataclass(frozen=True, eq=False)
class ShootingConfig:
    """
    Multiple-shooting settings.

    Fields:
    -------
    segments           : minimum number of shooting segments
    integrator_tol     : relative tolerance of the segment integrator
    newton_tol         : max-norm of the matching defect accepted as converged
    max_newton_iters   : Newton iteration limit
    jacobian           : 'analytic' (variational equations) or 'finite-difference'
    initial_guess      : trajectory to start from, or None for a straight line with λ = 0
    max_segment_growth : e-foldings of the fastest mode allowed per segment;
                         more segments are used when ε demands it
    method             : scipy solve_ivp method
    fd_step            : perturbation for finite-difference Jacobians
    workers            : threads for segment integrations
    """

    segments: int = 20
    integrator_tol: float = 1e-10
    newton_tol: float = 1e-9
    max_newton_iters: int = 40
    jacobian: str = 'analytic'
    initial_guess: Optional[TrajectorySolution] = None
    max_segment_growth: float = 6.0
    method: str = 'DOP853'
    fd_step: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        if self.segments < 1:
            raise ValueError("segments must be at least 1")
        if self.integrator_tol <= 0 or self.newton_tol <= 0 or self.fd_step <= 0:
            raise ValueError("Tolerances and steps must be positive")
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be at least 1")
        if self.jacobian not in JACOBIAN_MODES:
            raise ValueError(f"jacobian must be one of {JACOBIAN_MODES}")


class HamiltonianSystem:
    """State/co-state vector field of the necessary conditions and its Jacobian"""

    def __init__(self, problem: TrackingProblem, curvature_step: float = 1e-5):
        self.problem = problem
        self.system = problem.system
        self.n = problem.n
        self.eps2 = problem.epsilon ** 2
        self.S = problem.S
        self.h = curvature_step

    def control(self, x, lam) -> np.ndarray:
        return -self.system.input_matrix(x).T @ lam / self.eps2

    def field(self, t, z) -> np.ndarray:
        n = self.n
        x, lam = z[:n], z[n:]
        sysm = self.system
        B = sysm.input_matrix(x)
        u = -B.T @ lam / self.eps2
        bu_grad = np.einsum('ikj,k->ij', sysm.input_gradient(x), u)
        xd, _ = self.problem.xd.evaluate(t)
        xdot = sysm.drift(x) + B @ u
        lamdot = -(sysm.drift_jacobian(x).T + bu_grad.T) @ lam - self.S @ (x - xd)
        return np.concatenate([xdot, lamdot])

    def jacobian(self, t, z) -> np.ndarray:
        n = self.n
        x, lam = z[:n], z[n:]
        sysm = self.system
        B = sysm.input_matrix(x)
        gB = sysm.input_gradient(x)
        gR = sysm.drift_jacobian(x)
        u = -B.T @ lam / self.eps2
        bu_grad = np.einsum('ikj,k->ij', gB, u)
        C = np.einsum('ikj,i->kj', gB, lam)
        du_dx = -C / self.eps2
        du_dlam = -B.T / self.eps2
        # second derivatives of R and B by central differences of the supplied gradients
        hess_R = np.zeros((n, n))
        hess_Bu = np.zeros((n, n))
        for m in range(n):
            step = self.h * max(1.0, abs(x[m]))
            e = np.zeros(n)
            e[m] = step
            dgR = (sysm.drift_jacobian(x + e) - sysm.drift_jacobian(x - e)) / (2 * step)
            dgB = (sysm.input_gradient(x + e) - sysm.input_gradient(x - e)) / (2 * step)
            hess_R[:, m] = dgR.T @ lam
            hess_Bu[:, m] = np.einsum('ikj,k,i->j', dgB, u, lam)
        J = np.empty((2 * n, 2 * n))
        J[:n, :n] = gR + bu_grad + B @ du_dx
        J[:n, n:] = B @ du_dlam
        J[n:, :n] = -hess_R - hess_Bu - C.T @ du_dx - self.S
        J[n:, n:] = -gR.T - bu_grad.T - C.T @ du_dlam
        return J


class MultipleShootingSolver:
    """Damped Newton on segment-matching and boundary conditions"""

    def __init__(self, problem: TrackingProblem, cfg: Optional[ShootingConfig] = None):
        if problem.epsilon <= 0.0:
            raise NotSupportedError(
                "The ε=0 problem is singular and is not solved by shooting. Please use the exact ε=0 path")
        self.problem = problem
        self.cfg = cfg or ShootingConfig()
        self.ham = HamiltonianSystem(problem)
        self.n = problem.n
        self.nodes = np.linspace(problem.t0, problem.t1, self.segment_count() + 1)
        self.iterations = 0
        self.history: List[float] = []

    def segment_count(self) -> int:
        problem = self.problem
        sysm = problem.system
        gain = max(np.linalg.norm(sysm.input_matrix(problem.x0), 2),
                   np.linalg.norm(sysm.input_matrix(problem.x1), 2))
        fastest = gain * math.sqrt(np.linalg.eigvalsh(problem.S).max()) / problem.epsilon
        needed = math.ceil(problem.horizon * fastest / self.cfg.max_segment_growth)
        return max(self.cfg.segments, needed)

    @property
    def segments(self) -> int:
        return self.nodes.size - 1

    # unknowns: λ(t0), then full (x, λ) at every interior node
    def pack(self, node_states: np.ndarray) -> np.ndarray:
        return np.concatenate([node_states[0, self.n:], node_states[1:].ravel()])

    def unpack(self, w: np.ndarray) -> np.ndarray:
        n = self.n
        states = np.empty((self.segments, 2 * n))
        states[0, :n] = self.problem.x0
        states[0, n:] = w[:n]
        states[1:] = w[n:].reshape(self.segments - 1, 2 * n)
        return states

    def initial_unknowns(self) -> np.ndarray:
        n = self.n
        guess = self.cfg.initial_guess
        starts = self.nodes[:-1]
        states = np.zeros((self.segments, 2 * n))
        if guess is None:
            frac = (starts - self.problem.t0) / self.problem.horizon
            states[:, :n] = np.outer(1 - frac, self.problem.x0) + np.outer(frac, self.problem.x1)
        else:
            for i in range(n):
                states[:, i] = np.interp(starts, guess.grid, guess.x[:, i])
                if guess.lam is not None:
                    states[:, n + i] = np.interp(starts, guess.grid, guess.lam[:, i])
        states[0, :n] = self.problem.x0
        return self.pack(states)

    def _integrate(self, rhs, span, y0, dense=False):
        sol = integrate.solve_ivp(rhs, span, y0, method=self.cfg.method, rtol=self.cfg.integrator_tol,
                                  atol=self.cfg.integrator_tol * 1e-2, dense_output=dense)
        if not sol.success or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegratorFailureError(
                f"Segment integration on [{span[0]:.6g}, {span[1]:.6g}] failed: {sol.message}. "
                "Please increase the number of segments")
        return sol

    def propagate(self, k: int, z0: np.ndarray, with_sensitivity: bool) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """End state of segment k and, if asked, its 2n×2n sensitivity matrix"""
        span = (self.nodes[k], self.nodes[k + 1])
        dim = 2 * self.n
        if not with_sensitivity:
            return self._integrate(self.ham.field, span, z0).y[:, -1], None
        if self.cfg.jacobian == 'analytic':
            def rhs(t, y):
                z = y[:dim]
                Phi = y[dim:].reshape(dim, dim)
                return np.concatenate([self.ham.field(t, z), (self.ham.jacobian(t, z) @ Phi).ravel()])

            y0 = np.concatenate([z0, np.eye(dim).ravel()])
            end = self._integrate(rhs, span, y0).y[:, -1]
            return end[:dim], end[dim:].reshape(dim, dim)
        base = self._integrate(self.ham.field, span, z0).y[:, -1]
        sens = np.empty((dim, dim))
        for j in range(dim):
            step = self.cfg.fd_step * max(1.0, abs(z0[j]))
            e = np.zeros(dim)
            e[j] = step
            plus = self._integrate(self.ham.field, span, z0 + e).y[:, -1]
            minus = self._integrate(self.ham.field, span, z0 - e).y[:, -1]
            sens[:, j] = (plus - minus) / (2 * step)
        return base, sens

    def _propagate_all(self, states: np.ndarray, with_sensitivity: bool):
        jobs = range(self.segments)
        call = lambda k: self.propagate(k, states[k], with_sensitivity)
        if self.cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.workers) as pool:
                return list(pool.map(call, jobs))
        return [call(k) for k in jobs]

    def residual(self, w: np.ndarray, with_jacobian: bool = False):
        """Matching defects plus the terminal condition x(t1) = x1"""
        n = self.n
        K = self.segments
        states = self.unpack(w)
        results = self._propagate_all(states, with_jacobian)
        F = np.empty(n + 2 * n * (K - 1))
        for k in range(K - 1):
            F[2 * n * k: 2 * n * (k + 1)] = results[k][0] - states[k + 1]
        F[2 * n * (K - 1):] = results[K - 1][0][:n] - self.problem.x1
        if not with_jacobian:
            return F, None
        size = F.size
        Jm = np.zeros((size, size))

        def col(k):
            # column offset of node k's unknowns; node 0 only has λ
            return 0 if k == 0 else n + 2 * n * (k - 1)

        for k in range(K):
            Phi = results[k][1]
            block = Phi[:, n:] if k == 0 else Phi
            c = col(k)
            width = block.shape[1]
            if k < K - 1:
                rows = slice(2 * n * k, 2 * n * (k + 1))
                Jm[rows, c:c + width] = block
                c_next = col(k + 1)
                Jm[rows, c_next:c_next + 2 * n] = -np.eye(2 * n)
            else:
                rows = slice(2 * n * (K - 1), size)
                Jm[rows, c:c + width] = block[:n]
        return F, Jm

    def newton(self) -> np.ndarray:
        w = self.initial_unknowns()
        self.history = []
        for it in range(1, self.cfg.max_newton_iters + 1):
            F, Jm = self.residual(w, with_jacobian=True)
            norm = float(np.max(np.abs(F)))
            self.history.append(norm)
            logger.info("Newton iteration %d: defect %.3e (%d segments)", it - 1, norm, self.segments)
            if norm <= self.cfg.newton_tol:
                self.iterations = it - 1
                return w
            try:
                delta = np.linalg.solve(Jm, F)
            except np.linalg.LinAlgError:
                delta = np.linalg.lstsq(Jm, F, rcond=None)[0]
            alpha = 1.0
            while alpha >= 1.0 / 256:
                trial = w - alpha * delta
                try:
                    F_trial, _ = self.residual(trial)
                    trial_norm = float(np.max(np.abs(F_trial)))
                except IntegratorFailureError:
                    trial_norm = np.inf
                if np.isfinite(trial_norm) and trial_norm < (1.0 - 1e-4 * alpha) * norm:
                    break
                alpha /= 2.0
            else:
                raise NewtonDivergedError(
                    f"Newton stalled at defect {norm:.3e} after {it} iterations. "
                    "Please use more segments or a composite warm start")
            w = trial
        F, _ = self.residual(w)
        norm = float(np.max(np.abs(F)))
        self.history.append(norm)
        if norm <= self.cfg.newton_tol:
            self.iterations = self.cfg.max_newton_iters
            return w
        raise NewtonDivergedError(
            f"Newton did not converge in {self.cfg.max_newton_iters} iterations (defect {norm:.3e}). "
            "Please use more segments or a composite warm start")

    def sample(self, w: np.ndarray, grid: np.ndarray) -> TrajectorySolution:
        n = self.n
        states = self.unpack(w)
        z = np.empty((grid.size, 2 * n))
        for k in range(self.segments):
            a, b = self.nodes[k], self.nodes[k + 1]
            last = k == self.segments - 1
            mask = (grid >= a) & ((grid <= b) if last else (grid < b))
            if not np.any(mask):
                continue
            sol = self._integrate(self.ham.field, (a, b), states[k], dense=True)
            z[mask] = sol.sol(grid[mask]).T
        x, lam = z[:, :n], z[:, n:]
        u = np.array([self.ham.control(x[i], lam[i]) for i in range(grid.size)])
        xdot = np.array([self.ham.field(grid[i], z[i])[:n] for i in range(grid.size)])
        return TrajectorySolution(grid=grid, x=x, lam=lam, u=u, flavor=Flavor.ORACLE, xdot=xdot)

    def solve(self, grid: Optional[np.ndarray] = None) -> TrajectorySolution:
        if grid is None:
            grid = self.problem.uniform_grid(1e-3)
        w = self.newton()
        logger.info("Shooting converged in %d Newton iterations", self.iterations)
        return self.sample(w, np.asarray(grid, dtype=float))


def solve_tpbvp(problem: TrackingProblem, cfg: Optional[ShootingConfig] = None,
                grid: Optional[np.ndarray] = None) -> TrajectorySolution:
    """Solve the raw necessary conditions; returns an oracle-flavored trajectory"""
    return MultipleShootingSolver(problem, cfg).solve(grid)
