"""
Outer Solution
Linear two-point boundary value problem for (QᵀΛ, QX) with PX recovered
algebraically; generic linear shooting for any n and a closed form for planar
systems ẋ = a0 + a1 x + a2 y, ẏ = R + b u
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
from scipy import integrate

from core.errors import (IntegratorFailureError, NotLinearizableError, NotTwoDimClassError,
                         ShootingSingularError)
from core.types import TrackingProblem
from perturbation.projectors import (LinearizingReport, ProjectorSet, default_samples, projector_set,
                                     verify_linearizing)

logger = logging.getLogger(__name__)

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
SHOOTING_COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class OuterSystem:
    """
    d/dt (QᵀΛ, QX) = M (QᵀΛ, QX) + forcing(t).

    Fields:
    -------
    M          : (2n, 2n) block matrix
    forcing    : t -> (2n,) inhomogeneity, vectorized over arrays of t
    Aeff, beff : affine part of Q·R used for the blocks
    projectors : state-independent projector set
    """

    M: np.ndarray
    forcing: Callable[[np.ndarray], np.ndarray]
    Aeff: np.ndarray
    beff: np.ndarray
    projectors: ProjectorSet

    @property
    def n(self) -> int:
        return self.Aeff.shape[0]

    @property
    def rank(self) -> int:
        """n − p, the number of outer degrees of freedom per half"""
        return self.n - self.projectors.p


@dataclass(frozen=True, eq=False)
class OuterSolution:
    """
    Outer solution sampled on a grid.

    `evaluate(t)` gives the same quantities at arbitrary times inside [t0, t1].
    """

    grid: np.ndarray
    QLambda: np.ndarray
    QX: np.ndarray
    PX: np.ndarray
    X: np.ndarray
    Xdot: np.ndarray
    lambda_init: np.ndarray
    projectors: ProjectorSet
    problem: TrackingProblem
    method: str
    evaluator: Callable[[np.ndarray], Dict[str, np.ndarray]] = field(repr=False)

    def evaluate(self, t) -> Dict[str, np.ndarray]:
        """Return dict with QLambda, QX, PX, X, Xdot, QLambda_dot arrays of shape (len(t), n)"""
        return self.evaluator(np.atleast_1d(np.asarray(t, dtype=float)))

    def endpoint(self, side: str) -> Dict[str, np.ndarray]:
        t = self.problem.t0 if side == 'left' else self.problem.t1
        values = self.evaluate(t)
        return {k: v[0] for k, v in values.items()}


def build_outer_system(problem: TrackingProblem, report: LinearizingReport) -> OuterSystem:
    """
    Assemble M and the forcing from (Q, A, S, Ω).

    Raises:
        NotLinearizableError: if the report fails either linearizing condition
    """
    if not report.passed:
        raise NotLinearizableError(
            f"Linearizing assumption fails for {problem.system.name}: "
            f"omega deviation {report.omega_deviation:.3e}, QR residual {report.qr_residual:.3e} "
            f"(tolerance {report.tol:.1e}). Please use a system with constant Ω and affine Q·R")
    ps = report.reference
    Q, P, omega, S = ps.Q, ps.P, ps.omega, problem.S
    A, b = report.fitted_A, report.fitted_b
    M = np.block([
        [-Q.T @ A.T @ Q.T, -Q.T @ S @ Q],
        [-Q @ A @ omega @ A.T @ Q.T, Q @ A @ Q],
    ])
    upper = Q.T @ S @ Q
    lower = Q @ A @ P
    offset = Q @ b
    xd = problem.xd

    def forcing(t):
        values, _ = xd.evaluate(np.atleast_1d(t))
        return np.hstack([values @ upper.T, values @ lower.T + offset])

    return OuterSystem(M=M, forcing=forcing, Aeff=A, beff=b, projectors=ps)


def _range_basis(mat: np.ndarray, rank: int) -> np.ndarray:
    u, _, _ = np.linalg.svd(mat)
    return u[:, :rank]


def _integrate(rhs, t_span, y0, rtol, atol, method):
    sol = integrate.solve_ivp(rhs, t_span, y0, method=method, rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise IntegratorFailureError(f"Outer integration failed: {sol.message}")
    return sol


def solve_outer_bvp(sys: OuterSystem, problem: TrackingProblem, grid: Optional[np.ndarray] = None,
                    rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                    method: str = 'RK45') -> OuterSolution:
    """
    Solve the outer BVP by linear shooting.

    The particular solution and n−p homogeneous solutions are integrated
    together; the unknown QᵀΛ(t0) follows from QX(t1) = Q x1, after which the
    solution is re-integrated from the determined initial value.

    Raises:
        ShootingSingularError: if the shooting matrix is singular to tolerance
        IntegratorFailureError: if the integrator reports failure
    """
    n = sys.n
    r = sys.rank
    ps = sys.projectors
    P, Q, omega, A = ps.P, ps.Q, ps.omega, sys.Aeff
    t0, t1 = problem.t0, problem.t1
    if grid is None:
        grid = problem.uniform_grid(1e-3)
    grid = np.asarray(grid, dtype=float)

    if r == 0:
        lambda_init = np.zeros(n)

        def evaluate_full(t):
            xd, xd_dot = problem.xd.evaluate(t)
            zeros = np.zeros_like(xd)
            return {'QLambda': zeros, 'QLambda_dot': zeros, 'QX': zeros,
                    'PX': xd @ P.T, 'X': xd @ P.T, 'Xdot': xd_dot @ P.T}
    else:
        V = _range_basis(Q.T, r)
        U = _range_basis(Q, r)
        M = sys.M
        cols = r + 1

        def fundamental_rhs(t, z):
            Z = z.reshape(2 * n, cols)
            dZ = M @ Z
            dZ[:, 0] += sys.forcing(t)[0]
            return dZ.ravel()

        Z0 = np.zeros((2 * n, cols))
        Z0[n:, 0] = Q @ problem.x0
        Z0[:n, 1:] = V
        fund = _integrate(fundamental_rhs, (t0, t1), Z0.ravel(), rtol, atol, method)
        Z1 = fund.y[:, -1].reshape(2 * n, cols)
        shoot = U.T @ Z1[n:, 1:]
        rhs = U.T @ (Q @ problem.x1 - Z1[n:, 0])
        cond = np.linalg.cond(shoot)
        logger.debug("Outer shooting matrix condition number %.3e", cond)
        if not np.isfinite(cond) or cond > SHOOTING_COND_LIMIT:
            raise ShootingSingularError(
                f"Outer shooting matrix is singular (condition number {cond:.3e}); "
                "the horizon may contain a conjugate point. Please shorten the horizon or change S")
        coeffs = np.linalg.solve(shoot, rhs)
        lambda_init = V @ coeffs

        def rhs_single(t, z):
            return M @ z + sys.forcing(t)[0]

        z0 = np.concatenate([lambda_init, Q @ problem.x0])
        sol = _integrate(rhs_single, (t0, t1), z0, rtol, atol, method)
        mismatch = np.max(np.abs(sol.y[n:, -1] - Q @ problem.x1))
        logger.info("Outer shooting: terminal mismatch %.2e", mismatch)

        def evaluate_full(t):
            t = np.clip(t, t0, t1)
            z = sol.sol(t).T
            dz = z @ M.T + sys.forcing(t)
            xd, xd_dot = problem.xd.evaluate(t)
            qlam, qx = z[:, :n], z[:, n:]
            px = xd @ P.T - qlam @ (omega @ A.T).T
            pxdot = xd_dot @ P.T - dz[:, :n] @ (omega @ A.T).T
            return {'QLambda': qlam, 'QLambda_dot': dz[:, :n], 'QX': qx, 'PX': px,
                    'X': px + qx, 'Xdot': pxdot + dz[:, n:]}

    return _sample(grid, evaluate_full, lambda_init, ps, problem, 'generic')


def _sample(grid, evaluator, lambda_init, ps, problem, method) -> OuterSolution:
    values = evaluator(grid)
    return OuterSolution(
        grid=grid, QLambda=values['QLambda'], QX=values['QX'], PX=values['PX'], X=values['X'],
        Xdot=values['Xdot'], lambda_init=np.asarray(lambda_init, dtype=float), projectors=ps,
        problem=problem, method=method, evaluator=evaluator,
    )


def planar_coefficients(problem: TrackingProblem):
    """
    Return (a0, a1, a2, s1, s2) for a planar-class problem.

    Raises:
        NotTwoDimClassError: if the system or weight is outside the class
    """
    system = problem.system
    if system.n != 2 or system.p != 1 or system.planar is None:
        raise NotTwoDimClassError(
            f"Model '{system.name}' is not of the form ẋ = a0 + a1 x + a2 y, ẏ = R + b u. "
            "Please use the generic outer solver")
    S = problem.S
    if abs(S[0, 1]) > 0.0 or abs(S[1, 0]) > 0.0:
        raise NotTwoDimClassError("The planar closed form needs a diagonal weight S")
    for x in (problem.x0, problem.x1):
        if abs(system.input_matrix(x)[0, 0]) > 0.0:
            raise NotTwoDimClassError("The control must act on the second component only")
    a0, a1, a2 = system.planar
    if a2 == 0:
        raise NotTwoDimClassError("The planar closed form needs a2 != 0")
    return float(a0), float(a1), float(a2), float(S[0, 0]), float(S[1, 1])


def transition_matrix(delta, a1: float, a2: float, s1: float, s2: float) -> np.ndarray:
    """Φ(t, t0) as a (len(delta), 2, 2) array of cosh/sinh blocks"""
    phi = np.sqrt(a1 * a1 * s2 + a2 * a2 * s1) / np.sqrt(s2)
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    ch = np.cosh(phi * delta)
    sh = np.sinh(phi * delta) / phi
    out = np.empty((delta.size, 2, 2))
    out[:, 0, 0] = ch + a1 * sh
    out[:, 0, 1] = a2 * sh
    out[:, 1, 0] = a2 * s1 / s2 * sh
    out[:, 1, 1] = ch - a1 * sh
    return out


def growth_rate(a1: float, a2: float, s1: float, s2: float) -> float:
    """φ1 = sqrt(a1² s2 + a2² s1) / sqrt(s2)"""
    return float(np.sqrt(a1 * a1 * s2 + a2 * a2 * s1) / np.sqrt(s2))


def initial_outer_y(problem: TrackingProblem, quad_tol: float = 1e-10) -> float:
    """Matching constant y_init = Y(t0) from the terminal condition X(t1) = x1"""
    a0, a1, a2, s1, s2 = planar_coefficients(problem)
    phi = growth_rate(a1, a2, s1, s2)
    t0, t1 = problem.t0, problem.t1
    T = t1 - t0
    x0, x1 = problem.x0[0], problem.x1[0]
    xd = problem.xd

    def sinh_part(tau):
        v, _ = xd.evaluate(tau)
        return (a2 * s1 / s2 * v[0] - a1 * v[1]) * np.sinh(phi * (t1 - tau))

    def cosh_part(tau):
        v, _ = xd.evaluate(tau)
        return v[1] * np.cosh(phi * (t1 - tau))

    opts = dict(epsabs=quad_tol, epsrel=quad_tol, limit=200)
    i_sinh, _ = integrate.quad(sinh_part, t0, t1, **opts)
    i_cosh, _ = integrate.quad(cosh_part, t0, t1, **opts)
    csch = 1.0 / np.sinh(phi * T)
    yd0 = xd.evaluate(t0)[0][1]
    return float(
        csch * (i_sinh - phi * i_cosh)
        + (a2 * yd0 - a1 * x0 - a0) / a2
        - csch / (a2 * phi) * (np.cosh(phi * T) * (a0 * a1 + phi * phi * x0) - a0 * a1 - phi * phi * x1)
    )


def solve_outer_2d(problem: TrackingProblem, grid: Optional[np.ndarray] = None,
                   quad_tol: float = 1e-10) -> OuterSolution:
    """
    Closed-form outer solution for the planar class.

    (X, Y)(t) = Φ(t, t0)(x0, y_init) + ∫ Φ(t, τ) f(τ) dτ with
    f = (a0, ẏ_d + a1 y_d − (a2 s1/s2) x_d); Λ = (s2/a2)(y_d − Y).
    """
    a0, a1, a2, s1, s2 = planar_coefficients(problem)
    ps = projector_set(problem.system, problem.S, problem.x0)
    t0, t1 = problem.t0, problem.t1
    if grid is None:
        grid = problem.uniform_grid(1e-3)
    grid = np.asarray(grid, dtype=float)
    y_init = initial_outer_y(problem, quad_tol)
    z_init = np.array([problem.x0[0], y_init])
    xd = problem.xd
    K = np.array([[a1, a2], [a2 * s1 / s2, -a1]])

    def forcing(tau):
        v, d = xd.evaluate(tau)
        return np.column_stack([np.full(v.shape[0], a0), d[:, 1] + a1 * v[:, 1] - a2 * s1 / s2 * v[:, 0]])

    def evaluate_full(t):
        t = np.clip(t, t0, t1)
        span = t - t0

        def integrand(s):
            tau = t0 + s * span
            phi_blocks = transition_matrix(t - tau, a1, a2, s1, s2)
            return (span[:, None] * np.einsum('kij,kj->ki', phi_blocks, forcing(tau))).ravel()

        conv, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=quad_tol * 1e-2, epsrel=quad_tol,
                                     norm='max')
        conv = conv.reshape(t.size, 2)
        xy = np.einsum('kij,j->ki', transition_matrix(span, a1, a2, s1, s2), z_init) + conv
        v, _ = xd.evaluate(t)
        lam = s2 / a2 * (v[:, 1] - xy[:, 1])
        xy_dot = xy @ K.T + forcing(t)
        lam_dot = -a1 * lam + s1 * (v[:, 0] - xy[:, 0])
        zeros = np.zeros(t.size)
        return {
            'QLambda': np.column_stack([lam, zeros]),
            'QLambda_dot': np.column_stack([lam_dot, zeros]),
            'QX': np.column_stack([xy[:, 0], zeros]),
            'PX': np.column_stack([zeros, xy[:, 1]]),
            'X': xy,
            'Xdot': xy_dot,
        }

    logger.info("Planar outer solve: phi1 = %.6g, y_init = %.12g", growth_rate(a1, a2, s1, s2), y_init)
    lambda_init = np.array([s2 / a2 * (xd.evaluate(t0)[0][1] - y_init), 0.0])
    return _sample(grid, evaluate_full, lambda_init, ps, problem, 'closed-form')


def outer_defects(solution: OuterSolution, sys: OuterSystem, times: Optional[np.ndarray] = None,
                  h: float = 1e-5) -> Dict[str, float]:
    """
    Residuals of the outer equations using central differences of the evaluator.

    Returns:
        dict with the max ODE defect, the PX algebraic residual, max |PᵀΛ|
        and the boundary mismatches of QX
    """
    problem = solution.problem
    ps = sys.projectors
    if times is None:
        times = np.linspace(problem.t0 + h, problem.t1 - h, 1000)
    z = solution.evaluate(times)
    zp = solution.evaluate(times + h)
    zm = solution.evaluate(times - h)
    stack = lambda d: np.hstack([d['QLambda'], d['QX']])
    dz = (stack(zp) - stack(zm)) / (2 * h)
    ode = dz - stack(z) @ sys.M.T - sys.forcing(times)
    xd, _ = problem.xd.evaluate(times)
    px_expected = xd @ ps.P.T - z['QLambda'] @ (ps.omega @ sys.Aeff.T).T
    ends = solution.evaluate(np.array([problem.t0, problem.t1]))
    return {
        'ode': float(np.max(np.abs(ode))),
        'px': float(np.max(np.abs(z['PX'] - px_expected))),
        'ptlambda': float(np.max(np.abs(z['QLambda'] @ ps.P))),
        'qx0': float(np.max(np.abs(ends['QX'][0] - ps.Q @ problem.x0))),
        'qx1': float(np.max(np.abs(ends['QX'][1] - ps.Q @ problem.x1))),
    }


def solve_outer(problem: TrackingProblem, report: Optional[LinearizingReport] = None,
                grid: Optional[np.ndarray] = None, prefer_closed_form: bool = True,
                rtol: float = DEFAULT_RTOL) -> OuterSolution:
    """
    Certify the linearizing assumption (when no report is given) and solve the
    outer problem, using the planar closed form when the problem admits it.
    """
    if report is None:
        report = verify_linearizing(problem.system, problem.S, default_samples(problem))
    sys = build_outer_system(problem, report)
    if prefer_closed_form:
        try:
            planar_coefficients(problem)
            return solve_outer_2d(problem, grid)
        except NotTwoDimClassError:
            logger.debug("Planar closed form not applicable to %s; using shooting", problem.system.name)
    return solve_outer_bvp(sys, problem, grid, rtol=rtol)
