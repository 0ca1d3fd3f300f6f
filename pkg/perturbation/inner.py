"""
Boundary Layers
Inner solutions on stretched time τ = (t − t0)/ε (left) and τ = (t1 − t)/ε (right)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple

import numpy as np
from scipy import integrate

from core.errors import (IntegratorFailureError, NoDecayError, NonHyperbolicError,
                         NotSupportedError, NotTwoDimClassError, VanishingBError)
from core.types import ControlAffineSystem, TrackingProblem
from perturbation.outer import OuterSolution, planar_coefficients
from perturbation.projectors import projector_set

logger = logging.getLogger(__name__)

E_FOLDINGS = 40.0
B_THRESHOLD = 1e-8
SETTLE_TOL = 1e-8
SIDES = ('left', 'right')


@dataclass(frozen=True, eq=False)
class InnerSolution:
    """
    Boundary layer profile PX_L(τ) or PX_R(τ).

    `evaluate(tau)` returns (PX, dPX/dτ) for arbitrary τ ≥ 0; past tau_max the
    layer has settled and the limit value is returned.
    """

    side: str
    tau_grid: np.ndarray
    PX_layer: np.ndarray
    limit_value: np.ndarray
    boundary_value: np.ndarray
    decay_rate: float
    tau_max: float
    profile: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]] = field(repr=False)

    def evaluate(self, tau) -> Tuple[np.ndarray, np.ndarray]:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        value, deriv = self.profile(np.minimum(tau, self.tau_max))
        settled = tau > self.tau_max
        if np.any(settled):
            value = value.copy()
            deriv = deriv.copy()
            value[settled] = self.limit_value
            deriv[settled] = 0.0
        return value, deriv


def _check_side(side: str):
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")


def _layer_extent(problem: TrackingProblem, rate: float) -> Tuple[float, bool]:
    tau_max = E_FOLDINGS / rate
    capped = False
    if problem.epsilon > 0.0:
        cap = problem.horizon / (4.0 * problem.epsilon)
        if tau_max > cap:
            tau_max, capped = cap, True
    return tau_max, capped


def _package(side, profile, limit, boundary, rate, tau_max, samples=401) -> InnerSolution:
    tau_grid = np.linspace(0.0, tau_max, samples)
    values, _ = profile(tau_grid)
    values[0] = boundary
    return InnerSolution(
        side=side, tau_grid=tau_grid, PX_layer=values, limit_value=np.asarray(limit, dtype=float),
        boundary_value=np.asarray(boundary, dtype=float), decay_rate=float(rate),
        tau_max=float(tau_max), profile=profile,
    )


def _planar_layer(problem: TrackingProblem, side: str, target: float) -> InnerSolution:
    _check_side(side)
    planar_coefficients(problem)
    system = problem.system
    s2 = problem.S[1, 1]
    root_s2 = np.sqrt(s2)
    xb = problem.x0 if side == 'left' else problem.x1
    x_fixed, yb = float(xb[0]), float(xb[1])
    ps = projector_set(system, problem.S, xb)
    P = ps.P

    def gain(y):
        return system.input_matrix(np.array([x_fixed, y]))[1, 0]

    path = np.linspace(yb, target, 201)
    gains = np.array([gain(y) for y in path])
    if np.min(np.abs(gains)) < B_THRESHOLD or np.any(np.sign(gains) != np.sign(gains[0])):
        raise VanishingBError(
            f"Input gain b vanishes on the {side} layer path between y={yb:.6g} and y={target:.6g}; "
            "control authority is lost. Please move the boundary state")
    gain_varies = any(abs(system.input_gradient(np.array([x_fixed, y]))[1, 0, 1]) > 0.0 for y in path)

    def embed(y, base=x_fixed):
        return np.column_stack([np.full(y.size, base), y]) @ P.T

    limit = P @ np.array([x_fixed, target])
    boundary = P @ xb

    if not gain_varies:
        rate = root_s2 * abs(gains[0])
        tau_max, _ = _layer_extent(problem, rate)

        def profile(tau):
            decay = np.exp(-rate * tau)
            y = target + decay * (yb - target)
            return embed(y), embed(-rate * (y - target), 0.0)

        logger.info("%s layer: exponential, rate %.6g, tau_max %.3g", side, rate, tau_max)
        return _package(side, profile, limit, boundary, rate, tau_max)

    rate = root_s2 * abs(gain(target))
    slowest = root_s2 * np.min(np.abs(gains))
    tau_max, capped = _layer_extent(problem, slowest)

    def rhs(tau, y):
        return root_s2 * (target - y) * np.abs(gain(y[0]))

    sol = integrate.solve_ivp(rhs, (0.0, tau_max), [yb], method='RK45', rtol=1e-10, atol=1e-12,
                              dense_output=True)
    if not sol.success:
        raise IntegratorFailureError(f"{side} layer integration failed: {sol.message}")
    gap = abs(sol.y[0, -1] - target)
    if gap > abs(yb - target) + SETTLE_TOL:
        raise NoDecayError(f"{side} layer moves away from its matching value {target:.6g}")
    if gap > SETTLE_TOL * max(1.0, abs(target)):
        if not capped:
            raise NoDecayError(
                f"{side} layer did not settle within {tau_max:.3g} stretched time units (gap {gap:.3e})")
        logger.warning("%s layer truncated at tau_max %.3g with gap %.3e; epsilon is large for this horizon",
                       side, tau_max, gap)

    def profile(tau):
        y = sol.sol(tau)[0]
        dy = root_s2 * (target - y) * np.abs(np.array([gain(v) for v in y]))
        return embed(y), embed(dy, 0.0)

    logger.info("%s layer: nonlinear gain, rate %.6g, tau_max %.3g", side, rate, tau_max)
    return _package(side, profile, limit, boundary, rate, tau_max)


def inner_left_2d(problem: TrackingProblem, y_init: float) -> InnerSolution:
    """Left layer Y_L' = √s2 (y_init − Y_L)|b(x0, Y_L)|, Y_L(0) = y0"""
    return _planar_layer(problem, 'left', float(y_init))


def inner_right_2d(problem: TrackingProblem, y_end: float) -> InnerSolution:
    """Right layer in τ = (t1 − t)/ε, settling to y_end = Y(t1)"""
    return _planar_layer(problem, 'right', float(y_end))


def inner_linear_constB(problem: TrackingProblem, side: str, limit_value: np.ndarray) -> InnerSolution:
    """
    Layer for a state-independent B.

    With ζ defined by PX_L − limit = B ζ the layer equation reduces to
    ζ'' = (BᵀSB) ζ; only the decaying modes are kept.

    Raises:
        NotSupportedError: if B depends on the state
        NonHyperbolicError: if BᵀSB has a non-positive eigenvalue
    """
    _check_side(side)
    system = problem.system
    xb = problem.x0 if side == 'left' else problem.x1
    if not system.constant_B:
        raise NotSupportedError(
            f"Model '{system.name}' has a state-dependent B; the linear layer solver needs constant B")
    ps = projector_set(system, problem.S, xb)
    B = ps.B
    gram = B.T @ problem.S @ B
    mu, vecs = np.linalg.eigh(0.5 * (gram + gram.T))
    if np.any(mu <= 1e-14 * max(1.0, np.abs(mu).max())):
        raise NonHyperbolicError("Layer operator has no decaying mode in some direction; matching is impossible")
    rates = np.sqrt(mu)
    limit = ps.P @ np.asarray(limit_value, dtype=float)
    boundary = ps.P @ xb
    coeffs = vecs.T @ (ps.bg @ (boundary - limit))
    basis = B @ vecs

    def profile(tau):
        decay = np.exp(-np.outer(tau, rates)) * coeffs
        return limit + decay @ basis.T, -(decay * rates) @ basis.T

    rate = float(rates.min())
    tau_max, _ = _layer_extent(problem, rate)
    logger.info("%s layer: linear, rates %s, tau_max %.3g", side, np.array2string(rates, precision=6), tau_max)
    return _package(side, profile, limit, boundary, rate, tau_max)


def solve_boundary_layers(outer: OuterSolution, workers: int = 2) -> Tuple[InnerSolution, InnerSolution]:
    """
    Solve both layers matched to the outer solution, left and right concurrently.

    The planar reduction is preferred; constant-B systems use the linear
    solver; anything else is not supported at leading order.
    """
    problem = outer.problem
    left_end = outer.endpoint('left')
    right_end = outer.endpoint('right')
    try:
        planar_coefficients(problem)
        jobs = [(inner_left_2d, (problem, left_end['X'][1])),
                (inner_right_2d, (problem, right_end['X'][1]))]
    except NotTwoDimClassError:
        if not problem.system.constant_B:
            raise NotSupportedError(
                f"No boundary-layer reduction for model '{problem.system.name}' with state-dependent B. "
                "Please use the exact ε=0 path, where layers collapse to jumps")
        jobs = [(inner_linear_constB, (problem, 'left', left_end['PX'])),
                (inner_linear_constB, (problem, 'right', right_end['PX']))]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [pool.submit(fn, *args) for fn, args in jobs]
        left, right = (f.result() for f in futures)
    return left, right


def v_matrix(system: ControlAffineSystem, S: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """V_ij = Σ_kl ∂_j B_il B^g_lk y_k"""
    ps = projector_set(system, S, x)
    return np.einsum('ilj,lk,k->ij', system.input_gradient(x), ps.bg, np.asarray(y, dtype=float))


def u_matrix(system: ControlAffineSystem, S: np.ndarray, x: np.ndarray) -> np.ndarray:
    """U = −∇B B^g R, i.e. −V evaluated with y = R(x)"""
    return -v_matrix(system, S, x, system.drift(x))


def check_right_costate_identity(system: ControlAffineSystem, S: np.ndarray,
                                 states: Sequence[np.ndarray], seed: int = 0) -> float:
    """
    Max |Qᵀ Vᵀ Qᵀ| over states and random directions y.

    Zero means the right-layer co-state equation Qᵀ Λ_R' = −Qᵀ Vᵀ Qᵀ Λ_R
    leaves QᵀΛ_R constant, as on the left.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in states:
        x = np.asarray(x, dtype=float)
        Q = projector_set(system, S, x).Q
        for _ in range(4):
            V = v_matrix(system, S, x, rng.standard_normal(system.n))
            worst = max(worst, float(np.max(np.abs(Q.T @ V.T @ Q.T))))
    return worst
