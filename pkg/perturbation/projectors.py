"""
Projectors and the Linearizing Assumption
Ω, P, Q, Γ and B^g at a state, their identities, and sample-based certification
that Ω is state-independent and Q·R is affine
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from core.errors import InsufficientSamplesError, SingularGramError
from core.types import RANK_TOL, ControlAffineSystem

logger = logging.getLogger(__name__)

COND_THRESHOLD = 1e12


@dataclass(frozen=True, eq=False)
class ProjectorSet:
    """
    Projection matrices at a state.

    Fields:
    -------
    omega    : B (BᵀSB)⁻¹ Bᵀ
    P, Q     : ΩS and I − ΩS
    gamma    : B^gᵀ B^g
    bg       : (BᵀSB)⁻¹ BᵀS
    at_state : state where B was evaluated
    B, S     : inputs kept for identity checks
    """

    omega: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    gamma: np.ndarray
    bg: np.ndarray
    at_state: np.ndarray
    B: np.ndarray
    S: np.ndarray

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def p(self) -> int:
        return self.bg.shape[0]

    def identity_residuals(self) -> Dict[str, float]:
        """Frobenius norms of every algebraic identity the projectors must satisfy"""
        I = np.eye(self.n)
        fro = np.linalg.norm
        return {
            'P2_minus_P': fro(self.P @ self.P - self.P),
            'Q2_minus_Q': fro(self.Q @ self.Q - self.Q),
            'P_plus_Q_minus_I': fro(self.P + self.Q - I),
            'PB_minus_B': fro(self.P @ self.B - self.B),
            'QB': fro(self.Q @ self.B),
            'omega_asymmetry': fro(self.omega - self.omega.T),
            'omegaSomega_minus_omega': fro(self.omega @ self.S @ self.omega - self.omega),
            'Pomega_minus_omega': fro(self.P @ self.omega - self.omega),
            'bgB_minus_I': fro(self.bg @ self.B - np.eye(self.p)),
            'PTgamma_minus_gamma': fro(self.P.T @ self.gamma - self.gamma),
            'gamma_asymmetry': fro(self.gamma - self.gamma.T),
            'PTS_minus_SP': fro(self.P.T @ self.S - self.S @ self.P),
            'QTgamma': fro(self.Q.T @ self.gamma),
        }


def projectors_from_matrices(B: np.ndarray, S: np.ndarray, x: Optional[np.ndarray] = None,
                             cond_threshold: float = COND_THRESHOLD) -> ProjectorSet:
    """Projectors for an explicit input matrix B and weight S"""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    S = np.asarray(S, dtype=float)
    n, p = B.shape
    sv = np.linalg.svd(B, compute_uv=False)
    if not np.all(np.isfinite(sv)) or sv.min() <= RANK_TOL * max(1.0, sv.max()):
        raise SingularGramError(
            f"B has rank below {p} at state {x}; control authority is lost there. "
            "Please keep boundary data and samples away from such states")
    gram = B.T @ S @ B
    gram = 0.5 * (gram + gram.T)
    eig = np.linalg.eigvalsh(gram)
    if eig.min() <= 0.0 or eig.max() / eig.min() > cond_threshold:
        cond = np.inf if eig.min() <= 0.0 else eig.max() / eig.min()
        raise SingularGramError(f"BᵀSB is singular to working precision (condition number {cond:.3e})")
    factor = linalg.cho_factor(gram)
    omega = B @ linalg.cho_solve(factor, B.T)
    omega = 0.5 * (omega + omega.T)
    P = omega @ S
    Q = np.eye(n) - P
    bg = linalg.cho_solve(factor, B.T @ S)
    gamma = bg.T @ bg
    at = np.zeros(n) if x is None else np.asarray(x, dtype=float)
    return ProjectorSet(omega=omega, P=P, Q=Q, gamma=gamma, bg=bg, at_state=at, B=B, S=S)


def projector_set(system: ControlAffineSystem, S: np.ndarray, x: np.ndarray,
                  cond_threshold: float = COND_THRESHOLD) -> ProjectorSet:
    """
    Evaluate Ω, P, Q, Γ and B^g at state x.

    Raises:
        SingularGramError: if B(x) is rank deficient or BᵀSB is ill-conditioned
    """
    x = np.asarray(x, dtype=float)
    return projectors_from_matrices(system.input_matrix(x), S, x, cond_threshold)


@dataclass(frozen=True, eq=False)
class LinearizingReport:
    """Sample-based certificate of the linearizing assumption"""

    omega_constant: bool
    omega_deviation: float
    qr_affine: bool
    qr_residual: float
    fitted_A: np.ndarray
    fitted_b: np.ndarray
    samples_used: int
    source: str
    tol: float
    reference: ProjectorSet

    @property
    def passed(self) -> bool:
        return self.omega_constant and self.qr_affine

    def to_dict(self) -> Dict:
        return {
            'omega_constant': bool(self.omega_constant),
            'omega_deviation': float(self.omega_deviation),
            'qr_affine': bool(self.qr_affine),
            'qr_residual': float(self.qr_residual),
            'fitted_A': self.fitted_A.tolist(),
            'fitted_b': self.fitted_b.tolist(),
            'samples_used': int(self.samples_used),
            'source': self.source,
            'tol': float(self.tol),
            'omega': self.reference.omega.tolist(),
        }


def latin_hypercube_samples(lo: Sequence[float], hi: Sequence[float], count: int = 64,
                            seed: int = 0) -> np.ndarray:
    """Latin-hypercube points in the box [lo, hi]"""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    sampler = qmc.LatinHypercube(d=lo.size, seed=seed)
    return qmc.scale(sampler.random(count), lo, hi)


def verify_linearizing(system: ControlAffineSystem, S: np.ndarray, sample_states: Sequence[np.ndarray],
                       tol: float = 1e-8) -> LinearizingReport:
    """
    Check that Ω is constant and Q·R is affine over the sample states.

    Args:
        system: control-affine system
        S: weight matrix
        sample_states: at least n+2 affinely independent states
        tol: max deviation accepted for both conditions

    Returns:
        LinearizingReport with the (A, b) used for the outer equations
    """
    X = np.atleast_2d(np.asarray(sample_states, dtype=float))
    n = system.n
    m = X.shape[0]
    if m < n + 2 or X.shape[1] != n:
        raise InsufficientSamplesError(f"Need at least {n + 2} sample states of dimension {n}, got {X.shape}")
    design = np.hstack([X, np.ones((m, 1))])
    if np.linalg.matrix_rank(design) < n + 1:
        raise InsufficientSamplesError("Sample states are not affinely independent. Please spread them out")

    sets = [projector_set(system, S, x) for x in X]
    omegas = np.array([ps.omega for ps in sets])
    deviation = float(np.max(np.abs(omegas[:, None] - omegas[None, :])))
    reference = sets[0]
    Q = reference.Q

    QR = np.array([Q @ system.drift(x) for x in X])
    coef, *_ = linalg.lstsq(design, QR)
    fit_A = coef[:n].T
    fit_b = coef[n]
    fit_residual = float(np.max(np.abs(design @ coef - QR)))

    source = 'fitted'
    A, b, residual = fit_A, fit_b, fit_residual
    if system.affine_part is not None:
        dec_A, dec_b = system.affine_part
        declared = np.array([Q @ (dec_A @ x + dec_b) for x in X])
        dec_residual = float(np.max(np.abs(declared - QR)))
        if dec_residual <= tol:
            source = 'declared'
            A, b, residual = np.array(dec_A), np.array(dec_b), dec_residual
        else:
            logger.warning("Declared affine part of %s disagrees with Q·R by %.3e; using the fit",
                           system.name, dec_residual)

    report = LinearizingReport(
        omega_constant=deviation <= tol, omega_deviation=deviation,
        qr_affine=residual <= tol, qr_residual=residual,
        fitted_A=A, fitted_b=b, samples_used=m, source=source, tol=tol, reference=reference,
    )
    logger.info("Linearizing check for %s: omega dev %.2e, QR residual %.2e (%s)",
                system.name, deviation, residual, source)
    return report


def default_samples(problem, count: int = 64, seed: int = 0) -> np.ndarray:
    """
    Latin-hypercube states in a box around the boundary data and the desired
    trajectory, padded by one unit on each side.
    """
    xd, _ = problem.xd.evaluate(np.linspace(problem.t0, problem.t1, 101))
    points = np.vstack([xd, problem.x0, problem.x1])
    lo = points.min(axis=0) - 1.0
    hi = points.max(axis=0) + 1.0
    return latin_hypercube_samples(lo, hi, count=count, seed=seed)
