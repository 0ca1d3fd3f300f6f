"""
Model Zoo
Constructs control-affine systems for the pendulum, FitzHugh-Nagumo, SIR and
user-defined planar models
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from core.desired import DesiredTrajectory, Term, stack_components
from core.errors import NotMechanicalFormError
from core.types import ControlAffineSystem
from models.expressions import parse_expression

DEFAULT_PARAMS = {
    'pendulum': {},
    # classic excitable-regime constants; x is the inhibitor, y the activator
    'fhn': {'a': 0.7, 'b_fhn': 0.8, 'c': 0.08, 'current': 0.5},
    'sir': {'gamma': 0.1},
    'generic2d': {'a0': 0.0, 'a1': 0.0, 'a2': 1.0, 'drift': '0', 'gain': '1'},
}

SAMPLE_BOXES = {
    'pendulum': ([-3.0, -3.0], [3.0, 3.0]),
    'fhn': ([-2.5, -2.5], [2.5, 2.5]),
    'sir': ([0.05, 0.05], [1.0, 1.0]),
    'generic2d': ([-2.0, -2.0], [2.0, 2.0]),
}


@dataclass(frozen=True)
class ModelSpec:
    """Registry key plus named parameters"""

    name: str
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ValueError(f"Unknown model '{self.name}'. Please choose one of {sorted(REGISTRY)}")
        merged = dict(DEFAULT_PARAMS[self.name])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ValueError(f"Unknown parameters for model '{self.name}': {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, 'params', merged)

    def to_dict(self) -> Dict:
        return {'name': self.name, 'params': dict(self.params)}


def make_pendulum() -> ControlAffineSystem:
    """Damped pendulum ẋ = y, ẏ = −y/2 − sin x + (1 + x²/4) u"""

    def R(s):
        x, y = s
        return np.array([y, -0.5 * y - np.sin(x)])

    def gradR(s):
        x, _ = s
        return np.array([[0.0, 1.0], [-np.cos(x), -0.5]])

    def B(s):
        x, _ = s
        return np.array([[0.0], [1.0 + 0.25 * x * x]])

    def gradB(s):
        x, _ = s
        g = np.zeros((2, 1, 2))
        g[1, 0, 0] = 0.5 * x
        return g

    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    return ControlAffineSystem(
        n=2, p=1, R=R, gradR=gradR, B=B, gradB=gradB,
        affine_part=(A, np.zeros(2)), planar=(0.0, 0.0, 1.0), name='pendulum',
    )


def make_fitzhugh_nagumo(a: float = 0.7, b_fhn: float = 0.8, c: float = 0.08,
                         current: float = 0.5) -> ControlAffineSystem:
    """
    FitzHugh-Nagumo with control on the activator.

    ẋ = c (y + a − b_fhn x)          (inhibitor, linear)
    ẏ = y − y³/3 − x + current + u   (activator, cubic)
    """
    a0, a1, a2 = c * a, -c * b_fhn, c

    def R(s):
        x, y = s
        return np.array([a0 + a1 * x + a2 * y, y - y ** 3 / 3.0 - x + current])

    def gradR(s):
        _, y = s
        return np.array([[a1, a2], [-1.0, 1.0 - y * y]])

    def B(s):
        return np.array([[0.0], [1.0]])

    def gradB(s):
        return np.zeros((2, 1, 2))

    A = np.array([[a1, a2], [0.0, 0.0]])
    return ControlAffineSystem(
        n=2, p=1, R=R, gradR=gradR, B=B, gradB=gradB,
        affine_part=(A, np.array([a0, 0.0])), constant_B=True,
        planar=(a0, a1, a2), name='fhn',
    )


def make_sir(gamma: float = 0.1) -> ControlAffineSystem:
    """SIR dynamics in (S, I) with the transmission rate as control"""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")

    def R(s):
        _, i = s
        return np.array([0.0, -gamma * i])

    def gradR(s):
        return np.array([[0.0, 0.0], [0.0, -gamma]])

    def B(s):
        si, i = s
        return np.array([[-si * i], [si * i]])

    def gradB(s):
        si, i = s
        g = np.zeros((2, 1, 2))
        g[0, 0] = [-i, -si]
        g[1, 0] = [i, si]
        return g

    A = np.array([[0.0, 0.0], [0.0, -gamma]])
    return ControlAffineSystem(
        n=2, p=1, R=R, gradR=gradR, B=B, gradB=gradB,
        affine_part=(A, np.zeros(2)), name='sir',
    )


def make_generic2d(a0: float = 0.0, a1: float = 0.0, a2: float = 1.0,
                   drift: str = '0', gain: str = '1') -> ControlAffineSystem:
    """
    Planar system ẋ = a0 + a1 x + a2 y, ẏ = drift(x, y) + gain(x, y) u.

    Args:
        a0, a1, a2: coefficients of the uncontrolled linear row
        drift: expression for the controlled row drift
        gain: expression for the input gain b(x, y)
    """
    if a2 == 0:
        raise ValueError("generic2d needs a2 != 0 so the control reaches x")
    r_expr = parse_expression(drift)
    b_expr = parse_expression(gain)
    r_x, r_y = r_expr.diff('x'), r_expr.diff('y')
    b_x, b_y = b_expr.diff('x'), b_expr.diff('y')

    def R(s):
        x, y = s
        return np.array([a0 + a1 * x + a2 * y, float(r_expr(x, y))])

    def gradR(s):
        x, y = s
        return np.array([[a1, a2], [float(r_x(x, y)), float(r_y(x, y))]])

    def B(s):
        x, y = s
        return np.array([[0.0], [float(b_expr(x, y))]])

    def gradB(s):
        x, y = s
        g = np.zeros((2, 1, 2))
        g[1, 0] = [float(b_x(x, y)), float(b_y(x, y))]
        return g

    A = np.array([[a1, a2], [0.0, 0.0]])
    constant = not (b_expr.depends_on('x') or b_expr.depends_on('y'))
    return ControlAffineSystem(
        n=2, p=1, R=R, gradR=gradR, B=B, gradB=gradB,
        affine_part=(A, np.array([a0, 0.0])), constant_B=constant,
        planar=(float(a0), float(a1), float(a2)), name='generic2d',
    )


def make_realizable_target(system: ControlAffineSystem, profile: Sequence[Term]) -> DesiredTrajectory:
    """
    Build (x_d, y_d = ẋ_d) for a mechanical planar system ẋ = y.

    Raises:
        NotMechanicalFormError: if the system is not of the form ẋ = y
    """
    if system.planar is None or tuple(system.planar) != (0.0, 0.0, 1.0):
        raise NotMechanicalFormError(
            f"Model '{system.name}' is not of the mechanical form ẋ = y; "
            "realizable targets need a0 = a1 = 0 and a2 = 1")
    xd = DesiredTrajectory(components=(tuple(profile),))
    return stack_components(xd.components[0], xd.derivative().components[0])


REGISTRY: Dict[str, Callable[..., ControlAffineSystem]] = {
    'pendulum': lambda **kw: make_pendulum(),
    'fhn': make_fitzhugh_nagumo,
    'sir': make_sir,
    'generic2d': make_generic2d,
}


def make_model(spec: ModelSpec) -> ControlAffineSystem:
    return REGISTRY[spec.name](**spec.params)


def sample_box(name: str) -> Tuple[np.ndarray, np.ndarray]:
    lo, hi = SAMPLE_BOXES[name]
    return np.array(lo), np.array(hi)
