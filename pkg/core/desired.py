"""
Desired Trajectories
Finite sums of constant, polynomial and harmonic terms with analytic derivatives
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

TERM_KINDS = ('constant', 'poly', 'cos', 'sin')


@dataclass(frozen=True)
class Term:
    """
    One additive term of a desired-trajectory component.

    Fields:
    -------
    kind   : 'constant' | 'poly' | 'cos' | 'sin'
    coef   : amplitude (or the constant itself)
    power  : exponent k of t**k for 'poly'
    omega  : angular frequency for 'cos' / 'sin'
    phase  : phase offset for 'cos' / 'sin'
    """

    kind: str
    coef: float
    power: int = 0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise ValueError(f"Unknown term kind '{self.kind}'. Please use one of {TERM_KINDS}")
        if self.kind == 'poly' and self.power < 0:
            raise ValueError("Polynomial powers must be nonnegative")

    def value(self, t: np.ndarray) -> np.ndarray:
        if self.kind == 'constant':
            return np.full_like(t, self.coef, dtype=float)
        if self.kind == 'poly':
            return self.coef * t ** self.power
        arg = self.omega * t + self.phase
        if self.kind == 'cos':
            return self.coef * np.cos(arg)
        return self.coef * np.sin(arg)

    def derivative_terms(self) -> List['Term']:
        """Terms of d/dt of this term (empty for constants)"""
        if self.kind == 'constant' or (self.kind == 'poly' and self.power == 0):
            return []
        if self.kind == 'poly':
            if self.power == 1:
                return [Term('constant', self.coef)]
            return [Term('poly', self.coef * self.power, power=self.power - 1)]
        if self.omega == 0.0:
            return []
        if self.kind == 'cos':
            return [Term('sin', -self.coef * self.omega, omega=self.omega, phase=self.phase)]
        return [Term('cos', self.coef * self.omega, omega=self.omega, phase=self.phase)]

    def to_dict(self) -> Dict:
        if self.kind == 'constant':
            return {'type': 'constant', 'coef': self.coef}
        if self.kind == 'poly':
            return {'type': 'poly', 'coef': self.coef, 'power': self.power}
        return {'type': self.kind, 'coef': self.coef, 'omega': self.omega, 'phase': self.phase}

    @staticmethod
    def from_dict(data: Dict) -> 'Term':
        kind = data.get('type')
        if kind not in TERM_KINDS:
            raise ValueError(f"term type must be one of {TERM_KINDS}, got {kind!r}")
        return Term(
            kind=kind,
            coef=float(data.get('coef', 0.0)),
            power=int(data.get('power', 0)),
            omega=float(data.get('omega', 0.0)),
            phase=float(data.get('phase', 0.0)),
        )


@dataclass(frozen=True)
class DesiredTrajectory:
    """
    Desired state trajectory x_d(t), one term list per state component.

    Library callers may instead pass `value_fn` / `derivative_fn` callables
    (t -> n-vector); such trajectories cannot be written to config files.
    """

    components: Tuple[Tuple[Term, ...], ...] = ()
    value_fn: Optional[Callable] = field(default=None, compare=False)
    derivative_fn: Optional[Callable] = field(default=None, compare=False)
    dimension: int = 0

    def __post_init__(self):
        if self.value_fn is None and not self.components:
            raise ValueError("A desired trajectory needs term lists or a value function")
        if self.value_fn is not None and self.derivative_fn is None:
            raise ValueError("Callable desired trajectories must also supply derivative_fn")
        if self.components:
            object.__setattr__(self, 'dimension', len(self.components))
        elif self.dimension <= 0:
            raise ValueError("Callable desired trajectories must declare their dimension")

    @property
    def n(self) -> int:
        return self.dimension

    @property
    def is_serializable(self) -> bool:
        return self.value_fn is None

    def evaluate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate value and first derivative.

        Args:
            t: scalar time or 1-D array of times

        Returns:
            (value, derivative), each of shape (n,) for scalar t or (len(t), n)
        """
        t_arr = np.asarray(t, dtype=float)
        scalar = t_arr.ndim == 0
        ts = np.atleast_1d(t_arr)
        if self.value_fn is not None:
            value = np.array([np.asarray(self.value_fn(s), dtype=float) for s in ts])
            deriv = np.array([np.asarray(self.derivative_fn(s), dtype=float) for s in ts])
        else:
            value = np.zeros((ts.size, self.n))
            deriv = np.zeros((ts.size, self.n))
            for i, terms in enumerate(self.components):
                for term in terms:
                    value[:, i] += term.value(ts)
                    for d in term.derivative_terms():
                        deriv[:, i] += d.value(ts)
        if scalar:
            return value[0], deriv[0]
        return value, deriv

    def derivative(self) -> 'DesiredTrajectory':
        """The trajectory ẋ_d as a new term-based trajectory"""
        if not self.is_serializable:
            raise ValueError("Symbolic derivative needs a term-based trajectory")
        comps = []
        for terms in self.components:
            d_terms = [d for term in terms for d in term.derivative_terms()]
            comps.append(tuple(d_terms) if d_terms else (Term('constant', 0.0),))
        return DesiredTrajectory(components=tuple(comps))

    def to_dict(self) -> Dict:
        if not self.is_serializable:
            raise ValueError("Callable desired trajectories cannot be serialized")
        return {'components': [[term.to_dict() for term in terms] for terms in self.components]}

    @staticmethod
    def from_dict(data: Dict) -> 'DesiredTrajectory':
        comps = tuple(tuple(Term.from_dict(t) for t in terms) for terms in data['components'])
        return DesiredTrajectory(components=comps)

    @staticmethod
    def from_terms(components: Sequence[Sequence[Term]]) -> 'DesiredTrajectory':
        return DesiredTrajectory(components=tuple(tuple(c) for c in components))

    @staticmethod
    def constant(values: Sequence[float]) -> 'DesiredTrajectory':
        return DesiredTrajectory(components=tuple((Term('constant', float(v)),) for v in values))


def eval_desired(xd: DesiredTrajectory, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Return x_d(t) and ẋ_d(t)"""
    return xd.evaluate(t)


def stack_components(first: Sequence[Term], second: Sequence[Term]) -> DesiredTrajectory:
    return DesiredTrajectory(components=(tuple(first), tuple(second)))


def pendulum_fig1_profile() -> Tuple[Term, ...]:
    """x_d(t) = cos(2πt) − 2t"""
    return (Term('cos', 1.0, omega=2 * np.pi), Term('poly', -2.0, power=1))


def pendulum_fig1() -> DesiredTrajectory:
    """Pendulum target with y_d = x_d + sin(4πt), taken literally"""
    xd = pendulum_fig1_profile()
    yd = xd + (Term('sin', 1.0, omega=4 * np.pi),)
    return stack_components(xd, yd)


def pendulum_fig1_realizable() -> DesiredTrajectory:
    """Pendulum target with y_d = ẋ_d"""
    xd = DesiredTrajectory(components=(pendulum_fig1_profile(),))
    return stack_components(xd.components[0], xd.derivative().components[0])


PRESETS = {
    'pendulum_fig1': pendulum_fig1,
    'pendulum_fig1_realizable': pendulum_fig1_realizable,
}
