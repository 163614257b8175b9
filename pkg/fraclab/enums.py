# Enums
from enum import Enum


class Regime(Enum):
    """Well-posedness regime of the singular problem, decided by q(2s - 1) < 2s + 1."""
    STANDARD = 'standard'
    VERY_SINGULAR = 'very_singular'


class ConeRegime(Enum):
    """Boundary behaviour class of solutions, decided by q against 1."""
    Q_BELOW_1 = 'q_below_1'
    Q_EQUAL_1 = 'q_equal_1'
    Q_ABOVE_1 = 'q_above_1'

    @classmethod
    def from_q(cls, q):
        if q < 1:
            return cls.Q_BELOW_1
        elif q == 1:
            return cls.Q_EQUAL_1
        else:
            return cls.Q_ABOVE_1


class Direction(Enum):
    ASCENDING = 'ascending'  # Monotone iteration started from the subsolution
    DESCENDING = 'descending'  # Monotone iteration started from the supersolution


class RunKind(Enum):
    SOURCE = 'G'  # Forcing is a prescribed source h(t, x)
    SEMILINEAR = 'P'  # Forcing is the lagged nonlinearity f(x, u^{k-1})
