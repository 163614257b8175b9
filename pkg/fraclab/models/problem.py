import numpy as np

from ..discretization.grid import Field, values_of
from ..enums import Regime, ConeRegime
from ..exceptions import ParameterError


def validate_params(q, s):
    """Returns the regime of (q, s): standard iff q(2s - 1) < 2s + 1.

    Args:
        q (float):  Singularity exponent, q > 0.
        s (float):  Fractional order, 0 < s < 1.

    Returns:
        Regime:     `Regime.STANDARD` or `Regime.VERY_SINGULAR`.
    """
    if not q > 0:
        raise ParameterError('Singularity exponent q must be positive, got {}'.format(q))
    if not 0 < s < 1:
        raise ParameterError('Fractional order must lie in (0, 1), got {}'.format(s))
    return Regime.STANDARD if q * (2 * s - 1) < 2 * s + 1 else Regime.VERY_SINGULAR


class StationaryProblem:
    """Parameters of u + lam * ((-Delta)^s u - (u + epsilon)^(-q)) = g.

    `epsilon = 0` is the limit (singular) problem.
    """

    __slots__ = ('lam', 'q', 's', 'g', 'epsilon')

    def __init__(self, lam, q, s, g, epsilon=0.0):
        if not lam > 0:
            raise ParameterError('lambda must be positive, got {}'.format(lam))
        if not epsilon >= 0:
            raise ParameterError('epsilon must be nonnegative, got {}'.format(epsilon))
        if not isinstance(g, Field):
            raise ParameterError('Right hand side g must be a Field')
        validate_params(q, s)

        self.lam = float(lam)
        self.q = float(q)
        self.s = float(s)
        self.g = g
        self.epsilon = float(epsilon)

    @property
    def regime(self):
        return validate_params(self.q, self.s)

    @property
    def grid(self):
        return self.g.grid

    def with_epsilon(self, epsilon):
        """Returns a copy of the problem regularized with `epsilon`"""
        return StationaryProblem(self.lam, self.q, self.s, self.g, epsilon)

    def with_rhs(self, g):
        return StationaryProblem(self.lam, self.q, self.s, g, self.epsilon)

    def residual(self, op, u):
        """Returns ||u + lam (A u - (u + eps)^(-q)) - g||_inf"""
        u = values_of(u, op.grid)
        with np.errstate(divide='ignore', over='ignore', invalid='ignore'):
            r = u + self.lam * (op.dot(u) - (u + self.epsilon)**(-self.q)) - self.g.values
        return float(np.max(np.abs(r)))

    def __repr__(self):
        return "StationaryProblem(lam={}, q={}, s={}, epsilon={})".format(self.lam, self.q, self.s, self.epsilon)


class ConeEnvelope:
    """Boundary profile class of the cone of admissible fields.

    A positive field v is in the cone when k1 * profile <= v <= k2 * profile, where
    the profile is delta^s (q < 1), delta^s ln^(1/2)(r / delta^s) (q = 1) or
    delta^(2s / (q + 1)) (q > 1).
    """
    def __init__(self, q, s, r, k1=1.0, k2=1.0):
        validate_params(q, s)
        if not 0 < k1 <= k2:
            raise ParameterError('Cone constants need 0 < k1 <= k2, got ({}, {})'.format(k1, k2))
        self.q = float(q)
        self.s = float(s)
        self.r = float(r)
        self.k1 = float(k1)
        self.k2 = float(k2)
        self.regime = ConeRegime.from_q(q)
        self.log_factor = self.regime == ConeRegime.Q_EQUAL_1
        self.exponent = self.s if self.regime != ConeRegime.Q_ABOVE_1 else 2 * self.s / (self.q + 1)

    @property
    def correction(self):
        """Relative exponent of the leading correction to the profile of limit solutions.

        delta^(s(1 - q)) from the singular term when q < 1, delta^s from the data
        when q = 1, and for q > 1 the homogeneous root delta^(2s - 2 exponent) of
        the operator linearized at the profile.
        """
        if self.regime == ConeRegime.Q_BELOW_1:
            return self.s * (1 - self.q)
        if self.regime == ConeRegime.Q_EQUAL_1:
            return self.s
        return 2 * (self.s - self.exponent)

    @classmethod
    def for_grid(cls, q, s, grid, k1=1.0, k2=1.0):
        """Cone on the grid interval with the log scale r = 2 (b - a)"""
        return cls(q, s, 2 * grid.length, k1, k2)

    def profile(self, grid):
        """Returns the boundary profile sampled at the grid nodes"""
        profile = grid.delta**self.exponent
        if self.log_factor:
            log_term = np.log(self.r / grid.delta**self.s)
            if np.any(log_term <= 0):
                raise ParameterError('Log scale r = {} is too small for the interval'.format(self.r))
            profile = profile * np.sqrt(log_term)
        return profile

    def lower(self, grid):
        return Field(grid, self.k1 * self.profile(grid))

    def upper(self, grid):
        return Field(grid, self.k2 * self.profile(grid))

    def __repr__(self):
        return "ConeEnvelope(regime={}, k1={}, k2={}, exponent={}, log_factor={}, r={})".format(
            self.regime.value, self.k1, self.k2, self.exponent, self.log_factor, self.r)


class Envelopes:
    """Ordered pair of a subsolution `lower` and a supersolution `upper`.

    `constants` records how they were built (m, M, M', bound, mu).
    """
    def __init__(self, lower, upper, **constants):
        if lower.grid != upper.grid:
            raise ParameterError('Envelope grids do not match')
        self.lower = lower
        self.upper = upper
        self.constants = constants

    @property
    def grid(self):
        return self.lower.grid

    def violation(self, u):
        """Returns how far `u` leaves [lower, upper] (0 when inside)"""
        u = values_of(u, self.grid)
        below = np.max(self.lower.values - u)
        above = np.max(u - self.upper.values)
        return float(max(0.0, below, above))

    def contains(self, u, tol=1e-10):
        return self.violation(u) <= tol

    def __repr__(self):
        return "Envelopes({})".format(', '.join('{}={:.6g}'.format(k, v) for k, v in self.constants.items()))
