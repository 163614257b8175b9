import logging

import numpy as np

from ..exceptions import ParameterError

logger = logging.getLogger(__name__)

# Samples used to check the structural claims of a nonlinearity
Y_SAMPLES = np.concatenate(([0.0], np.geomspace(1e-6, 1e4, 241)))
X_SAMPLE_COUNT = 17


class NonlinearitySpec:
    """Nonlinearity f(x, y) of the semilinear problem together with its structural constants.

    Args:
        f (callable):                   Vectorized f(x, y), y >= 0.
        lipschitz_on (callable):        lipschitz_on(lo, hi) bounds |f(x, y) - f(x, z)| / |y - z| on [lo, hi].
        lower_bound_l (float):          l >= 0 with f >= -l.
        growth_mu (float):              mu with f(x, y) <= mu * y + l.
        antiderivative_F (callable):    F(x, z) = int_0^z f(x, y) dy.
        monotone_quotient (bool):       Whether y -> f(x, y) / y is nonincreasing.
    """

    name = 'custom'

    def __init__(self, f, lipschitz_on, lower_bound_l, growth_mu, antiderivative_F, monotone_quotient, params=None):
        if lower_bound_l < 0:
            raise ParameterError('Lower bound l must be nonnegative, got {}'.format(lower_bound_l))
        self.f = f
        self.lipschitz_on = lipschitz_on
        self.lower_bound_l = float(lower_bound_l)
        self.growth_mu = float(growth_mu)
        self.antiderivative_F = antiderivative_F
        self.monotone_quotient = bool(monotone_quotient)
        self.params = dict(params or {})

    def __call__(self, x, y):
        return np.broadcast_to(self.f(x, y), np.broadcast(x, y).shape)

    def lipschitz(self, lo, hi):
        if hi < lo:
            raise ParameterError('Lipschitz interval is empty: [{}, {}]'.format(lo, hi))
        return float(self.lipschitz_on(lo, hi))

    def quotient_is_monotone(self, a=-1.0, b=1.0):
        """Sampled test of y -> f(x, y) / y being nonincreasing for y > 0"""
        x, y = np.meshgrid(np.linspace(a, b, X_SAMPLE_COUNT), Y_SAMPLES[1:], indexing='ij')
        quotient = self(x, y) / y
        slack = 1e-12 * np.max(np.abs(quotient), axis=1, keepdims=True)
        return bool(np.all(np.diff(quotient, axis=1) <= slack))

    def verify(self, a=-1.0, b=1.0, lipschitz_interval=(0.0, 10.0)):
        """Checks the declared constants on a sample of (x, y) and returns `self`.

        Raises:
            ParameterError: A declared bound or the monotone-quotient flag is contradicted by the samples.
        """
        x, y = np.meshgrid(np.linspace(a, b, X_SAMPLE_COUNT), Y_SAMPLES, indexing='ij')
        values = self(x, y)
        l, mu = self.lower_bound_l, self.growth_mu

        if np.any(values < -l - 1e-12):
            raise ParameterError('{}: f >= -l fails (min f = {:.6g}, l = {})'.format(self.name, values.min(), l))
        if np.any(values > mu * y + l + 1e-12 * (1 + np.abs(mu * y))):
            raise ParameterError('{}: f <= mu y + l fails for mu = {}, l = {}'.format(self.name, mu, l))

        lo, hi = lipschitz_interval
        ys = np.linspace(lo, hi, 401)
        xs = np.linspace(a, b, X_SAMPLE_COUNT)[:, None]
        slopes = np.abs(np.diff(self(xs, ys), axis=1)) / np.diff(ys)
        lipschitz = self.lipschitz(lo, hi)
        if np.any(slopes > lipschitz * (1 + 1e-9) + 1e-12):
            raise ParameterError('{}: Lipschitz bound {} on [{}, {}] fails (sampled {:.6g})'.format(
                self.name, lipschitz, lo, hi, slopes.max()))

        sampled = self.quotient_is_monotone(a, b)
        if sampled != self.monotone_quotient:
            raise ParameterError('{}: monotone_quotient declared {} but sampling gives {}'.format(
                self.name, self.monotone_quotient, sampled))

        logger.debug('Verified nonlinearity %s with params %s', self.name, self.params)
        return self

    def __repr__(self):
        return "{}(params={}, l={}, mu={}, monotone_quotient={})".format(type(self).__name__, self.params,
                                                                         self.lower_bound_l, self.growth_mu,
                                                                         self.monotone_quotient)
