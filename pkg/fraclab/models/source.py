import numpy as np

from ..discretization.grid import Field
from ..exceptions import ParameterError


class SourceSpec:
    """Bounded source term h(t, x) of the parabolic problem.

    Args:
        h (callable):   Vectorized h(t, x).
        bound (float):  Upper bound of |h| over the time horizon.
    """

    name = 'custom'

    def __init__(self, h, bound, params=None):
        if not bound >= 0:
            raise ParameterError('Source bound must be nonnegative, got {}'.format(bound))
        self.h = h
        self.bound = float(bound)
        self.params = dict(params or {})

    def __call__(self, t, x):
        return np.broadcast_to(self.h(t, x), np.broadcast(t, x).shape)

    def at(self, grid, t):
        """Returns the field x -> h(t, x)"""
        return Field(grid, self(t, grid.nodes))

    def shifted(self, t0):
        """Returns the source t -> h(t - t0, .), for runs started at time t0"""
        source = SourceSpec(lambda t, x: self.h(t - t0, x), self.bound, self.params)
        source.name = self.name
        return source

    def verify(self, grid, T, samples=65):
        """Checks |h| <= bound on a sample of [0, T] x nodes and returns `self`"""
        t = np.linspace(0.0, T, samples)[:, None]
        values = self(t, grid.nodes[None, :])
        if np.max(np.abs(values)) > self.bound * (1 + 1e-12) + 1e-300:
            raise ParameterError('{}: sampled |h| = {:.6g} exceeds declared bound {}'.format(
                self.name, np.max(np.abs(values)), self.bound))
        return self

    def __repr__(self):
        return "{}(params={}, bound={})".format(type(self).__name__, self.params, self.bound)
