import numbers

import numpy as np
import pandas as pd

from ..exceptions import ParameterError


class Grid:
    """Uniform mesh of the interval (a, b).

    Only the `n` interior nodes x_i = a + i*h, i = 1..n, carry unknowns. The
    end points and the whole exterior of the interval are where fields vanish.
    """

    __slots__ = ('a', 'b', 'n', 'h', 'nodes', 'delta')

    def __init__(self, a, b, n):
        if not isinstance(n, numbers.Integral) or isinstance(n, bool):
            raise ParameterError('Interior node count must be an integer, got {!r}'.format(n))
        if n < 3:
            raise ParameterError('Grid needs at least 3 interior nodes, got {}'.format(n))
        if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
            raise ParameterError('Grid interval needs finite end points with b > a, got ({}, {})'.format(a, b))

        self.a = float(a)
        self.b = float(b)
        self.n = int(n)
        self.h = (self.b - self.a) / (self.n + 1)

        nodes = self.a + self.h * np.arange(1, self.n + 1)
        delta = np.minimum(nodes - self.a, self.b - nodes)
        nodes.flags.writeable = False
        delta.flags.writeable = False
        self.nodes = nodes
        self.delta = delta

    @property
    def length(self):
        return self.b - self.a

    @property
    def center(self):
        return 0.5 * (self.a + self.b)

    def refine(self):
        """Returns the grid with 2n+1 interior nodes on the same interval.
        Every node of `self` is a node of the refined grid.
        """
        return Grid(self.a, self.b, 2 * self.n + 1)

    def interior_mask(self, layer):
        """Returns a boolean mask of the nodes at distance >= `layer` from the boundary"""
        return self.delta >= layer

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.a, self.b, self.n) == (other.a, other.b, other.n)

    def __hash__(self):
        return hash((self.a, self.b, self.n))

    def __repr__(self):
        return "Grid(a={}, b={}, n={}, h={})".format(self.a, self.b, self.n, self.h)


def build_grid(a, b, n):
    """Builds a uniform grid on (a, b) with `n` interior nodes.

    Args:
        a (float):  Left end point.
        b (float):  Right end point, b > a.
        n (int):    Interior node count, n >= 3.

    Returns:
        Grid:       The mesh.
    """
    return Grid(a, b, n)


class Field:
    """Nodal values of a function on the interior nodes of a grid.

    The function is understood to vanish outside the interval. Arithmetic with
    scalars and with fields on the same grid returns new fields.
    """

    __slots__ = ('grid', 'values')
    __array_ufunc__ = None  # numpy defers to the reflected operators below

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n, ):
            raise ParameterError('Field has shape {}, grid expects ({},)'.format(values.shape, grid.n))
        if not np.all(np.isfinite(values)):
            raise ParameterError('Field values must be finite')
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    # Builders

    @staticmethod
    def zeros(grid):
        """Builder method that returns the zero field on `grid`"""
        return Field(grid, np.zeros(grid.n))

    @staticmethod
    def ones(grid):
        """Builder method that returns the constant field 1 on `grid`"""
        return Field(grid, np.ones(grid.n))

    @staticmethod
    def constant(grid, value):
        """Builder method that returns a constant field on `grid`"""
        return Field(grid, np.full(grid.n, float(value)))

    @staticmethod
    def from_function(grid, fn):
        """Builder method that evaluates the vectorized `fn(x)` on the grid nodes"""
        return Field(grid, np.broadcast_to(fn(grid.nodes), (grid.n, )))

    @staticmethod
    def random_smooth(grid, rng, modes=4, amplitude=1.0):
        """Builder method that returns a smooth random field (finite sine series).

        Args:
            grid (Grid):                    Grid to sample on.
            rng (np.random.Generator):      Source of randomness.
            modes (int, optional):          Number of sine modes. Defaults to 4.
            amplitude (float, optional):    Scale of the leading coefficient. Defaults to 1.0.
        """
        k = np.arange(1, modes + 1)
        coefficients = amplitude * rng.standard_normal(modes) / k**2
        phase = np.pi * np.outer((grid.nodes - grid.a) / grid.length, k)
        return Field(grid, np.sin(phase) @ coefficients)

    # Norms

    def linf_norm(self):
        return float(np.max(np.abs(self.values)))

    def l2_norm(self):
        """Discrete L^2 norm sqrt(h * sum u_i^2)"""
        return float(np.sqrt(self.grid.h * np.dot(self.values, self.values)))

    def min(self):
        return float(np.min(self.values))

    def max(self):
        return float(np.max(self.values))

    # Export

    def to_frame(self, name='u'):
        """Returns a `pd.DataFrame` with columns x, delta and `name`"""
        return pd.DataFrame({'x': self.grid.nodes, 'delta': self.grid.delta, name: self.values})

    def export_csv(self, path, name='u'):
        """Writes (x, delta, u) rows at full round-trip precision"""
        self.to_frame(name).to_csv(path, index=False, float_format='%.17g')

    # Arithmetic

    def _combine(self, other, op):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ParameterError('Field grids do not match: {} and {}'.format(self.grid, other.grid))
            other = other.values
        elif not isinstance(other, numbers.Real):
            return NotImplemented
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            return Field(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __radd__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda u, v: np.subtract(v, u))

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    def __rmul__(self, other):
        return self._combine(other, np.multiply)

    def __truediv__(self, other):
        return self._combine(other, np.divide)

    def __rtruediv__(self, other):
        return self._combine(other, lambda u, v: np.divide(v, u))

    def __pow__(self, other):
        return self._combine(other, np.power)

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __abs__(self):
        return Field(self.grid, np.abs(self.values))

    def __len__(self):
        return self.grid.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __repr__(self):
        return "Field(n={}, min={:.6g}, max={:.6g})".format(self.grid.n, self.min(), self.max())


def values_of(field, grid=None):
    """Returns the nodal array of `field`, checking it lives on `grid` when given"""
    if grid is not None and field.grid != grid:
        raise ParameterError('Field grid {} does not match {}'.format(field.grid, grid))
    return field.values
