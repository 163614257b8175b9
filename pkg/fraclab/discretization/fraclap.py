"""Discrete exterior-Dirichlet fractional Laplacian on a uniform 1-D grid.

The operator at node x_i is the collocated singular integral

    c_s * P.V. int (u(x_i) - u(y)) / |x_i - y|^(1 + 2s) dy,   c_s = 2 * C(s),

with u = 0 outside the interval. The integral is split into

    near field  |y - x_i| < h   second difference of the local quadratic interpolant, integrated exactly,
    far field   |y - x_i| > h   piecewise linear interpolant of u (zero at the end points) against the kernel,
    tail                        u(x_i) times the kernel mass beyond h, closed form.

On a uniform grid the three pieces only depend on |i - j|, so they form a
symmetric Toeplitz matrix. Fields behave like delta^s next to an end point,
which the linear interpolant resolves with an O(1) relative error on the
boundary cells; a diagonal boundary correction removes it (see
`boundary_correction`). Off-diagonal entries are negative, row sums are
positive, hence the matrix is a nonsingular M-matrix.
"""
import functools
import logging
import warnings

import numpy as np
import pandas as pd
from scipy import linalg, signal
from scipy.special import gamma, hyp2f1

from ..exceptions import ParameterError, SolverError, ConvergenceError, HypothesisWarning
from .grid import Field, values_of

logger = logging.getLogger(__name__)


def normalization_constant(s):
    """Returns C(s) = pi^(-1/2) 2^(2s-1) s Gamma((1+2s)/2) / Gamma(1-s).

    Twice this value is the constant of the singular integral representation.
    """
    return 2.0**(2 * s - 1) * s * gamma(0.5 + s) / (np.sqrt(np.pi) * gamma(1 - s))


def torsion_constant(s):
    """Returns gamma(s) such that gamma * (1 - x^2)^s solves (-Delta)^s u = 1 on (-1, 1)"""
    return np.sqrt(np.pi) / (4.0**s * gamma(1 + s) * gamma(0.5 + s))


def torsion_profile(grid, s):
    """Returns the exact solution of (-Delta)^s u = 1 on the grid interval, sampled at the nodes"""
    radius = 0.5 * grid.length
    offset = grid.nodes - grid.center
    return Field(grid, torsion_constant(s) * (radius**2 - offset**2)**s)


def _expm1_ratio(p, z):
    """(exp(p z) - 1) / p, continuous at p = 0"""
    if abs(p) < 1e-12:
        return z
    return np.expm1(p * z) / p


def _far_field_weights(k, s):
    """Kernel mass of the hat function centred k >= 2 cells away, in units of h^(-2s)"""
    x = 1.0 / k
    p = 1 - 2 * s
    if abs(p) < 1e-12:
        return -np.log1p(x) - np.log1p(-x)
    bracket = np.expm1(p * np.log1p(x)) + np.expm1(p * np.log1p(-x))
    return k**p * bracket / (-2 * s * p)


def toeplitz_column(n, s):
    """Returns the first column of the operator matrix in units of c_s * h^(-2s).

    Args:
        n (int):    Interior node count.
        s (float):  Fractional order in (0, 1).

    Returns:
        np.ndarray: Column T_0..T_{n-1}.
    """
    near = 1.0 / (2 - 2 * s)
    column = np.empty(n)
    column[0] = 2 * near + 1.0 / s
    # Half hat on [h, 2h]; the other half lies inside the near field
    column[1] = -(near - _expm1_ratio(1 - 2 * s, np.log(2.0)) / (2 * s) + 1.0 / (2 * s))
    if n > 2:
        column[2:] = -_far_field_weights(np.arange(2, n, dtype=float), s)
    return column


HALF_LINE_NODES = 100_000


@functools.lru_cache(maxsize=64)
def boundary_correction(count, s):
    """Returns the diagonal correction of the `count` rows next to an end point, in units of c_s * h^(-2s).

    y_+^s is annihilated by the continuous operator on y > 0. The Toeplitz
    scheme applied to it on the unit half-line grid y_j = j leaves a residual
    r_i, summed by FFT over HALF_LINE_NODES nodes plus the kernel tail beyond
    them in closed form. Adding -r_i / i^s to row i makes the scheme exact on
    that profile. The entries are negative and decay like i^(-1-3s).

    Args:
        count (int):    Number of rows, counted from the end point.
        s (float):      Fractional order in (0, 1).

    Returns:
        np.ndarray:     Read-only corrections for rows 1..count.
    """
    m = max(HALF_LINE_NODES, 8 * count)
    column = toeplitz_column(m, s)
    kernel = np.concatenate((column[:0:-1], column))
    profile = np.arange(1, m + 1, dtype=float)**s
    residual = signal.fftconvolve(profile, kernel)[m - 1:m - 1 + count]

    rows = np.arange(1, count + 1, dtype=float)
    edge = m + 0.5
    # int_edge^inf y^s (y - i)^(-1-2s) dy, the far field beyond the last node
    residual -= edge**(-s) / s * hyp2f1(1 + 2 * s, s, 1 + s, rows / edge)

    correction = -residual / rows**s
    correction.flags.writeable = False
    return correction


class FracOperator:
    """Assembled fractional Laplacian of order `s` on `grid`.

    Immutable once built; Cholesky factors of `matrix + shift * I` are cached per shift.
    """
    def __init__(self, grid, s, matrix):
        matrix = np.array(matrix, dtype=float)
        matrix.flags.writeable = False
        self.grid = grid
        self.s = float(s)
        self.matrix = matrix
        self.c_norm = normalization_constant(self.s)
        self._factors = {}

    @property
    def n(self):
        return self.grid.n

    @property
    def h(self):
        return self.grid.h

    @property
    def diagonal(self):
        return np.diag(self.matrix)

    def factor(self, shift=0.0):
        """Returns the (cached) Cholesky factorization of `matrix + shift * I`"""
        shift = float(shift)
        if shift not in self._factors:
            try:
                self._factors[shift] = linalg.cho_factor(self.matrix + shift * np.eye(self.n), check_finite=False)
            except linalg.LinAlgError as err:
                raise SolverError('Operator with shift {} is not positive definite: {}'.format(shift, err))
        return self._factors[shift]

    def dot(self, values):
        """Matrix-vector product on raw nodal arrays"""
        return self.matrix @ values

    def quadratic_form(self, u, v=None):
        """Returns h * u^T A v (the discrete bilinear form), with v = u by default"""
        u = values_of(u, self.grid)
        v = u if v is None else values_of(v, self.grid)
        return float(self.h * (u @ (self.matrix @ v)))

    def to_frame(self):
        return pd.DataFrame(self.matrix)

    def export_csv(self, path):
        """Writes the matrix row-major at full round-trip precision"""
        self.to_frame().to_csv(path, header=False, index=False, float_format='%.17g')

    def __repr__(self):
        return "FracOperator(s={}, grid={})".format(self.s, self.grid)


class EigenPair:
    """Principal eigenpair: lambda1 and the positive, L^2-normalized phi1."""
    def __init__(self, lambda1, phi1, iterations=None):
        self.lambda1 = float(lambda1)
        self.phi1 = phi1
        self.iterations = iterations

    @property
    def grid(self):
        return self.phi1.grid

    def residual(self, op):
        """Returns ||A phi1 - lambda1 phi1||_inf / lambda1"""
        phi = self.phi1.values
        return float(np.max(np.abs(op.dot(phi) - self.lambda1 * phi)) / self.lambda1)

    def to_frame(self):
        frame = self.phi1.to_frame('phi1')
        frame['lambda1'] = self.lambda1
        return frame

    def export_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format='%.17g')

    def __repr__(self):
        return "EigenPair(lambda1={}, n={})".format(self.lambda1, self.grid.n)


def assemble(grid, s, corrected=True):
    """Assembles the discrete fractional Laplacian of order `s` on `grid`.

    Args:
        grid (Grid):                Uniform grid.
        s (float):                  Fractional order, 0 < s < 1.
        corrected (bool, optional): Apply the diagonal boundary correction from both
                                    end points. Defaults to True.

    Returns:
        FracOperator:   The assembled operator.
    """
    if not 0 < s < 1:
        raise ParameterError('Fractional order must lie in (0, 1), got {}'.format(s))
    if s >= 0.5:
        warnings.warn('s = {} lies outside the theoretical hypothesis 2s < 1 in one dimension'.format(s),
                      HypothesisWarning,
                      stacklevel=2)

    scale = 2 * normalization_constant(s) * grid.h**(-2 * s)
    matrix = scale * linalg.toeplitz(toeplitz_column(grid.n, s))
    if corrected:
        correction = boundary_correction(grid.n, s)
        matrix[np.diag_indices_from(matrix)] += scale * (correction + correction[::-1])
    logger.debug('Assembled operator n=%d s=%g diagonal=%g', grid.n, s, matrix[0, 0])
    return FracOperator(grid, s, matrix)


def apply(op, u):
    """Returns the field A u"""
    return Field(op.grid, op.dot(values_of(u, op.grid)))


def solve_linear(op, rhs, shift=0.0):
    """Solves (shift * I + A) u = rhs with a cached dense Cholesky factorization.

    Args:
        op (FracOperator):          Assembled operator.
        rhs (Field):                Right hand side.
        shift (float, optional):    Nonnegative diagonal shift. Defaults to 0.0.

    Returns:
        Field:                      The solution.
    """
    if shift < 0:
        raise ParameterError('Shift must be nonnegative, got {}'.format(shift))
    b = values_of(rhs, op.grid)
    u = linalg.cho_solve(op.factor(shift), b, check_finite=False)

    residual = np.max(np.abs(op.dot(u) + shift * u - b), initial=0.0)
    reference = max(np.max(np.abs(b), initial=0.0), np.finfo(float).tiny)
    if residual > 1e-10 * reference:
        logger.warning('Linear solve residual %.3e exceeds 1e-10 relative', residual / reference)
    return Field(op.grid, u)


def eigen_principal(op, max_iter=10_000, rtol=1e-12, residual_tol=1e-9):
    """Computes the principal eigenpair by inverse power iteration.

    Iterates until successive Rayleigh quotients agree to `rtol` and the
    eigen-residual of the normalized vector is below `residual_tol * lambda1`.

    Args:
        op (FracOperator):              Assembled operator.
        max_iter (int, optional):       Iteration cap. Defaults to 10_000.
        rtol (float, optional):         Rayleigh quotient tolerance. Defaults to 1e-12.
        residual_tol (float, optional): Relative residual tolerance. Defaults to 1e-9.

    Returns:
        EigenPair:                      lambda1 and phi1, with h * sum(phi1^2) = 1 and phi1 > 0.
    """
    factor = op.factor(0.0)
    v = np.full(op.n, 1.0 / np.sqrt(op.n))
    rayleigh = v @ op.dot(v)
    scale = 1.0 / np.sqrt(op.h)  # unit Euclidean norm -> unit discrete L^2 norm

    for iteration in range(1, max_iter + 1):
        w = linalg.cho_solve(factor, v, check_finite=False)
        v = w / np.linalg.norm(w)
        Av = op.dot(v)
        previous, rayleigh = rayleigh, v @ Av
        residual = scale * np.max(np.abs(Av - rayleigh * v))
        if abs(rayleigh - previous) < rtol * rayleigh and residual <= residual_tol * rayleigh:
            break
    else:
        raise ConvergenceError('Inverse power iteration did not converge in {} iterations'.format(max_iter),
                               last_residual=residual / rayleigh,
                               iterations=max_iter)

    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    phi = scale * v
    if np.any(phi <= 0):
        raise SolverError('Principal eigenvector is not positive (min {:.3e})'.format(phi.min()))

    logger.info('Principal eigenvalue %.12g after %d iterations', rayleigh, iteration)
    return EigenPair(rayleigh, Field(op.grid, phi), iterations=iteration)


def x0_norm(op, u):
    """Returns the discrete energy norm sqrt(h * u^T A u)"""
    return float(np.sqrt(max(op.quadratic_form(u), 0.0)))


def gagliardo_seminorm(op, u, diagonal_correction=True):
    """Double-sum estimate of the energy norm, independent of the operator matrix.

    Discretizes C(s) * int int |u(x) - u(y)|^2 / |x - y|^(1+2s) over the plane
    with u = 0 outside the interval: the node-pair sum over the interval,
    the exterior strips in closed form and, optionally, the diagonal cells
    from the local slope.

    Args:
        op (FracOperator):                      Supplies grid, s and C(s).
        u (Field):                              Field to measure.
        diagonal_correction (bool, optional):   Add the i == j cell contribution. Defaults to True.

    Returns:
        float:                                  The seminorm.
    """
    grid, s = op.grid, op.s
    u = values_of(u, grid)
    x, h = grid.nodes, grid.h

    distance = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(distance, np.inf)
    inner = h**2 * np.sum((u[:, None] - u[None, :])**2 * distance**(-1 - 2 * s))

    exterior_mass = ((x - grid.a)**(-2 * s) + (grid.b - x)**(-2 * s)) / (2 * s)
    exterior = 2 * h * np.sum(u**2 * exterior_mass)

    total = inner + exterior
    if diagonal_correction:
        slope = np.gradient(np.concatenate(([0.0], u, [0.0])), h)[1:-1]
        total += np.sum(slope**2) * 2 * h**(3 - 2 * s) / ((2 - 2 * s) * (3 - 2 * s))

    return float(np.sqrt(op.c_norm * total))
