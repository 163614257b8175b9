import warnings

import numpy as np
import pytest
from scipy import integrate

from fraclab.discretization import (Field, apply, assemble, build_grid, eigen_principal, gagliardo_seminorm,
                                    normalization_constant, solve_linear, torsion_constant, torsion_profile, x0_norm)
from fraclab.discretization.fraclap import boundary_correction, toeplitz_column
from fraclab.exceptions import HypothesisWarning, ParameterError


def test_matrix_is_symmetric(operator):
    """Test symmetry of the assembled matrix"""
    assert np.allclose(operator.matrix, operator.matrix.T, rtol=0, atol=0)


def test_m_matrix_signs(operator):
    """Test positive diagonal, negative off-diagonal and positive row sums"""
    matrix = operator.matrix
    off_diagonal = matrix[~np.eye(operator.n, dtype=bool)]
    assert np.all(np.diag(matrix) > 0)
    assert np.all(off_diagonal < 0)
    assert np.all(matrix.sum(axis=1) > 0)


def test_toeplitz_column_continuous_at_half():
    """Test the column is continuous across s = 1/2"""
    assert np.allclose(toeplitz_column(8, 0.5), toeplitz_column(8, 0.5 + 1e-9), rtol=1e-6)
    assert np.allclose(toeplitz_column(8, 0.5), toeplitz_column(8, 0.5 - 1e-9), rtol=1e-6)


@pytest.mark.parametrize('s', [0.0, 1.0, -0.2, 1.5])
def test_invalid_order(grid, s):
    """Test rejection of fractional orders outside (0, 1)"""
    with pytest.raises(ParameterError):
        assemble(grid, s)


def test_hypothesis_warning(grid):
    """Test that orders s >= 1/2 assemble with a warning"""
    with pytest.warns(HypothesisWarning):
        op = assemble(grid, 0.75)
    assert op.s == 0.75


@pytest.mark.parametrize('s', [0.25, 0.4])
def test_torsion_constant_against_quadrature(s):
    """Test the closed-form torsion profile against the singular integral at the centre"""
    gamma = torsion_constant(s)

    def integrand(y):
        return gamma * -np.expm1(s * np.log1p(-y * y)) / y**(1 + 2 * s)

    near, _ = integrate.quad(integrand, 0.0, 1.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    value = 2 * normalization_constant(s) * 2 * (near + gamma / (2 * s))
    assert np.isclose(value, 1.0, rtol=1e-6)


@pytest.mark.parametrize('s', [0.25, 0.4])
def test_torsion_convergence(s):
    """Test that the torsion error decreases under refinement"""
    errors = []
    for n in (32, 64, 128):
        op = assemble(build_grid(-1.0, 1.0, n), s)
        u = solve_linear(op, Field.ones(op.grid))
        errors.append((u - torsion_profile(op.grid, s)).linf_norm())
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.parametrize('s', [0.25, 0.4, 0.75])
def test_torsion_error_below_threshold(s):
    """Test the torsion error is below 1e-2 at n = 512 and strictly decreasing up to n = 1024"""
    errors = []
    for n in (128, 256, 512, 1024):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', HypothesisWarning)
            op = assemble(build_grid(-1.0, 1.0, n), s)
        u = solve_linear(op, Field.ones(op.grid))
        errors.append((u - torsion_profile(op.grid, s)).linf_norm())
    assert errors[2] < 1e-2
    assert all(coarse > fine for coarse, fine in zip(errors, errors[1:]))


def test_boundary_correction_lowers_torsion_error():
    """Test the uncorrected scheme loses accuracy next to the end points at s = 1/4"""
    grid = build_grid(-1.0, 1.0, 512)
    exact = torsion_profile(grid, 0.25)
    plain = solve_linear(assemble(grid, 0.25, corrected=False), Field.ones(grid))
    corrected = solve_linear(assemble(grid, 0.25), Field.ones(grid))
    assert (plain - exact).linf_norm() > 1e-2
    assert (corrected - exact).linf_norm() < 1e-3


@pytest.mark.parametrize('s', [0.1, 0.25, 0.5, 0.9])
def test_boundary_correction_shape(s):
    """Test the diagonal corrections are negative, decay away from the end point and are cached"""
    correction = boundary_correction(64, s)
    assert np.all(correction < 0)
    assert np.all(np.diff(correction) > 0)
    assert correction[-1] > 1e-2 * correction[0]
    assert boundary_correction(64, s) is correction


@pytest.mark.parametrize('s', [0.1, 0.5, 0.9])
@pytest.mark.parametrize('n', [3, 8, 64])
def test_corrected_operator_is_m_matrix(n, s):
    """Test the corrected matrix keeps the M-matrix signs on small grids from both ends"""
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', HypothesisWarning)
        matrix = assemble(build_grid(-1.0, 1.0, n), s).matrix
    assert np.array_equal(matrix, matrix.T)
    assert np.all(matrix[~np.eye(n, dtype=bool)] < 0)
    assert np.all(matrix.sum(axis=1) > 0)


def test_solve_linear_shift(operator):
    """Test the shifted linear solve"""
    rhs = Field.from_function(operator.grid, lambda x: 1 + x)
    u = solve_linear(operator, rhs, shift=2.0)
    assert np.allclose(apply(operator, u).values + 2.0 * u.values, rhs.values, rtol=0, atol=1e-10)
    with pytest.raises(ParameterError):
        solve_linear(operator, rhs, shift=-1.0)


def test_factor_is_cached(operator):
    """Test that factorizations are computed once per shift"""
    assert operator.factor(0.0) is operator.factor(0.0)
    assert operator.factor(1.0) is not operator.factor(0.0)


def test_eigenpair(operator, eigenpair):
    """Test positivity, normalization and residual of the principal eigenpair"""
    assert eigenpair.phi1.min() > 0
    assert np.isclose(eigenpair.phi1.l2_norm(), 1.0, rtol=1e-10)
    assert eigenpair.residual(operator) <= 1e-8
    assert eigenpair.lambda1 > 0


def test_eigenvalue_is_smallest(operator, eigenpair):
    """Test the eigenvalue against a dense symmetric eigensolver"""
    assert np.isclose(eigenpair.lambda1, np.linalg.eigvalsh(operator.matrix)[0], rtol=1e-10)


def test_eigenpair_symmetric(eigenpair):
    """Test that phi1 is even on a symmetric interval"""
    phi = eigenpair.phi1.values
    assert np.allclose(phi, phi[::-1], rtol=1e-8)


def test_energy_norm_of_eigenvector(operator, eigenpair):
    """Test ||phi1||^2 = lambda1 in the discrete energy norm"""
    assert np.isclose(x0_norm(operator, eigenpair.phi1)**2, eigenpair.lambda1, rtol=1e-10)
    assert np.isclose(operator.quadratic_form(eigenpair.phi1), eigenpair.lambda1, rtol=1e-10)


def test_gagliardo_seminorm(operator, eigenpair):
    """Test homogeneity of the double-sum seminorm and its agreement in size with the energy norm"""
    phi = eigenpair.phi1
    value = gagliardo_seminorm(operator, phi)
    assert np.isclose(gagliardo_seminorm(operator, 2 * phi), 2 * value, rtol=1e-12)
    assert gagliardo_seminorm(operator, Field.zeros(operator.grid)) == 0.0
    assert gagliardo_seminorm(operator, phi, diagonal_correction=False) < value
    assert 0.5 < value / x0_norm(operator, phi) < 2.0


@pytest.mark.parametrize('s', [0.25, 0.4])
def test_quadratic_form_matches_double_sum(s):
    """Test the matrix energy of a smooth compactly supported field against the double-sum seminorm"""
    op = assemble(build_grid(-1.0, 1.0, 512), s)
    u = Field.from_function(op.grid, lambda x: np.maximum(0.0, 1 - (2 * x)**2)**4)
    assert np.isclose(gagliardo_seminorm(op, u), x0_norm(op, u), rtol=0.05)


def test_export_csv(tmp_path, operator, eigenpair):
    """Test CSV export of the matrix and the eigenpair"""
    operator.export_csv(tmp_path / 'matrix.csv')
    eigenpair.export_csv(tmp_path / 'eigen.csv')
    matrix = np.loadtxt(tmp_path / 'matrix.csv', delimiter=',')
    assert np.array_equal(matrix, operator.matrix)
    assert (tmp_path / 'eigen.csv').read_text().startswith('x,delta,phi1,lambda1')


def test_eigenvalue_decreases_under_dilation():
    """Test lambda1 on (-2, 2) is below lambda1 on (-1, 1) at the same spacing"""
    small = eigen_principal(assemble(build_grid(-1.0, 1.0, 31), 0.25))
    large = eigen_principal(assemble(build_grid(-2.0, 2.0, 63), 0.25))
    assert large.lambda1 < small.lambda1
