import numpy as np
import pytest

from fraclab.discretization import Field
from fraclab.enums import ConeRegime, Regime
from fraclab.exceptions import ParameterError
from fraclab.models import ConeEnvelope, Envelopes, StationaryProblem, validate_params


@pytest.mark.parametrize('q, s, regime', [(0.5, 0.25, Regime.STANDARD), (50.0, 0.3, Regime.STANDARD),
                                          (3.0, 0.9, Regime.STANDARD), (10.0, 0.9, Regime.VERY_SINGULAR),
                                          (3.0, 0.5, Regime.STANDARD)])
def test_regime(q, s, regime):
    """Test the regime split q(2s - 1) < 2s + 1"""
    assert validate_params(q, s) == regime


@pytest.mark.parametrize('q, s', [(0.0, 0.25), (-1.0, 0.25), (0.5, 0.0), (0.5, 1.0)])
def test_invalid_params(q, s):
    """Test rejection of q <= 0 and s outside (0, 1)"""
    with pytest.raises(ParameterError):
        validate_params(q, s)


def test_problem_validation(grid):
    """Test rejection of nonpositive lambda, negative epsilon and non-field data"""
    g = Field.ones(grid)
    with pytest.raises(ParameterError):
        StationaryProblem(0.0, 0.5, 0.25, g)
    with pytest.raises(ParameterError):
        StationaryProblem(1.0, 0.5, 0.25, g, epsilon=-1e-3)
    with pytest.raises(ParameterError):
        StationaryProblem(1.0, 0.5, 0.25, np.ones(grid.n))


def test_problem_copies(grid):
    """Test derived problems keep the other parameters"""
    p = StationaryProblem(2.0, 0.5, 0.25, Field.ones(grid))
    regularized = p.with_epsilon(0.1)
    assert regularized.epsilon == 0.1 and p.epsilon == 0.0
    assert regularized.lam == 2.0 and regularized.g is p.g
    assert p.with_rhs(Field.zeros(grid)).g.max() == 0.0
    assert p.regime == Regime.STANDARD


def test_problem_residual(operator):
    """Test the residual of a hand-built field"""
    u = Field.ones(operator.grid)
    g = u + (Field(operator.grid, operator.dot(u.values)) - 1.0)
    p = StationaryProblem(1.0, 0.5, 0.25, g)
    assert p.residual(operator, u) <= 1e-12


@pytest.mark.parametrize('q, regime, exponent, log_factor, correction',
                         [(0.5, ConeRegime.Q_BELOW_1, 0.25, False, 0.125),
                          (1.0, ConeRegime.Q_EQUAL_1, 0.25, True, 0.25),
                          (3.0, ConeRegime.Q_ABOVE_1, 0.125, False, 0.25)])
def test_cone_regimes(grid, q, regime, exponent, log_factor, correction):
    """Test the boundary profile class selected by q"""
    env = ConeEnvelope.for_grid(q, 0.25, grid)
    assert env.regime == regime
    assert env.exponent == exponent
    assert env.log_factor == log_factor
    assert np.isclose(env.correction, correction)
    assert env.r == 4.0
    expected = grid.delta**exponent
    if log_factor:
        expected = expected * np.sqrt(np.log(4.0 / grid.delta**0.25))
    assert np.allclose(env.profile(grid), expected, rtol=1e-14)


def test_cone_constants(grid):
    """Test the cone bounds scale with k1 and k2"""
    env = ConeEnvelope.for_grid(0.5, 0.25, grid, k1=0.5, k2=2.0)
    assert np.allclose(env.upper(grid).values, 4 * env.lower(grid).values)
    with pytest.raises(ParameterError):
        ConeEnvelope(0.5, 0.25, 4.0, k1=2.0, k2=1.0)


def test_cone_log_scale_too_small(grid):
    """Test rejection of a log scale that makes the profile vanish"""
    with pytest.raises(ParameterError):
        ConeEnvelope(1.0, 0.25, 0.5).profile(grid)


def test_envelopes(grid):
    """Test violation of a field against an envelope pair"""
    env = Envelopes(Field.ones(grid), Field.constant(grid, 3.0), m=1.0)
    assert env.violation(Field.constant(grid, 2.0)) == 0.0
    assert np.isclose(env.violation(Field.constant(grid, 3.5)), 0.5)
    assert np.isclose(env.violation(Field.constant(grid, 0.25)), 0.75)
    assert env.contains(Field.constant(grid, 3.0))
    assert env.constants == {'m': 1.0}
