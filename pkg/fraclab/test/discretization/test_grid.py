import numpy as np
import pytest

from fraclab.discretization import Field, build_grid
from fraclab.exceptions import ParameterError


def test_nodes_and_spacing():
    """Test interior nodes, spacing and boundary distance of a 3 node grid"""
    grid = build_grid(-1.0, 1.0, 3)
    assert grid.h == 0.5
    assert np.allclose(grid.nodes, [-0.5, 0.0, 0.5])
    assert np.allclose(grid.delta, [0.5, 1.0, 0.5])
    assert grid.length == 2.0
    assert grid.center == 0.0


@pytest.mark.parametrize('a, b, n', [(-1.0, 1.0, 2), (1.0, -1.0, 8), (0.0, 0.0, 8), (0.0, np.inf, 8),
                                     (-1.0, 1.0, 8.5), (-1.0, 1.0, True)])
def test_invalid_grid(a, b, n):
    """Test rejection of degenerate intervals and node counts"""
    with pytest.raises(ParameterError):
        build_grid(a, b, n)


def test_refine_keeps_nodes():
    """Test that every coarse node is a node of the refined grid"""
    coarse = build_grid(0.0, 3.0, 5)
    refined = coarse.refine()
    assert refined.n == 11
    assert np.allclose(refined.h, coarse.h / 2, rtol=1e-14)
    assert np.allclose(refined.nodes[1::2], coarse.nodes, rtol=0, atol=1e-14)


def test_grid_equality():
    """Test grids compare equal by interval and node count"""
    assert build_grid(-1, 1, 8) == build_grid(-1.0, 1.0, 8)
    assert build_grid(-1, 1, 8) != build_grid(-1, 1, 9)
    assert len({build_grid(-1, 1, 8), build_grid(-1.0, 1.0, 8)}) == 1


def test_field_arithmetic(grid):
    """Test field arithmetic with scalars and fields"""
    u = Field.from_function(grid, lambda x: 1 + x**2)
    v = Field.ones(grid)
    assert np.allclose((u + v).values, 2 + grid.nodes**2)
    assert np.allclose((2 * u - v).values, 1 + 2 * grid.nodes**2)
    assert np.allclose((1 / u).values, 1 / (1 + grid.nodes**2))
    assert np.allclose((u**0.5).values, np.sqrt(1 + grid.nodes**2))
    assert np.allclose((-u).values, -(1 + grid.nodes**2))
    assert np.allclose(abs(u - 3).values, 3 - (1 + grid.nodes**2))


def test_field_grid_mismatch(grid, small_grid):
    """Test that fields on different grids do not combine"""
    with pytest.raises(ParameterError):
        Field.ones(grid) + Field.ones(small_grid)


def test_field_validation(grid):
    """Test rejection of wrongly shaped and non-finite values"""
    with pytest.raises(ParameterError):
        Field(grid, np.ones(grid.n + 1))
    values = np.ones(grid.n)
    values[3] = np.nan
    with pytest.raises(ParameterError):
        Field(grid, values)


def test_field_is_read_only(grid):
    """Test that field values cannot be modified in place"""
    u = Field.zeros(grid)
    with pytest.raises(ValueError):
        u.values[0] = 1.0


def test_norms(grid):
    """Test discrete L^2 and L^inf norms"""
    u = Field.ones(grid)
    assert np.isclose(u.l2_norm(), np.sqrt(grid.h * grid.n), rtol=1e-14)
    assert Field.constant(grid, -3.0).linf_norm() == 3.0


def test_random_smooth_is_reproducible(grid):
    """Test that smooth random fields depend only on the generator state"""
    u = Field.random_smooth(grid, np.random.default_rng(7))
    v = Field.random_smooth(grid, np.random.default_rng(7))
    assert np.array_equal(u.values, v.values)


def test_to_frame(grid):
    """Test the tabular export of a field"""
    frame = Field.from_function(grid, np.cos).to_frame('u')
    assert list(frame.columns) == ['x', 'delta', 'u']
    assert len(frame) == grid.n
    assert np.allclose(frame['u'], np.cos(grid.nodes))
