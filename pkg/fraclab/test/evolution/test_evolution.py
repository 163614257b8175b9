import json

import numpy as np
import pytest

from fraclab.analysis import log_log_slope
from fraclab.discretization import Field
from fraclab.enums import RunKind
from fraclab.evolution import (ImplicitEuler, discretize_source, energy_identity_residual, evolve_G, evolve_P,
                               interpolants, max_increment_l2, second_energy_slack, stabilization_run, step_implicit)
from fraclab.exceptions import EvolutionAborted, ParameterError
from fraclab.models import (Affine, ConstantSource, Saturating, SinusoidalSource, SourceSpec, ZeroNonlinearity,
                            ZeroSource)
from fraclab.stationary import Tolerances, fit_envelopes, solve_Q

Q = 0.5
S = 0.25


@pytest.fixture(scope='module')
def sinusoidal_trace(small_operator, small_eigenpair, small_pure_singular):
    src = SinusoidalSource(c=1.0, a=0.5, omega=3.0)
    return evolve_G(small_pure_singular, src, 1.0, 10, Q, small_operator, small_eigenpair)


# Source averages


def test_constant_source_average(grid):
    """Test step averages of a constant source"""
    averages = discretize_source(ConstantSource(2.0), grid, 1.0, 5)
    assert len(averages) == 5
    assert all(np.allclose(h.values, 2.0, rtol=1e-14) for h in averages)


def test_linear_source_average(grid):
    """Test step averages of a source linear in time equal the midpoint values"""
    src = SourceSpec(lambda t, x: t + 0 * x, 10.0)
    averages = discretize_source(src, grid, 2.0, 4, t0=1.0)
    midpoints = 1.0 + 0.5 * (np.arange(4) + 0.5)
    assert np.allclose([h.values[0] for h in averages], midpoints, rtol=1e-14)


def test_sinusoidal_source_average(grid):
    """Test step averages of sin(t) against the closed form"""
    src = SourceSpec(lambda t, x: np.sin(t) + 0 * x, 1.0)
    T, n_steps = 1.0, 10
    dt = T / n_steps
    t = dt * np.arange(n_steps + 1)
    exact = (np.cos(t[:-1]) - np.cos(t[1:])) / dt
    averages = discretize_source(src, grid, T, n_steps)
    assert np.allclose([h.values[0] for h in averages], exact, rtol=0, atol=1e-10)


@pytest.mark.parametrize('T, n_steps', [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
def test_invalid_time_grid(grid, T, n_steps):
    """Test rejection of empty time horizons and step counts"""
    with pytest.raises(ParameterError):
        discretize_source(ConstantSource(), grid, T, n_steps)


# Single steps


def test_step_keeps_stationary_state(small_operator, small_eigenpair, small_pure_singular):
    """Test that the pure singular solution is a fixed point of the step without forcing"""
    w = small_pure_singular
    u = step_implicit(w, Field.zeros(w.grid), 0.1, Q, small_operator, small_eigenpair)
    assert np.allclose(u.values, w.values, rtol=0, atol=1e-8)


def test_step_preserves_order(small_operator, small_eigenpair, small_pure_singular):
    """Test that ordered states and forcing give ordered steps"""
    w = small_pure_singular
    u = step_implicit(w, Field.zeros(w.grid), 0.1, Q, small_operator, small_eigenpair)
    v = step_implicit(1.5 * w, Field.constant(w.grid, 0.5), 0.1, Q, small_operator, small_eigenpair)
    assert np.all(u.values <= v.values + 1e-10)


def test_step_needs_positive_dt(small_operator, small_eigenpair, small_pure_singular):
    """Test rejection of nonpositive step sizes"""
    w = small_pure_singular
    with pytest.raises(ParameterError):
        step_implicit(w, Field.zeros(w.grid), 0.0, Q, small_operator, small_eigenpair)


# Source-driven runs


def test_stationary_run(small_operator, small_eigenpair, small_pure_singular):
    """Test the run without source stays at the pure singular solution"""
    trace = evolve_G(small_pure_singular, ZeroSource(), 1.0, 5, Q, small_operator, small_eigenpair)
    assert trace.kind == RunKind.SOURCE
    assert trace.completed_steps == 5
    assert np.array_equal(trace.snapshots[0], small_pure_singular.values)
    assert np.allclose(trace.snapshots, small_pure_singular.values, rtol=0, atol=1e-8)
    assert max_increment_l2(trace) <= 1e-8


def test_manufactured_solution_is_first_order(small_operator, small_eigenpair, small_pure_singular,
                                              manufactured_source):
    """Test the final-time error against u(t) = e^t w halves with dt"""
    T = 0.5
    steps = np.array([8, 16, 32, 64])
    exact = np.exp(T) * small_pure_singular.values
    errors = []
    for n_steps in steps:
        trace = evolve_G(small_pure_singular, manufactured_source, T, int(n_steps), Q, small_operator,
                         small_eigenpair)
        errors.append(np.max(np.abs(trace.final.values - exact)))
    slope, r_squared = log_log_slope(T / steps, np.array(errors))
    assert abs(slope - 1.0) <= 0.05
    assert r_squared > 0.999
    assert errors[-1] < 5e-3


def test_trace_attributes(sinusoidal_trace):
    """Test time grid and shape of a trace"""
    assert sinusoidal_trace.dt == 0.1
    assert np.allclose(sinusoidal_trace.times, np.linspace(0.0, 1.0, 11))
    assert sinusoidal_trace.snapshots.shape == (11, sinusoidal_trace.grid.n)
    assert sinusoidal_trace.forcing.shape == (10, sinusoidal_trace.grid.n)
    assert sinusoidal_trace.final.min() > 0


def test_envelope_invariance(sinusoidal_trace):
    """Test every snapshot stays between the envelopes"""
    assert sinusoidal_trace.envelope_violation() <= 1e-10
    assert {'lower_factor', 'upper_factor', 'cone_k1', 'cone_k2'} <= set(sinusoidal_trace.metadata)


def test_energy_identity(sinusoidal_trace):
    """Test the discrete energy identity holds as an inequality"""
    ledger = sinusoidal_trace.ledger
    assert list(ledger.columns) == ['step', 'time', 'kinetic', 'energy', 'potential', 'source_work', 'F_term',
                                    'residual']
    scale = max(1.0, ledger['energy'].abs().max(), ledger['potential'].abs().max())
    assert ledger['residual'].iloc[0] == 0.0
    assert np.all(ledger['residual'] <= 1e-8 * scale)
    assert ledger['F_term'].isna().all()
    src = SinusoidalSource(c=1.0, a=0.5, omega=3.0)
    assert np.allclose(energy_identity_residual(sinusoidal_trace, src), ledger['residual'], rtol=0, atol=1e-12)


def test_second_energy_estimate(sinusoidal_trace):
    """Test the second energy estimate"""
    assert np.all(second_energy_slack(sinusoidal_trace) >= -1e-8)
    assert np.all(second_energy_slack(sinusoidal_trace, bound=1.5) >= -1e-8)


def test_interpolants(sinusoidal_trace):
    """Test piecewise constant and linear interpolants at nodes and midpoints"""
    trace = sinusoidal_trace
    for k in (0, 3, 10):
        constant, linear = interpolants(trace, trace.times[k])
        assert np.allclose(constant.values, trace.snapshots[k], rtol=0, atol=1e-12)
        assert np.allclose(linear.values, trace.snapshots[k], rtol=0, atol=1e-12)

    constant, linear = interpolants(trace, 0.25)
    assert np.allclose(constant.values, trace.snapshots[3], rtol=0, atol=1e-12)
    assert np.allclose(linear.values, 0.5 * (trace.snapshots[2] + trace.snapshots[3]), rtol=0, atol=1e-12)
    assert (constant - linear).l2_norm() <= max_increment_l2(trace)

    with pytest.raises(ParameterError):
        interpolants(trace, 1.5)


def test_export(tmp_path, sinusoidal_trace):
    """Test the CSV and JSON export of a trace"""
    sinusoidal_trace.export(tmp_path, prefix='run')
    snapshots = np.loadtxt(tmp_path / 'run_snapshots.csv', delimiter=',', skiprows=1)
    assert snapshots.shape == (11 * sinusoidal_trace.grid.n, 3)
    assert (tmp_path / 'run_ledger.csv').exists()
    manifest = json.loads((tmp_path / 'run_manifest.json').read_text())
    assert manifest['kind'] == 'G'
    assert manifest['completed_steps'] == 10


def test_aborted_run(small_operator, small_eigenpair, small_pure_singular):
    """Test that a failed step reports the step and the partial trace"""
    src = ConstantSource(50.0)
    runner = ImplicitEuler(small_operator, Q, small_eigenpair)
    runner.source = src
    envelopes, _ = fit_envelopes(small_pure_singular, runner.build_envelopes())

    capped = ImplicitEuler(small_operator, Q, small_eigenpair, tolerances=Tolerances(newton_cap=1))
    capped.source = src
    with pytest.raises(EvolutionAborted) as info:
        capped.run(small_pure_singular, 1.0, 2, envelopes=envelopes)
    assert info.value.step == 1
    assert info.value.trace.completed_steps == 0


def test_envelopes_must_contain_initial_datum(small_operator, small_eigenpair, small_pure_singular):
    """Test rejection of given envelopes that miss the initial datum"""
    runner = ImplicitEuler(small_operator, Q, small_eigenpair)
    runner.source = ConstantSource(1.0)
    envelopes = runner.build_envelopes()
    with pytest.raises(ParameterError):
        runner.run(1e3 * envelopes.upper, 1.0, 2, envelopes=envelopes)


def test_runner_needs_forcing(small_operator, small_eigenpair):
    """Test the runner refuses to run without source or nonlinearity"""
    runner = ImplicitEuler(small_operator, Q, small_eigenpair)
    with pytest.raises(ParameterError):
        runner.kind


# Semilinear runs


def test_semilinear_without_nonlinearity(small_operator, small_eigenpair, small_pure_singular):
    """Test a semilinear run with f = 0 equals a source-driven run with h = 0"""
    u0 = 1.5 * small_pure_singular
    g_trace = evolve_G(u0, ZeroSource(), 1.0, 5, Q, small_operator, small_eigenpair)
    p_trace = evolve_P(u0, ZeroNonlinearity(), 1.0, 5, Q, small_operator, small_eigenpair)
    assert p_trace.kind == RunKind.SEMILINEAR
    assert np.allclose(p_trace.snapshots, g_trace.snapshots, rtol=0, atol=1e-12)
    assert np.allclose(p_trace.ledger['F_term'], 0.0)


def test_semilinear_run(small_operator, small_eigenpair, small_pure_singular, saturating):
    """Test a semilinear run keeps its envelopes and records K0"""
    trace = evolve_P(small_pure_singular, saturating, 2.0, 10, Q, small_operator, small_eigenpair)
    assert trace.metadata['K0'] == 0.5
    assert trace.envelope_violation() <= 1e-10
    assert np.allclose(trace.forcing[0], saturating(trace.grid.nodes, small_pure_singular.values))


def test_semilinear_growth_rejected(small_operator, small_eigenpair, small_pure_singular):
    """Test rejection of growth at or above the principal eigenvalue"""
    with pytest.raises(ParameterError):
        evolve_P(small_pure_singular, Saturating(mu=5.0), 1.0, 10, Q, small_operator, small_eigenpair)


def test_semilinear_step_size(small_operator, small_eigenpair, small_pure_singular):
    """Test rejection of steps with dt * K0 >= 1"""
    with pytest.raises(ParameterError):
        evolve_P(small_pure_singular, Affine(mu=0.5, c=0.1), 10.0, 2, Q, small_operator, small_eigenpair)


def test_stabilization(small_operator, small_eigenpair, saturating):
    """Test runs started at the stationary solution stay there and the envelope runs converge monotonically"""
    u_hat = solve_Q(saturating, Q, S, small_operator, small_eigenpair)
    report = stabilization_run(u_hat, saturating, 2.0, 20, Q, small_operator, small_eigenpair, window=10)
    assert report.stabilized
    assert report.stabilization_step == 0
    assert report.monotone_envelopes
    assert report.passed
    assert report.distances['distance'].max() <= 1e-6
    assert report.distances['spread'].iloc[-1] < report.distances['spread'].iloc[0]
    assert set(report.traces) == {'main', 'lower', 'upper'}


def test_stabilization_needs_monotone_quotient(small_operator, small_eigenpair, small_pure_singular):
    """Test stabilization runs refuse nonlinearities with increasing quotient"""
    with pytest.raises(ParameterError):
        stabilization_run(small_pure_singular, Saturating(mu=0.5, c=-0.1), 1.0, 10, Q, small_operator,
                          small_eigenpair)
