"""Implicit Euler semi-discretization of the singular parabolic problems.

Each step solves the stationary resolvent problem with lambda = dt:

    u^k + dt (A u^k - (u^k)^(-q)) = dt * forcing_k + u^{k-1}

where forcing_k is the time average of the source over (t_{k-1}, t_k) for
source-driven runs and the lagged nonlinearity f(x, u^{k-1}) for semilinear
runs.
"""
import functools
import json
import logging
import os

import numpy as np
import pandas as pd
import pyprind
from numpy.polynomial.legendre import leggauss

from .discretization.grid import Field, values_of
from .enums import Regime, RunKind
from .exceptions import ParameterError, SolverError, EvolutionAborted, InvariantViolation
from .models.problem import StationaryProblem, ConeEnvelope, validate_params
from .stationary import SingularSolver, fit_envelopes

logger = logging.getLogger(__name__)

GAUSS_POINTS = 4
ENVELOPE_TOL = 1e-10


@functools.lru_cache(maxsize=1)
def _log_sign_convention():
    logger.warning('Semilinear steps use the sign convention of the source-driven scheme: '
                   'u^k + dt (A u^k - (u^k)^(-q)) = dt f(x, u^{k-1}) + u^{k-1}')


def discretize_source(src, grid, T, n_steps, t0=0.0):
    """Returns the step averages h_k(x) = (1/dt) int_{t_{k-1}}^{t_k} h(t, x) dt.

    Averages use a 4-point Gauss-Legendre rule per step, exact for polynomials of degree 7 in t.

    Args:
        src (SourceSpec):       Source term.
        grid (Grid):            Spatial grid.
        T (float):              Time horizon, T > 0.
        n_steps (int):          Number of steps, n_steps >= 1.
        t0 (float, optional):   Start time. Defaults to 0.0.

    Returns:
        list:                   Fields h_1..h_n.
    """
    return [Field(grid, row) for row in _source_averages(src, grid, T, n_steps, t0)]


def _source_averages(src, grid, T, n_steps, t0=0.0):
    _check_time_grid(T, n_steps)
    dt = T / n_steps
    points, weights = leggauss(GAUSS_POINTS)
    starts = t0 + dt * np.arange(n_steps)
    averages = np.zeros((n_steps, grid.n))
    for point, weight in zip(points, weights):
        t = starts + 0.5 * dt * (1 + point)
        averages += 0.5 * weight * src(t[:, None], grid.nodes[None, :])
    return averages


def _check_time_grid(T, n_steps):
    if not T > 0:
        raise ParameterError('Time horizon must be positive, got {}'.format(T))
    if int(n_steps) != n_steps or n_steps < 1:
        raise ParameterError('Step count must be a positive integer, got {}'.format(n_steps))


class EvolutionTrace:
    """Result of an implicit Euler run.

    `snapshots` holds u^0..u^k row-wise, `forcing` the per-step forcing used
    by the scheme (row k-1 for step k). A trace of an aborted run holds the
    completed steps only.
    """
    def __init__(self, kind, op, q, T, n_steps, t0, snapshots, forcing, envelopes, nonlinearity=None, metadata=None):
        self.kind = kind
        self.op = op
        self.q = float(q)
        self.T = float(T)
        self.n_steps = int(n_steps)
        self.t0 = float(t0)
        self.snapshots = np.asarray(snapshots, dtype=float)
        self.forcing = np.asarray(forcing, dtype=float).reshape(-1, op.grid.n)
        self.envelopes = envelopes
        self.nonlinearity = nonlinearity
        self.metadata = dict(metadata or {})
        self._ledger = None

    @property
    def grid(self):
        return self.op.grid

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def completed_steps(self):
        return len(self.snapshots) - 1

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.completed_steps + 1)

    @property
    def u0(self):
        return self.snapshot(0)

    @property
    def final(self):
        return self.snapshot(self.completed_steps)

    def snapshot(self, k):
        return Field(self.grid, self.snapshots[k])

    @property
    def ledger(self):
        """Per-step energy ledger as a `pd.DataFrame` (see `energy_ledger`)"""
        if self._ledger is None:
            self._ledger = energy_ledger(self)
        return self._ledger

    def envelope_violation(self):
        """Largest distance by which a snapshot leaves the envelopes"""
        lower, upper = self.envelopes.lower.values, self.envelopes.upper.values
        return float(max(0.0, np.max(lower - self.snapshots), np.max(self.snapshots - upper)))

    def to_frames(self):
        """Returns (snapshots, ledger); snapshots in long format with columns t, x, u"""
        times = np.repeat(self.times, self.grid.n)
        nodes = np.tile(self.grid.nodes, self.completed_steps + 1)
        snapshots = pd.DataFrame({'t': times, 'x': nodes, 'u': self.snapshots.ravel()})
        return snapshots, self.ledger

    def manifest(self):
        return {
            'kind': self.kind.value,
            'q': self.q,
            's': self.op.s,
            'T': self.T,
            'n_steps': self.n_steps,
            'completed_steps': self.completed_steps,
            't0': self.t0,
            'dt': self.dt,
            'grid': {
                'a': self.grid.a,
                'b': self.grid.b,
                'n': self.grid.n
            },
            'envelopes': self.envelopes.constants,
            'metadata': self.metadata
        }

    def export(self, directory, prefix='trace'):
        """Writes the snapshot CSV, the ledger CSV and a JSON manifest into `directory`"""
        os.makedirs(directory, exist_ok=True)
        snapshots, ledger = self.to_frames()
        snapshots.to_csv(os.path.join(directory, prefix + '_snapshots.csv'), index=False, float_format='%.17g')
        ledger.to_csv(os.path.join(directory, prefix + '_ledger.csv'), index=False, float_format='%.17g')
        with open(os.path.join(directory, prefix + '_manifest.json'), 'w') as fp:
            json.dump(self.manifest(), fp, indent=2, sort_keys=True, default=float)

    def __repr__(self):
        return "EvolutionTrace(kind={}, T={}, n_steps={}, completed={}, dt={})".format(
            self.kind.value, self.T, self.n_steps, self.completed_steps, self.dt)


def potential(values, q, h):
    """Singular potential h * sum u^(1-q) / (1-q), or h * sum ln u when q = 1"""
    if q == 1:
        return h * np.sum(np.log(values), axis=-1)
    return h * np.sum(values**(1 - q), axis=-1) / (1 - q)


def energy_ledger(trace, forcing=None):
    """Builds the energy ledger of `trace`.

    Columns: step, time, kinetic (sum of h ||u^k - u^{k-1}||^2 / dt), energy
    (h u^T A u / 2), potential, source_work (sum of h forcing_k . (u^k - u^{k-1})),
    F_term (h sum F(x, u^k), semilinear runs only) and residual, the left side
    minus the right side of the discrete energy identity. The implicit scheme
    dissipates, so the residual is <= 0 up to solver tolerance.
    """
    U = trace.snapshots
    forcing = trace.forcing if forcing is None else np.asarray(forcing)[:trace.completed_steps]
    h, dt = trace.grid.h, trace.dt
    increments = np.diff(U, axis=0)

    kinetic = np.concatenate(([0.0], np.cumsum(h * np.sum(increments**2, axis=1) / dt)))
    energy = 0.5 * h * np.sum(U * (U @ trace.op.matrix), axis=1)
    pot = potential(U, trace.q, h)
    work = np.concatenate(([0.0], np.cumsum(h * np.sum(forcing * increments, axis=1))))
    if trace.nonlinearity is not None:
        F_term = h * np.sum(trace.nonlinearity.antiderivative_F(trace.grid.nodes[None, :], U), axis=1)
    else:
        F_term = np.full(len(U), np.nan)
    residual = kinetic + (energy - pot) - work - (energy[0] - pot[0])

    return pd.DataFrame({
        'step': np.arange(len(U)),
        'time': trace.times,
        'kinetic': kinetic,
        'energy': energy,
        'potential': pot,
        'source_work': work,
        'F_term': F_term,
        'residual': residual
    })


class ImplicitEuler:
    """Implicit Euler runner.

    Set either `source` (source-driven problem) or `nonlinearity` (semilinear
    problem with lagged f), then call `run`.
    """
    def __init__(self, op, q, eig=None, tolerances=None, progress=False):
        if validate_params(q, op.s) != Regime.STANDARD:
            raise ParameterError('q={}, s={} is in the very singular regime'.format(q, op.s))
        self.op = op
        self.q = float(q)
        self.solver = SingularSolver(op, eig, tolerances)
        self.progress = progress
        self._source = None
        self._nonlinearity = None
        self._w = None

    @property
    def eig(self):
        return self.solver.eig

    @property
    def grid(self):
        return self.op.grid

    @property
    def source(self):
        return self._source

    @source.setter
    def source(self, src):
        self._source = src
        self._nonlinearity = None

    @property
    def nonlinearity(self):
        return self._nonlinearity

    @nonlinearity.setter
    def nonlinearity(self, nl):
        if nl.growth_mu >= self.eig.lambda1:
            raise ParameterError('Growth bound mu={} must be below the principal eigenvalue {}'.format(
                nl.growth_mu, self.eig.lambda1))
        self._nonlinearity = nl
        self._source = None

    @property
    def kind(self):
        if self._source is not None:
            return RunKind.SOURCE
        if self._nonlinearity is not None:
            return RunKind.SEMILINEAR
        raise ParameterError('Neither a source nor a nonlinearity is set')

    @property
    def pure_singular(self):
        """Solution w of A w = w^(-q), computed once"""
        if self._w is None:
            self._w = self.solver.pure_singular(self.q)
        return self._w

    def build_envelopes(self):
        """Sub/supersolution pair for the current forcing.

        Source runs use A u - u^(-q) <= -|h|_inf below and >= |h|_inf above;
        semilinear runs use -l below and mu u + l above.
        """
        if self.kind == RunKind.SOURCE:
            return self.solver.envelopes(self.q, self.pure_singular, self._source.bound)
        nl = self._nonlinearity
        return self.solver.envelopes(self.q, self.pure_singular, nl.lower_bound_l, nl.growth_mu)

    def run(self, u0, T, n_steps, t0=0.0, envelopes=None):
        """Runs the scheme from `u0` and returns an `EvolutionTrace`.

        Args:
            u0 (Field):                     Positive initial datum.
            T (float):                      Time horizon.
            n_steps (int):                  Number of steps.
            t0 (float, optional):           Start time. Defaults to 0.0.
            envelopes (Envelopes, optional): Envelopes to enforce; built and fitted to `u0` when omitted.

        Returns:
            EvolutionTrace:                 The full trace.
        """
        _check_time_grid(T, n_steps)
        kind = self.kind
        u_prev = np.array(values_of(u0, self.grid))
        dt = T / n_steps

        metadata = {}
        if envelopes is None:
            envelopes, factors = fit_envelopes(u0, self.build_envelopes())
            metadata.update(factors)
        elif not envelopes.contains(u0, ENVELOPE_TOL):
            raise ParameterError('Initial datum leaves the given envelopes by {:.3e}'.format(envelopes.violation(u0)))
        from .analysis.checks import cone_check

        cone = cone_check(u0, ConeEnvelope.for_grid(self.q, self.op.s, self.grid), self.grid)
        metadata.update(cone_k1=cone.k1_hat, cone_k2=cone.k2_hat)

        if kind == RunKind.SOURCE:
            forcing = _source_averages(self._source, self.grid, T, n_steps, t0)
        else:
            _log_sign_convention()
            K0 = self._nonlinearity.lipschitz(0.0, envelopes.upper.max())
            if dt * K0 >= 1:
                raise ParameterError('Lagged scheme needs dt * K0 < 1, got dt={} K0={}'.format(dt, K0))
            metadata['K0'] = K0
            forcing = np.zeros((n_steps, self.grid.n))

        snapshots = np.zeros((n_steps + 1, self.grid.n))
        snapshots[0] = u_prev

        def partial(k):
            return EvolutionTrace(kind, self.op, self.q, T, n_steps, t0, snapshots[:k], forcing[:k - 1], envelopes,
                                  self._nonlinearity, metadata)

        bar = pyprind.ProgBar(n_steps, bar_char='█', stream=2) if self.progress else None
        for k in range(1, n_steps + 1):
            if kind == RunKind.SEMILINEAR:
                forcing[k - 1] = self._nonlinearity(self.grid.nodes, u_prev)
            try:
                u = self._step(u_prev, forcing[k - 1], dt)
            except SolverError as err:
                message = 'Step {} failed: {}'.format(k, err)
                raise EvolutionAborted(message, step=k, trace=partial(k), cause=err) from err

            snapshots[k] = u
            violation = envelopes.violation(Field(self.grid, u))
            if violation > ENVELOPE_TOL:
                err = InvariantViolation('Step {} leaves the envelopes by {:.3e}'.format(k, violation), violation)
                err.trace = partial(k + 1)
                raise err
            u_prev = u
            if bar is not None:
                bar.update()

        return EvolutionTrace(kind, self.op, self.q, T, n_steps, t0, snapshots, forcing, envelopes, self._nonlinearity,
                              metadata)

    def _step(self, u_prev, forcing, dt):
        problem = StationaryProblem(dt, self.q, self.op.s, Field(self.grid, dt * forcing + u_prev))
        return self.solver.limit(problem, initial=Field(self.grid, u_prev)).values


def step_implicit(u_prev, h_k, dt, q, op, eig=None, tolerances=None):
    """One implicit Euler step: the limit problem with lambda = dt and g = dt h_k + u_prev.

    Args:
        u_prev (Field):     Previous state.
        h_k (Field):        Step forcing.
        dt (float):         Step size.
        q (float):          Singularity exponent.
        op (FracOperator):  Operator.
        eig (EigenPair):    Principal eigenpair.

    Returns:
        Field:              The next state.
    """
    if not dt > 0:
        raise ParameterError('Step size must be positive, got {}'.format(dt))
    problem = StationaryProblem(dt, q, op.s, h_k * dt + u_prev)
    return SingularSolver(op, eig, tolerances).limit(problem, initial=u_prev)


def evolve_G(u0, src, T, n_steps, q, op, eig=None, t0=0.0, envelopes=None, tolerances=None, progress=False):
    """Runs the source-driven problem u_t + (-Delta)^s u - u^(-q) = h from `u0`"""
    runner = ImplicitEuler(op, q, eig, tolerances, progress)
    runner.source = src
    return runner.run(u0, T, n_steps, t0=t0, envelopes=envelopes)


def evolve_P(u0, nl, T, n_steps, q, op, eig=None, t0=0.0, envelopes=None, tolerances=None, progress=False):
    """Runs the semilinear problem u_t + (-Delta)^s u - u^(-q) = f(x, u) with f lagged by one step"""
    runner = ImplicitEuler(op, q, eig, tolerances, progress)
    runner.nonlinearity = nl
    return runner.run(u0, T, n_steps, t0=t0, envelopes=envelopes)


def interpolants(trace, t):
    """Returns the piecewise constant and piecewise linear interpolants of `trace` at time `t`"""
    t_end = trace.t0 + trace.dt * trace.completed_steps
    if not trace.t0 <= t <= t_end:
        raise ParameterError('Time {} outside [{}, {}]'.format(t, trace.t0, t_end))

    position = (t - trace.t0) / trace.dt
    k = int(np.clip(np.ceil(position - 1e-12), 1, trace.completed_steps)) if trace.completed_steps else 0
    if k == 0:
        return trace.u0, trace.u0

    previous, current = trace.snapshots[k - 1], trace.snapshots[k]
    weight = np.clip(position - (k - 1), 0.0, 1.0)
    linear = previous + weight * (current - previous)
    constant = current if position > 0 else previous
    return Field(trace.grid, constant), Field(trace.grid, linear)


def increment_norms(trace):
    """Returns ||u^k - u^{k-1}||_{L^2} for every step"""
    increments = np.diff(trace.snapshots, axis=0)
    return np.sqrt(trace.grid.h * np.sum(increments**2, axis=1))


def max_increment_l2(trace):
    """Largest L^2 increment; also the sup over t of the gap between the two interpolants"""
    norms = increment_norms(trace)
    return float(norms.max()) if len(norms) else 0.0


def energy_identity_residual(trace, src=None):
    """Per-step residual of the discrete energy identity.

    With `src` the forcing is re-discretized from the source instead of read from the trace.
    """
    forcing = None
    if src is not None:
        forcing = _source_averages(src, trace.grid, trace.T, trace.n_steps, trace.t0)
    return energy_ledger(trace, forcing)['residual'].values


def second_energy_slack(trace, bound=None):
    """Slack of the second energy estimate at every step.

    Right side |Omega| (t_k - t0) bound^2 / 2 minus the left side
    kinetic / 2 + energy_k - energy_0 - (potential_k - potential_0);
    `bound` defaults to the largest forcing value of the run.
    """
    ledger = trace.ledger
    if bound is None:
        bound = float(np.max(np.abs(trace.forcing))) if trace.forcing.size else 0.0
    left = 0.5 * ledger['kinetic'] + (ledger['energy'] - ledger['energy'].iloc[0]) - (ledger['potential'] -
                                                                                       ledger['potential'].iloc[0])
    right = trace.grid.length * (ledger['time'] - trace.t0) * bound**2 / 2
    return (right - left).values


class StabilizationReport:
    """Outcome of `stabilization_run`.

    `distances` has one row per step with the sup-distances of the three
    traces to the stationary solution and the spread between the envelope
    traces.
    """
    def __init__(self, u_hat, traces, distances, bracketing_violation, lower_monotonicity_violation,
                 upper_monotonicity_violation, threshold, window):
        self.u_hat = u_hat
        self.traces = traces
        self.distances = distances
        self.bracketing_violation = bracketing_violation
        self.lower_monotonicity_violation = lower_monotonicity_violation
        self.upper_monotonicity_violation = upper_monotonicity_violation
        self.threshold = threshold
        self.window = window

        below = (distances['distance'] < threshold).values
        self.stabilization_step = None
        run = 0
        for k, flag in enumerate(below):
            run = run + 1 if flag else 0
            if run >= window:
                self.stabilization_step = k - window + 1
                break

    @property
    def stabilized(self):
        return self.stabilization_step is not None

    @property
    def stabilization_time(self):
        if self.stabilization_step is None:
            return None
        return float(self.distances['time'].iloc[self.stabilization_step])

    @property
    def monotone_envelopes(self):
        return max(self.lower_monotonicity_violation, self.upper_monotonicity_violation) <= 1e-10

    @property
    def passed(self):
        return self.stabilized and self.monotone_envelopes

    def __repr__(self):
        return "StabilizationReport(stabilized={}, time={}, final_distance={:.3e}, spread={:.3e})".format(
            self.stabilized, self.stabilization_time, self.distances['distance'].iloc[-1],
            self.distances['spread'].iloc[-1])


def stabilization_run(u0, nl, T, n_steps, q, op, eig=None, threshold=1e-4, window=10, tolerances=None,
                      progress=False):
    """Runs the semilinear scheme from `u0` and from both envelopes and measures convergence to û.

    û comes from the monotone scheme. The envelope traces bracket the main one at
    every step (hard failure beyond 1e-8), the lower one is nondecreasing and the
    upper one nonincreasing in time.

    Returns:
        StabilizationReport:    Distances, bracketing and monotonicity diagnostics.
    """
    if not nl.monotone_quotient:
        raise ParameterError('Stabilization needs a nonlinearity with nonincreasing f(x, y) / y')
    runner = ImplicitEuler(op, q, eig, tolerances, progress)
    runner.nonlinearity = nl
    u_hat = runner.solver.semilinear(nl, q)
    envelopes, _ = fit_envelopes(u0, runner.solver.envelope_pair)

    traces = {
        'main': runner.run(u0, T, n_steps, envelopes=envelopes),
        'lower': runner.run(envelopes.lower, T, n_steps, envelopes=envelopes),
        'upper': runner.run(envelopes.upper, T, n_steps, envelopes=envelopes)
    }
    U, V1, V2 = (traces[key].snapshots for key in ('main', 'lower', 'upper'))

    bracketing = float(max(0.0, np.max(V1 - U), np.max(U - V2)))
    if bracketing > 1e-8:
        raise InvariantViolation('Envelope traces fail to bracket the solution by {:.3e}'.format(bracketing),
                                 violation=bracketing)

    target = u_hat.values
    distances = pd.DataFrame({
        'step': np.arange(n_steps + 1),
        'time': traces['main'].times,
        'distance': np.max(np.abs(U - target), axis=1),
        'lower_distance': np.max(np.abs(V1 - target), axis=1),
        'upper_distance': np.max(np.abs(V2 - target), axis=1),
        'spread': np.max(V2 - V1, axis=1)
    })
    lower_violation = float(max(0.0, np.max(V1[:-1] - V1[1:])))
    upper_violation = float(max(0.0, np.max(V2[1:] - V2[:-1])))
    report = StabilizationReport(u_hat, traces, distances, bracketing, lower_violation, upper_violation, threshold,
                                 window)
    logger.info('%s', report)
    return report
