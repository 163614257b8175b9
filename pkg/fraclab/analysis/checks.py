"""Nodal verification instruments for comparison, contraction and Picone-type inequalities.

Checks return a violation (0 when satisfied) or a slack (right side minus left
side, nonnegative when satisfied); they never raise on a failed inequality.
"""
from collections import namedtuple

import numpy as np
import pandas as pd

from ..discretization.grid import values_of
from ..enums import RunKind
from ..exceptions import ParameterError

ConeReport = namedtuple('ConeReport', 'k1_hat k2_hat passed regime')
MarginReport = namedtuple('MarginReport', 'frame min_slack')


def cone_check(u, env, grid=None):
    """Certifies k1_hat * profile <= u <= k2_hat * profile with the tightest nodal constants.

    Args:
        u (Field):              Positive field.
        env (ConeEnvelope):     Supplies the profile for the regime of q.
        grid (Grid, optional):  Grid of `u`. Defaults to `u.grid`.

    Returns:
        ConeReport:             k1_hat = min u / profile, k2_hat = max u / profile, passed, regime.
    """
    grid = u.grid if grid is None else grid
    values = values_of(u, grid)
    if np.any(values <= 0):
        raise ParameterError('Cone check needs a positive field, min is {:.3e}'.format(values.min()))
    ratio = values / env.profile(grid)
    k1_hat, k2_hat = float(ratio.min()), float(ratio.max())
    passed = bool(np.isfinite(k1_hat) and np.isfinite(k2_hat) and k1_hat > 0)
    return ConeReport(k1_hat, k2_hat, passed, env.regime)


def comparison_check(u, v):
    """Returns max(0, max_i(u_i - v_i)), the amount by which u <= v fails"""
    diff = values_of(u, v.grid) - v.values
    return float(max(0.0, np.max(diff)))


def resolvent_contraction_check(u, v, g1, g2):
    """Slack of ||u - v||_inf <= ||g1 - g2||_inf for solutions of the same resolvent problem"""
    grid = u.grid
    left = np.max(np.abs(values_of(u, grid) - values_of(v, grid)))
    right = np.max(np.abs(values_of(g1, grid) - values_of(g2, grid)))
    return float(right - left)


def picone_check(u, v):
    """Minimum over node pairs of (u_i - u_j)^2 - (v_i - v_j)(u_i^2 / v_i - u_j^2 / v_j).

    Args:
        u (Field):  Nonnegative field.
        v (Field):  Positive field on the same grid.

    Returns:
        float:      The minimum over i != j.
    """
    a = values_of(u, v.grid)
    b = v.values
    if np.any(b <= 0):
        raise ParameterError('Picone check needs a positive v, min is {:.3e}'.format(b.min()))
    if np.any(a < 0):
        raise ParameterError('Picone check needs a nonnegative u, min is {:.3e}'.format(a.min()))

    ratio = a**2 / b
    M = (a[:, None] - a[None, :])**2 - (b[:, None] - b[None, :]) * (ratio[:, None] - ratio[None, :])
    np.fill_diagonal(M, np.inf)
    return float(M.min())


def _check_matched(trace_u, trace_v):
    if trace_u.grid != trace_v.grid:
        raise ParameterError('Traces live on different grids')
    if trace_u.completed_steps != trace_v.completed_steps or not np.isclose(trace_u.dt, trace_v.dt, rtol=1e-12):
        raise ParameterError('Traces have different time grids')


def contraction_check(trace_u, trace_v, src_h=None, src_b=None, alpha=None):
    """Per-step slack of the L^inf contraction estimates between two runs.

    Source-driven runs: ||u^k - v^k|| <= ||u^0 - v^0|| + sum_j dt ||h_j - b_j||,
    with the step averages read from the traces unless `src_h`, `src_b` are given.
    Semilinear runs: ||u^k - v^k|| <= exp(alpha (t_k - t_0)) ||u^0 - v^0|| with
    `alpha` a Lipschitz constant of f on the envelopes (defaults to the K0 of the run).

    Returns:
        MarginReport:   Per-step frame (step, time, distance, bound, slack) and the minimum slack.
    """
    _check_matched(trace_u, trace_v)
    if trace_u.kind != trace_v.kind:
        raise ParameterError('Cannot compare a {} run with a {} run'.format(trace_u.kind.value, trace_v.kind.value))

    U, V = trace_u.snapshots, trace_v.snapshots
    distance = np.max(np.abs(U - V), axis=1)
    elapsed = trace_u.dt * np.arange(len(U))

    if trace_u.kind == RunKind.SOURCE:
        from ..evolution import discretize_source

        def averages(trace, src):
            if src is None:
                return trace.forcing
            fields = discretize_source(src, trace.grid, trace.T, trace.n_steps, trace.t0)
            return np.array([f.values for f in fields])[:trace.completed_steps]

        gaps = np.max(np.abs(averages(trace_u, src_h) - averages(trace_v, src_b)), axis=1)
        bound = distance[0] + np.concatenate(([0.0], np.cumsum(trace_u.dt * gaps)))
    else:
        if alpha is None:
            alpha = max(trace_u.metadata.get('K0', 0.0), trace_v.metadata.get('K0', 0.0))
        if alpha < 0:
            raise ParameterError('alpha must be nonnegative, got {}'.format(alpha))
        bound = np.exp(alpha * elapsed) * distance[0]

    frame = pd.DataFrame({
        'step': np.arange(len(U)),
        'time': trace_u.times,
        'distance': distance,
        'bound': bound,
        'slack': bound - distance
    })
    return MarginReport(frame, float(frame['slack'].min()))


def time_derivative_check(trace, src=None, alpha=None):
    """Per-step slack of the discrete L^inf bound on the time derivative.

    With L(u) = A u - u^(-q) and z^k = (u^k - u^{k-1}) / dt:
    source-driven runs satisfy ||z^k|| <= ||h_1 - L(u^0)|| + sum_{j=2..k} ||h_j - h_{j-1}||,
    semilinear runs ||z^k|| <= (1 + alpha dt)^(k-1) ||f(u^0) - L(u^0)||.
    """
    if trace.completed_steps < 1:
        raise ParameterError('Trace has no completed steps')
    U, dt = trace.snapshots, trace.dt
    rates = np.max(np.abs(np.diff(U, axis=0)), axis=1) / dt

    forcing = trace.forcing
    if src is not None and trace.kind == RunKind.SOURCE:
        from ..evolution import discretize_source
        fields = discretize_source(src, trace.grid, trace.T, trace.n_steps, trace.t0)
        forcing = np.array([f.values for f in fields])[:trace.completed_steps]

    u0 = U[0]
    initial = np.max(np.abs(forcing[0] - (trace.op.dot(u0) - u0**(-trace.q))))
    steps = np.arange(1, trace.completed_steps + 1)
    if trace.kind == RunKind.SOURCE:
        jumps = np.max(np.abs(np.diff(forcing, axis=0)), axis=1) if len(forcing) > 1 else np.zeros(0)
        bound = initial + np.concatenate(([0.0], np.cumsum(jumps)))
    else:
        alpha = trace.metadata.get('K0', 0.0) if alpha is None else alpha
        bound = (1 + alpha * dt)**(steps - 1) * initial

    frame = pd.DataFrame({
        'step': steps,
        'time': trace.times[1:],
        'rate': rates,
        'bound': bound,
        'slack': bound - rates
    })
    return MarginReport(frame, float(frame['slack'].min()))
