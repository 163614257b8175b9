"""Refinement studies over families of runs."""
import logging
import warnings
from collections import namedtuple

import numpy as np
import pandas as pd
import pyprind

from ..discretization.fraclap import assemble, gagliardo_seminorm
from ..discretization.grid import Field, build_grid
from ..enums import Regime
from ..evolution import evolve_G, max_increment_l2, energy_identity_residual, second_energy_slack
from ..exceptions import ParameterError, HypothesisWarning
from ..models.problem import ConeEnvelope, StationaryProblem, validate_params
from ..stationary import solve_regularized
from .fits import log_log_slope

logger = logging.getLogger(__name__)

GapStudy = namedtuple('GapStudy', 'frame slope r_squared degenerate passed')
EnergyStudy = namedtuple('EnergyStudy', 'frame min_ratio min_slack passed')
SeminormStudy = namedtuple('SeminormStudy', 'frame threshold beta regime u_growing u_beta_plateau')

MIN_FAMILY = 4
DEGENERATE_GAP = 1e-13


def dt_family(u0, src, T, base_steps, q, op, eig=None, levels=MIN_FAMILY, progress=False):
    """Runs the source-driven scheme with base_steps * 2^j steps, j = 0..levels-1"""
    traces = []
    bar = pyprind.ProgBar(levels, bar_char='█', stream=2) if progress else None
    for j in range(levels):
        traces.append(evolve_G(u0, src, T, base_steps * 2**j, q, op, eig))
        if bar is not None:
            bar.update()
    return traces


def _check_family(traces):
    if len(traces) < MIN_FAMILY:
        raise ParameterError('A dt family needs at least {} runs, got {}'.format(MIN_FAMILY, len(traces)))
    for coarse, fine in zip(traces, traces[1:]):
        if not np.isclose(coarse.dt, 2 * fine.dt, rtol=1e-12) or not np.isclose(coarse.T, fine.T, rtol=1e-12):
            raise ParameterError('Runs must share T and halve dt from one to the next')
        if coarse.grid != fine.grid:
            raise ParameterError('Runs must share the spatial grid')


def gap_scaling_study(traces, tol=0.1):
    """Fits max_k ||u^k - u^{k-1}||_{L^2} ~ C dt^slope over a dt-halving family.

    Passes iff slope >= 0.5 - tol. When every gap vanishes the family is
    reported as degenerate and no slope is fitted.

    Returns:
        GapStudy:   Per-run frame (n_steps, dt, max_gap), slope, r^2, degenerate flag, passed.
    """
    _check_family(traces)
    dt = np.array([trace.dt for trace in traces])
    gaps = np.array([max_increment_l2(trace) for trace in traces])
    frame = pd.DataFrame({'n_steps': [trace.n_steps for trace in traces], 'dt': dt, 'max_gap': gaps})

    scale = max(1.0, max(np.max(np.abs(trace.snapshots)) for trace in traces))
    if np.all(gaps <= DEGENERATE_GAP * scale):
        logger.info('All increments vanish: constant-in-time family, no slope fitted')
        return GapStudy(frame, np.nan, np.nan, True, True)

    slope, r_squared = log_log_slope(dt, gaps)
    logger.info('Increment gap slope %.4f (r^2 %.4f)', slope, r_squared)
    return GapStudy(frame, slope, r_squared, False, bool(slope >= 0.5 - tol))


def energy_refinement_study(traces, src=None, min_ratio=1.5, slack_tol=1e-8):
    """Tracks the energy identity residual at the final time across a dt-halving family.

    Passes iff the absolute residual shrinks by at least `min_ratio` per halving
    and the second energy estimate holds with slack >= -slack_tol in every run.
    """
    _check_family(traces)
    residuals = np.array([abs(energy_identity_residual(trace, src)[-1]) for trace in traces])
    slacks = np.array([second_energy_slack(trace).min() for trace in traces])
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.concatenate(([np.nan], residuals[:-1] / residuals[1:]))
    frame = pd.DataFrame({
        'n_steps': [trace.n_steps for trace in traces],
        'dt': [trace.dt for trace in traces],
        'residual': residuals,
        'ratio': ratios,
        'min_second_slack': slacks
    })
    worst_ratio = float(np.nanmin(ratios))
    worst_slack = float(slacks.min())
    return EnergyStudy(frame, worst_ratio, worst_slack, bool(worst_ratio >= min_ratio and worst_slack >= -slack_tol))


def beta_threshold(q, s):
    """Smallest admissible power: max(1, (1 - 1/(2s)) (q + 1) / 2)"""
    return max(1.0, (1 - 1 / (2 * s)) * (q + 1) / 2)


def tail_exponent(exponent, s):
    """Rate p of the seminorm energy a field ~ delta^exponent keeps within h of the boundary.

    The double-sum estimator misses energy of order h^p there; p <= 0 means the
    energy is infinite and the field is not in the energy space.
    """
    return 2 * exponent - 2 * s + 1


def completed_seminorms(seminorms, h, p):
    """Completes squared seminorms S^2(h) = L - C h^p with the limit L from consecutive grids.

    Returns NaN on the first grid. With p <= 0 there is no finite limit and the
    values are returned unchanged.
    """
    seminorms = np.asarray(seminorms, dtype=float)
    if p <= 0:
        return seminorms.copy()
    squares = seminorms**2
    hp = np.asarray(h, dtype=float)**p
    completed = np.full(len(squares), np.nan)
    completed[1:] = np.sqrt(squares[1:] + (squares[1:] - squares[:-1]) * hp[1:] / (hp[:-1] - hp[1:]))
    return completed


def seminorm_refinement_study(q,
                              s,
                              beta,
                              ns=(128, 256, 512, 1024),
                              domain=(-1.0, 1.0),
                              epsilon=1e-6,
                              lam=1.0,
                              allow_standard=False,
                              growth_margin=1.05,
                              plateau_margin=1.02,
                              tolerances=None,
                              progress=False):
    """Seminorms of u and u^beta under grid refinement in the very singular regime.

    Solves u + lam (A u - (u + epsilon)^(-q)) = 0 at a fixed small epsilon on
    every grid of the family and measures both fields with the double-sum
    estimator. This is refinement-trend evidence, not a membership proof.

    u behaves like delta^a next to the boundary, a = 2s / (q + 1), and u^beta
    like delta^(beta a). The estimator misses the energy within h of the
    boundary, of order h^p with p = `tail_exponent`. For beta just above the
    threshold p is small and the raw seminorms of u^beta still rise by several
    percent per level at n = 1024, so the ratios are taken between completed
    seminorms (see `completed_seminorms`). The raw ratios stay in the frame.

    Args:
        q (float):                          Singularity exponent.
        s (float):                          Fractional order.
        beta (float):                       Power, above `beta_threshold(q, s)`.
        ns (tuple, optional):               Interior node counts.
        allow_standard (bool, optional):    Accept standard-regime parameters as a control run.

    Returns:
        SeminormStudy:                      Frame (n, h, raw and completed seminorms of u and u^beta, their
                                            ratios) and the growth / plateau classification.
    """
    regime = validate_params(q, s)
    if regime != Regime.VERY_SINGULAR and not allow_standard:
        raise ParameterError('q={}, s={} is not in the very singular regime'.format(q, s))
    threshold = beta_threshold(q, s)
    if not beta > threshold:
        raise ParameterError('beta={} must exceed the threshold {}'.format(beta, threshold))
    if len(ns) < 3:
        raise ParameterError('Refinement family needs at least 3 grids')

    rows = []
    bar = pyprind.ProgBar(len(ns), bar_char='█', stream=2) if progress else None
    for n in ns:
        grid = build_grid(domain[0], domain[1], n)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', HypothesisWarning)
            op = assemble(grid, s)
        problem = StationaryProblem(lam, q, s, Field.zeros(grid), epsilon)
        u = solve_regularized(problem, op, tolerances=tolerances)
        rows.append({
            'n': n,
            'h': grid.h,
            'seminorm_u': gagliardo_seminorm(op, u),
            'seminorm_u_beta': gagliardo_seminorm(op, u**beta)
        })
        if bar is not None:
            bar.update()

    frame = pd.DataFrame(rows)
    exponent = ConeEnvelope(q, s, 2 * (domain[1] - domain[0])).exponent
    for column, power in (('u', 1.0), ('u_beta', beta)):
        p = tail_exponent(power * exponent, s)
        seminorms = frame['seminorm_' + column]
        frame['completed_' + column] = completed_seminorms(seminorms, frame['h'], p)
        frame['ratio_' + column] = frame['completed_' + column] / frame['completed_' + column].shift(1)
        frame['raw_ratio_' + column] = seminorms / seminorms.shift(1)
        logger.info('Seminorm tail exponent of %s: %.4f', column, p)

    u_growing = bool((frame['ratio_u'].iloc[1:] > growth_margin).all())
    u_beta_plateau = bool(frame['ratio_u_beta'].iloc[-1] < plateau_margin)
    logger.info('Seminorm study q=%g s=%g beta=%g: u growing %s, u^beta plateau %s', q, s, beta, u_growing,
                u_beta_plateau)
    return SeminormStudy(frame, threshold, beta, regime, u_growing, u_beta_plateau)
