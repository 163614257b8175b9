from collections import namedtuple

import numpy as np
from scipy import optimize, stats

from ..discretization.grid import values_of
from ..exceptions import ParameterError

ExponentFit = namedtuple('ExponentFit', 'alpha_hat intercept r_squared window nodes with_log correction',
                         defaults=(None, ))

MIN_WINDOW_NODES = 8
EXCLUDED_END_NODES = 2
EXPONENT_RANGE = (0.0, 2.0)
EXPONENT_GRID = 401


def boundary_exponent_fit(u, grid=None, rho=None, with_log=False, s=None, r=None, correction=None):
    """Fits u ~ C * delta^alpha near the boundary.

    The window holds the nodes with delta < rho, minus the 2 nodes nearest each
    end point. With `with_log` the factor ln^(1/2)(r / delta^s) is divided out
    before fitting, which needs `s`.

    Without `correction` alpha is the least-squares slope in log-log scale.
    With `correction = gamma` the model is u ~ delta^alpha (k + k' delta^gamma),
    fitted in relative least squares, which accounts for the leading
    departure from the pure power law.

    Args:
        u (Field):                      Positive field.
        grid (Grid, optional):          Grid of `u`. Defaults to `u.grid`.
        rho (float, optional):          Window width. Defaults to 0.1 * (b - a).
        with_log (bool, optional):      Divide out the logarithmic factor first. Defaults to False.
        s (float, optional):            Order used in the logarithmic factor.
        r (float, optional):            Log scale. Defaults to 2 * (b - a).
        correction (float, optional):   Relative exponent gamma > 0 of the correction term.

    Returns:
        ExponentFit:                    Exponent, log of C (or k), r^2, (delta_min, delta_max), node count.
    """
    grid = u.grid if grid is None else grid
    values = values_of(u, grid)
    rho = 0.1 * grid.length if rho is None else rho
    if correction is not None and not correction > 0:
        raise ParameterError('Correction exponent must be positive, got {}'.format(correction))

    mask = grid.delta < rho
    mask[:EXCLUDED_END_NODES] = False
    mask[-EXCLUDED_END_NODES:] = False
    if mask.sum() < MIN_WINDOW_NODES:
        raise ParameterError('Fit window delta < {} holds {} nodes, need at least {}'.format(
            rho, mask.sum(), MIN_WINDOW_NODES))

    delta, y = grid.delta[mask], values[mask]
    if np.any(y <= 0):
        raise ParameterError('Exponent fit needs a positive field on the window')
    if with_log:
        if s is None:
            raise ParameterError('with_log needs the order s')
        r = 2 * grid.length if r is None else r
        log_term = np.log(r / delta**s)
        if np.any(log_term <= 0):
            raise ParameterError('Log scale r = {} is too small for the window'.format(r))
        y = y / np.sqrt(log_term)

    window = (float(delta.min()), float(delta.max()))
    if correction is None:
        fit = stats.linregress(np.log(delta), np.log(y))
        alpha, intercept, r_squared = float(fit.slope), float(fit.intercept), float(fit.rvalue**2)
    else:
        alpha, intercept, r_squared = _corrected_fit(delta, y, correction)
    return ExponentFit(alpha, intercept, float(np.clip(r_squared, 0.0, 1.0)), window, int(mask.sum()),
                       bool(with_log), correction)


def _corrected_fit(delta, y, gamma):
    """Variable projection: (k, k') by linear least squares for each alpha, alpha by bounded search"""
    exponents = np.array([0.0, gamma])

    def solve(alpha):
        basis = delta[:, None]**(alpha + exponents) / y[:, None]
        coef = np.linalg.lstsq(basis, np.ones_like(y), rcond=None)[0]
        return coef, float(np.sum((basis @ coef - 1)**2))

    alphas = np.linspace(*EXPONENT_RANGE, EXPONENT_GRID)
    step = alphas[1] - alphas[0]
    start = alphas[np.argmin([solve(alpha)[1] for alpha in alphas])]
    bounds = (max(EXPONENT_RANGE[0], start - step), min(EXPONENT_RANGE[1], start + step))
    best = optimize.minimize_scalar(lambda alpha: solve(alpha)[1],
                                    bounds=bounds,
                                    method='bounded',
                                    options={'xatol': 1e-10})
    alpha = float(best.x)
    coef = solve(alpha)[0]

    model = delta**alpha * (coef[0] + coef[1] * delta**gamma)
    if coef[0] <= 0 or np.any(model <= 0):
        return alpha, np.nan, 0.0
    log_y = np.log(y)
    total = float(np.sum((log_y - log_y.mean())**2))
    r_squared = 1.0 - float(np.sum((log_y - np.log(model))**2)) / total if total > 0 else 1.0
    return alpha, float(np.log(coef[0])), r_squared


def log_log_slope(x, y):
    """Least-squares slope and r^2 of ln y against ln x"""
    fit = stats.linregress(np.log(x), np.log(y))
    return float(fit.slope), float(np.clip(fit.rvalue**2, 0.0, 1.0))
