"""Built-in nonlinearities and sources, selectable by name from a run configuration."""
import numpy as np
import pandas as pd

from ..exceptions import ConfigError, ParameterError
from .nonlinearity import NonlinearitySpec
from .source import SourceSpec

# Nonlinearities


class ZeroNonlinearity(NonlinearitySpec):
    """f = 0"""

    name = 'zero'
    formula = 'f(x,y) = 0'
    PARAMETERS = {}

    def __init__(self):
        super().__init__(f=lambda x, y: np.zeros(np.broadcast(x, y).shape),
                         lipschitz_on=lambda lo, hi: 0.0,
                         lower_bound_l=0.0,
                         growth_mu=0.0,
                         antiderivative_F=lambda x, z: np.zeros(np.broadcast(x, z).shape),
                         monotone_quotient=True)


class Saturating(NonlinearitySpec):
    """Saturating growth f = mu y / (1 + y) + c. The quotient f / y decreases iff c >= 0."""

    name = 'saturating'
    formula = 'f(x,y) = mu*y/(1+y) + c'
    PARAMETERS = {'mu': 0.5, 'c': 0.1}

    def __init__(self, mu=0.5, c=0.1):
        if mu < 0:
            raise ParameterError('saturating: mu must be nonnegative, got {}'.format(mu))
        super().__init__(f=lambda x, y: mu * y / (1 + y) + c,
                         lipschitz_on=lambda lo, hi: mu / (1 + lo)**2,
                         lower_bound_l=abs(c),
                         growth_mu=mu,
                         antiderivative_F=lambda x, z: mu * (z - np.log1p(z)) + c * z,
                         monotone_quotient=c >= 0,
                         params={
                             'mu': mu,
                             'c': c
                         })


class ModulatedSaturating(NonlinearitySpec):
    """Space-dependent saturating growth f = mu (1 + a sin(k pi x)) y / (1 + y) + c, |a| < 1."""

    name = 'modulated_saturating'
    formula = 'f(x,y) = mu*(1 + a*sin(k*pi*x))*y/(1+y) + c'
    PARAMETERS = {'mu': 0.5, 'c': 0.1, 'a': 0.5, 'k': 1.0}

    def __init__(self, mu=0.5, c=0.1, a=0.5, k=1.0):
        if mu < 0 or not abs(a) < 1:
            raise ParameterError('modulated_saturating: needs mu >= 0 and |a| < 1, got mu={}, a={}'.format(mu, a))

        def weight(x):
            return mu * (1 + a * np.sin(k * np.pi * x))

        super().__init__(f=lambda x, y: weight(x) * y / (1 + y) + c,
                         lipschitz_on=lambda lo, hi: mu * (1 + abs(a)) / (1 + lo)**2,
                         lower_bound_l=abs(c),
                         growth_mu=mu * (1 + abs(a)),
                         antiderivative_F=lambda x, z: weight(x) * (z - np.log1p(z)) + c * z,
                         monotone_quotient=c >= 0,
                         params={
                             'mu': mu,
                             'c': c,
                             'a': a,
                             'k': k
                         })


class Affine(NonlinearitySpec):
    """Linear growth f = mu y + c with c >= 0."""

    name = 'affine'
    formula = 'f(x,y) = mu*y + c'
    PARAMETERS = {'mu': 0.5, 'c': 0.1}

    def __init__(self, mu=0.5, c=0.1):
        if c < 0 or mu < 0:
            raise ParameterError('affine: needs mu >= 0 and c >= 0, got mu={}, c={}'.format(mu, c))
        super().__init__(f=lambda x, y: mu * y + c,
                         lipschitz_on=lambda lo, hi: mu,
                         lower_bound_l=c,
                         growth_mu=mu,
                         antiderivative_F=lambda x, z: 0.5 * mu * z**2 + c * z,
                         monotone_quotient=True,
                         params={
                             'mu': mu,
                             'c': c
                         })


class QuadraticSaturating(NonlinearitySpec):
    """f = mu y^2 / (1 + y^2). Its quotient increases on (0, 1), so uniqueness results do not apply."""

    name = 'quadratic_saturating'
    formula = 'f(x,y) = mu*y^2/(1+y^2)'
    PARAMETERS = {'mu': 1.0}

    def __init__(self, mu=1.0):
        if not mu > 0:
            raise ParameterError('quadratic_saturating: mu must be positive, got {}'.format(mu))
        super().__init__(f=lambda x, y: mu * y**2 / (1 + y**2),
                         lipschitz_on=lambda lo, hi: 9 * mu / (8 * np.sqrt(3)),
                         lower_bound_l=0.0,
                         growth_mu=0.5 * mu,
                         antiderivative_F=lambda x, z: mu * (z - np.arctan(z)),
                         monotone_quotient=False,
                         params={'mu': mu})


# Sources


class ZeroSource(SourceSpec):
    name = 'zero'
    formula = 'h(t,x) = 0'
    PARAMETERS = {}

    def __init__(self):
        super().__init__(lambda t, x: np.zeros(np.broadcast(t, x).shape), 0.0)


class ConstantSource(SourceSpec):
    name = 'constant'
    formula = 'h(t,x) = c'
    PARAMETERS = {'c': 1.0}

    def __init__(self, c=1.0):
        super().__init__(lambda t, x: np.full(np.broadcast(t, x).shape, float(c)), abs(c), params={'c': c})


class SinusoidalSource(SourceSpec):
    """Periodic in time: h = c (1 + a sin(omega t))."""

    name = 'sinusoidal'
    formula = 'h(t,x) = c*(1 + a*sin(omega*t))'
    PARAMETERS = {'c': 1.0, 'a': 0.5, 'omega': 1.0}

    def __init__(self, c=1.0, a=0.5, omega=1.0):
        super().__init__(lambda t, x: c * (1 + a * np.sin(omega * t)) + 0 * x,
                         abs(c) * (1 + abs(a)),
                         params={
                             'c': c,
                             'a': a,
                             'omega': omega
                         })


class BumpSource(SourceSpec):
    """Constant in time, a C^1 bump in space centred at `center`."""

    name = 'bump'
    formula = 'h(t,x) = c*max(0, 1 - ((x-center)/width)^2)^2'
    PARAMETERS = {'c': 1.0, 'center': 0.0, 'width': 0.5}

    def __init__(self, c=1.0, center=0.0, width=0.5):
        if not width > 0:
            raise ParameterError('bump: width must be positive, got {}'.format(width))

        def bump(t, x):
            z = (x - center) / width
            return c * np.maximum(0.0, 1 - z**2)**2 + 0 * t

        super().__init__(bump, abs(c), params={'c': c, 'center': center, 'width': width})


NONLINEARITIES = {
    cls.name: cls
    for cls in (ZeroNonlinearity, Saturating, ModulatedSaturating, Affine, QuadraticSaturating)
}
SOURCES = {cls.name: cls for cls in (ZeroSource, ConstantSource, SinusoidalSource, BumpSource)}


def _build(registry, kind, name, params):
    if name not in registry:
        raise ConfigError('Unknown {} {!r}, choose one of {}'.format(kind, name, sorted(registry)))
    cls = registry[name]
    params = dict(params or {})
    unknown = set(params) - set(cls.PARAMETERS)
    if unknown:
        raise ConfigError('Unknown parameters {} for {} {!r}'.format(sorted(unknown), kind, name))
    return cls(**params)


def build_nonlinearity(name, params=None, domain=(-1.0, 1.0)):
    """Builds the catalog nonlinearity `name` and checks its declared constants by sampling"""
    return _build(NONLINEARITIES, 'nonlinearity', name, params).verify(*domain)


def build_source(name, params=None):
    """Builds the catalog source `name`"""
    return _build(SOURCES, 'source', name, params)


def catalog(domain=(-1.0, 1.0)):
    """Returns a `pd.DataFrame` listing the built-in nonlinearities and sources.

    Every nonlinearity is built with its default parameters and its
    monotone-quotient claim is checked by sampling before it is listed.
    """
    rows = []
    for name, cls in NONLINEARITIES.items():
        nl = build_nonlinearity(name, domain=domain)
        rows.append({
            'kind': 'nonlinearity',
            'name': name,
            'formula': cls.formula,
            'parameters': dict(cls.PARAMETERS),
            'monotone_quotient': nl.monotone_quotient,
            'growth_mu': nl.growth_mu,
            'lower_bound_l': nl.lower_bound_l,
            'bound': np.nan
        })
    for name, cls in SOURCES.items():
        source = build_source(name)
        rows.append({
            'kind': 'source',
            'name': name,
            'formula': cls.formula,
            'parameters': dict(cls.PARAMETERS),
            'monotone_quotient': None,
            'growth_mu': np.nan,
            'lower_bound_l': np.nan,
            'bound': source.bound
        })
    return pd.DataFrame(rows)
