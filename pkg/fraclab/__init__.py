import logging

from . import discretization, models, stationary, evolution, analysis
from .discretization import Grid, Field, FracOperator, EigenPair, build_grid, assemble, eigen_principal
from .enums import Regime, ConeRegime, Direction, RunKind
from .exceptions import (FraclabError, ParameterError, ConfigError, SolverError, ConvergenceError, PositivityError,
                         InvariantViolation, HypothesisWarning)

__version__ = '0.3.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    'discretization', 'models', 'stationary', 'evolution', 'analysis', 'Grid', 'Field', 'FracOperator', 'EigenPair',
    'build_grid', 'assemble', 'eigen_principal', 'Regime', 'ConeRegime', 'Direction', 'RunKind', 'FraclabError',
    'ParameterError', 'ConfigError', 'SolverError', 'ConvergenceError', 'PositivityError', 'InvariantViolation',
    'HypothesisWarning'
]
