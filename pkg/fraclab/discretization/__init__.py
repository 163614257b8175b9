from .grid import Grid, Field, build_grid
from .fraclap import (FracOperator, EigenPair, assemble, apply, eigen_principal, x0_norm, gagliardo_seminorm,
                      solve_linear, normalization_constant, torsion_constant, torsion_profile)

__all__ = [
    'Grid', 'Field', 'build_grid', 'FracOperator', 'EigenPair', 'assemble', 'apply', 'eigen_principal', 'x0_norm',
    'gagliardo_seminorm', 'solve_linear', 'normalization_constant', 'torsion_constant', 'torsion_profile'
]
