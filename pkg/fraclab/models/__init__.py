from .problem import StationaryProblem, ConeEnvelope, Envelopes, validate_params
from .nonlinearity import NonlinearitySpec
from .source import SourceSpec
from .catalog import (ZeroNonlinearity, Saturating, ModulatedSaturating, Affine, QuadraticSaturating, ZeroSource,
                      ConstantSource, SinusoidalSource, BumpSource, build_nonlinearity, build_source, catalog)

__all__ = [
    'StationaryProblem', 'ConeEnvelope', 'Envelopes', 'validate_params', 'NonlinearitySpec', 'SourceSpec',
    'ZeroNonlinearity', 'Saturating', 'ModulatedSaturating', 'Affine', 'QuadraticSaturating', 'ZeroSource',
    'ConstantSource', 'SinusoidalSource', 'BumpSource', 'build_nonlinearity', 'build_source', 'catalog'
]
