from .fits import ExponentFit, boundary_exponent_fit, log_log_slope
from .checks import (cone_check, comparison_check, resolvent_contraction_check, picone_check, contraction_check,
                     time_derivative_check)
from .stats import CheckResult, failures, render, skip, summary
from .studies import (dt_family, gap_scaling_study, energy_refinement_study, beta_threshold,
                      seminorm_refinement_study)

__all__ = [
    'ExponentFit', 'boundary_exponent_fit', 'log_log_slope', 'cone_check', 'comparison_check',
    'resolvent_contraction_check', 'picone_check', 'contraction_check', 'time_derivative_check', 'CheckResult',
    'failures', 'skip', 'summary', 'render', 'dt_family', 'gap_scaling_study', 'energy_refinement_study',
    'beta_threshold', 'seminorm_refinement_study'
]
