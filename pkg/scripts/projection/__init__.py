"""
Calibrated projection confidence intervals for moment (in)equality models.

This package contains modules for:
- Moment models, studentized sample moments and GMS
- Small dense linear programs and the bootstrap critical level
- Kriging surrogates and the E-A-M optimization loop
- The two-player entry game DGPs and Monte Carlo experiments
- Configuration validation, data files and reports
"""

from .config_validator import ConfigValidator
from .critical_level import (CriticalLevel, as_projection_critical, critical_level,
                             one_sided_critical, rho_from_eta, two_lp_interval)
from .data_manager import DataManager
from .eam import (ConfidenceInterval, EamOptions, EamProblem, EamResult, InferenceSettings,
                  confidence_interval, run_direction)
from .entry_game import DGPS, EntryGameSpec, get_dgp
from .exceptions import (ConfigurationError, DegenerateMomentError, IllConditionedSurrogateError,
                         ProjectionError, SimplexStallError)
from .harness import ExperimentConfig, ResultRow, run_monte_carlo
from .linprog import LinearSystem, maximize
from .moment_model import GmsConfig, MomentModel, linear_model, mean_model, studentized_moments
from .surrogate import KrigingModel, fit

__all__ = [
    'ConfigValidator',
    'CriticalLevel',
    'as_projection_critical',
    'critical_level',
    'one_sided_critical',
    'rho_from_eta',
    'two_lp_interval',
    'DataManager',
    'ConfidenceInterval',
    'EamOptions',
    'EamProblem',
    'EamResult',
    'InferenceSettings',
    'confidence_interval',
    'run_direction',
    'DGPS',
    'EntryGameSpec',
    'get_dgp',
    'ConfigurationError',
    'DegenerateMomentError',
    'IllConditionedSurrogateError',
    'ProjectionError',
    'SimplexStallError',
    'ExperimentConfig',
    'ResultRow',
    'run_monte_carlo',
    'LinearSystem',
    'maximize',
    'GmsConfig',
    'MomentModel',
    'linear_model',
    'mean_model',
    'studentized_moments',
    'KrigingModel',
    'fit',
]
