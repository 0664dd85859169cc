"""
Configuration validator for projection runs.

This module checks run configurations, user model definitions and
experiment definitions against cerberus schemas and reports problems in a
uniform result dictionary.
"""

import logging
from typing import Any, Dict, List, Union

from cerberus import Validator

from .critical_level import BOOTSTRAP_MODES
from .eam import METHODS
from .entry_game import DGPS
from .moment_model import GMS_KINDS, KAPPA_RULES
from .surrogate import KERNELS

_ALPHA = {'type': 'float', 'min': 1e-6, 'max': 0.5}
_POSITIVE_INT = {'type': 'integer', 'min': 1}

INFERENCE_SCHEMA = {
    'alpha': _ALPHA,
    'rho': {'type': 'float', 'min': 0.0, 'nullable': True},
    'eta': {'type': ['float', 'string'], 'nullable': True},
    'kappa_rule': {'type': 'string', 'allowed': list(KAPPA_RULES)},
    'gms': {'type': 'string', 'allowed': list(GMS_KINDS)},
    'B': {'type': 'integer', 'min': 2},
    'bootstrap': {'type': 'string', 'allowed': list(BOOTSTRAP_MODES)},
    'tol': {'type': 'float', 'min': 1e-12, 'max': 1.0},
    'method': {'type': 'string', 'allowed': list(METHODS)},
    'seed': {'type': 'integer', 'min': 0},
}

EAM_SCHEMA = {
    'k': {'type': 'integer', 'min': 2, 'nullable': True},
    'epsilon': {'type': 'float', 'min': 0.0, 'max': 0.99},
    'max_iter': _POSITIVE_INT,
    'conv_tol': {'type': 'float', 'min': 1e-12},
    'min_stall': _POSITIVE_INT,
    'n_starts': _POSITIVE_INT,
    'n_candidates': {'type': 'integer', 'min': 0},
    'seed': {'type': 'integer', 'min': 0},
}

SURROGATE_SCHEMA = {
    'kernel': {'type': 'string', 'allowed': list(KERNELS)},
    'nu': {'type': 'float', 'min': 1e-3},
    'nugget': {'type': 'float', 'min': 0.0, 'max': 1e-6},
    'n_restarts': _POSITIVE_INT,
    'max_evals': _POSITIVE_INT,
}

EXPERIMENT_SCHEMA = {
    'dgp': {'type': 'string', 'allowed': sorted(DGPS)},
    'n': {'type': 'integer', 'min': 10},
    'mc_reps': _POSITIVE_INT,
    'alphas': {'type': 'list', 'minlength': 1, 'schema': _ALPHA},
    'components': {'type': 'list', 'minlength': 1, 'schema': {'type': ['string', 'integer']}},
    'methods': {'type': 'list', 'minlength': 1,
                'schema': {'type': 'string', 'allowed': list(METHODS)}},
    'seed': {'type': 'integer', 'min': 0},
    'output': {'type': 'string', 'nullable': True},
    'report': {'type': 'string', 'nullable': True},
}

LOGGING_SCHEMA = {
    'level': {'type': 'string', 'allowed': ['DEBUG', 'INFO', 'WARNING', 'ERROR']},
    'file': {'type': 'string', 'nullable': True},
    'format': {'type': 'string'},
}

ADVANCED_SCHEMA = {
    'n_jobs': {'type': 'integer'},
    'progress': {'type': 'boolean'},
    'template_dir': {'type': 'string', 'nullable': True},
}


def _section(schema: Dict[str, Any]) -> Dict[str, Any]:
    return {'type': 'dict', 'schema': schema}


CONFIG_SCHEMA = {
    'inference': _section(INFERENCE_SCHEMA),
    'eam': _section(EAM_SCHEMA),
    'surrogate': _section(SURROGATE_SCHEMA),
    'experiment': _section(EXPERIMENT_SCHEMA),
    'logging': _section(LOGGING_SCHEMA),
    'advanced': _section(ADVANCED_SCHEMA),
}

MODEL_SCHEMA = {
    'name': {'type': 'string'},
    'family': {'type': 'string', 'required': True, 'allowed': ['mean', 'linear', 'entry_game']},
    'd': _POSITIVE_INT,
    'J1': {'type': 'integer', 'min': 0},
    'J2': {'type': 'integer', 'min': 0},
    'theta_box': {'type': 'list', 'schema': {'type': 'list', 'minlength': 2, 'maxlength': 2,
                                             'schema': {'type': 'number'}}},
    'pairing': {'type': 'list', 'schema': {'type': 'list', 'minlength': 2, 'maxlength': 2,
                                           'schema': {'type': 'integer', 'min': 0}}},
    'params': {'type': 'dict'},
}


def flatten_errors(errors: Union[Dict, List, str], prefix: str = '') -> List[str]:
    """
    Turn a nested cerberus error tree into ``"section.field: message"`` strings.
    """
    if isinstance(errors, str):
        return [f"{prefix}: {errors}" if prefix else errors]
    if isinstance(errors, list):
        out = []
        for item in errors:
            out.extend(flatten_errors(item, prefix))
        return out
    out = []
    for key, value in errors.items():
        out.extend(flatten_errors(value, f"{prefix}.{key}" if prefix else str(key)))
    return out


class ConfigValidator:
    """
    Validates configuration dictionaries.

    Attributes:
        logger: Logger instance for validation messages
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def _check(self, document: Dict[str, Any], schema: Dict[str, Any],
               allow_unknown: bool = False) -> Dict[str, Any]:
        result = {'valid': True, 'warnings': [], 'errors': [], 'info': {}}
        if not isinstance(document, dict):
            result['valid'] = False
            result['errors'].append("configuration must be a mapping")
            return result
        validator = Validator(schema, allow_unknown=allow_unknown)
        if not validator.validate(document):
            result['valid'] = False
            result['errors'].extend(flatten_errors(validator.errors))
        result['info']['sections'] = sorted(document)
        return result

    def validate_config(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """
        Validate a run configuration.

        Args:
            config: Merged configuration dictionary

        Returns:
            dict: Validation result with status and detailed information
        """
        result = self._check(config, CONFIG_SCHEMA)
        if not result['valid']:
            return result

        inference = config.get('inference', {})
        if inference.get('B', 1000) < 100:
            result['warnings'].append("inference.B: fewer than 100 bootstrap draws")
        if inference.get('rho') is not None and inference.get('eta') is not None:
            result['warnings'].append("inference.rho: both rho and eta given; rho wins")
        eta = inference.get('eta')
        if isinstance(eta, str) and eta != 'liberal':
            result['valid'] = False
            result['errors'].append("inference.eta: must be a number or 'liberal'")
        elif isinstance(eta, float) and not 0.0 < eta < 1.0:
            result['valid'] = False
            result['errors'].append("inference.eta: must lie in (0, 1)")
        if config.get('eam', {}).get('epsilon', 0.05) == 0.0:
            result['warnings'].append("eam.epsilon: no exploration draws")

        for message in result['warnings']:
            self.logger.warning(message)
        return result

    def validate_model(self, model: Dict[str, Any]) -> Dict[str, Any]:
        """
        Validate a user model definition.

        Args:
            model: Parsed model file

        Returns:
            dict: Validation result with status and detailed information
        """
        result = self._check(model, MODEL_SCHEMA)
        if not result['valid']:
            return result

        family = model['family']
        params = model.get('params', {})
        result['info']['family'] = family
        if family == 'entry_game':
            if params.get('dgp') not in DGPS:
                result['valid'] = False
                result['errors'].append(f"params.dgp: must be one of {sorted(DGPS)}")
            return result
        if family == 'linear':
            Z = params.get('Z')
            if not Z or not all(isinstance(row, list) for row in Z):
                result['valid'] = False
                result['errors'].append("params.Z: must be a list of rows")
                return result
            if 'theta_box' not in model:
                result['valid'] = False
                result['errors'].append("theta_box: required for the linear family")
            elif len(model['theta_box']) != len(Z[0]):
                result['valid'] = False
                result['errors'].append(
                    f"theta_box: expected {len(Z[0])} rows, got {len(model['theta_box'])}"
                )

        for lo, hi in model.get('theta_box', []):
            if lo > hi:
                result['valid'] = False
                result['errors'].append(f"theta_box: lower bound {lo} exceeds upper bound {hi}")
        if model.get('pairing') and family != 'entry_game':
            result['valid'] = False
            result['errors'].append(f"pairing: the {family} family has no paired moments")
        return result

    def validate_experiment(self, experiment: Dict[str, Any]) -> Dict[str, Any]:
        """Validate an experiment definition (the ``experiment`` section)."""
        result = self._check(experiment, EXPERIMENT_SCHEMA)
        if result['valid'] and experiment.get('mc_reps', 1) < 30:
            result['warnings'].append("experiment.mc_reps: coverage estimates will be coarse")
        return result
