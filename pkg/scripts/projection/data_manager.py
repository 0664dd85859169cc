"""
Data manager for projection runs.

This module reads and writes observation CSVs and result tables, builds
moment models from YAML definitions, turns configuration sections into
settings objects and renders Markdown reports from Jinja2 templates.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import yaml
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from .config_validator import ConfigValidator
from .critical_level import rho_from_eta
from .eam import EamOptions, InferenceSettings
from .entry_game import DATA_COLUMNS, get_dgp, moments
from .exceptions import ConfigurationError
from .moment_model import MomentModel, linear_model, mean_model
from .surrogate import NUGGET_START

DEFAULT_TEMPLATE_DIR = Path(__file__).resolve().parents[2] / 'global' / 'templates'


def inference_settings(section: Dict[str, Any], model: Optional[MomentModel] = None
                       ) -> InferenceSettings:
    """
    Settings from the ``inference`` configuration section.

    ``rho`` wins over ``eta``; ``eta`` needs the model for J and d. With
    neither, the rho-box is disabled.
    """
    rho = section.get('rho')
    eta = section.get('eta')
    if rho is None and eta is not None:
        if model is None:
            raise ConfigurationError("a model is required to derive rho from eta", 'inference.eta')
        rho = rho_from_eta(eta, model.J1 + model.J2, model.d)
    return InferenceSettings(
        alpha=float(section.get('alpha', 0.05)),
        rho=math.inf if rho is None else float(rho),
        gms=section.get('gms', 'phi1_hard'),
        kappa_rule=section.get('kappa_rule', 'sqrt_ln_n'),
        B=int(section.get('B', 301)),
        seed=int(section.get('seed', 0)),
        tol=float(section.get('tol', 1e-4)),
        bootstrap=section.get('bootstrap', 'multiplier'),
        method=section.get('method', 'calibrated'),
    )


def eam_options(eam: Dict[str, Any], surrogate: Optional[Dict[str, Any]] = None,
                n_jobs: int = 1) -> EamOptions:
    """E-A-M tuning from the ``eam`` and ``surrogate`` sections."""
    surrogate = surrogate or {}
    return EamOptions(
        k=eam.get('k'),
        epsilon=float(eam.get('epsilon', 0.05)),
        max_iter=int(eam.get('max_iter', 100)),
        conv_tol=float(eam.get('conv_tol', 0.005)),
        min_stall=int(eam.get('min_stall', 3)),
        seed=int(eam.get('seed', 0)),
        n_starts=int(eam.get('n_starts', 30)),
        n_candidates=int(eam.get('n_candidates', 1000)),
        kernel=surrogate.get('kernel', 'gaussian'),
        nu=float(surrogate.get('nu', 2.5)),
        nugget=float(surrogate.get('nugget', NUGGET_START)),
        n_restarts=int(surrogate.get('n_restarts', 8)),
        max_evals=int(surrogate.get('max_evals', 200)),
        n_jobs=n_jobs,
    )


def _check_declared(definition: Dict[str, Any], model: MomentModel) -> None:
    """Raise if the optional d, J1, J2 or pairing keys disagree with the built model."""
    for key in ('d', 'J1', 'J2'):
        if key in definition and int(definition[key]) != getattr(model, key):
            raise ConfigurationError(
                f"declared {key}={definition[key]} but the {definition['family']} model "
                f"has {key}={getattr(model, key)}", key)
    if 'pairing' in definition:
        declared = tuple(tuple(int(i) for i in pair) for pair in definition['pairing'])
        if declared != tuple(model.pairing):
            raise ConfigurationError(
                f"declared pairing {list(declared)} but the {definition['family']} model "
                f"pairs {list(model.pairing)}", 'pairing')


class DataManager:
    """
    Reads inputs and writes results for the command line and the harness.

    Attributes:
        template_dir: Directory holding the Jinja2 templates
        validator: Validator for model definitions
        logger: Logger instance for file operations
    """

    def __init__(self, template_dir: Optional[Union[str, Path]] = None):
        self.template_dir = Path(template_dir) if template_dir else DEFAULT_TEMPLATE_DIR
        self.validator = ConfigValidator()
        self.logger = logging.getLogger(__name__)

    def load_data(self, path: Union[str, Path], columns: Optional[Sequence[str]] = None
                  ) -> np.ndarray:
        """
        Read an observation CSV with a header row.

        Args:
            path: CSV file
            columns: Columns to keep, in order (all columns when None)

        Returns:
            np.ndarray: (n, k) float matrix
        """
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"data file not found: {path}", 'data')
        frame = pd.read_csv(path)
        if columns is not None:
            missing = [c for c in columns if c not in frame.columns]
            if missing:
                raise ConfigurationError(f"data file lacks columns {missing}", 'data')
            frame = frame[list(columns)]
        try:
            values = frame.to_numpy(dtype=float)
        except ValueError as e:
            raise ConfigurationError(f"non-numeric data in {path}: {e}", 'data') from e
        self.logger.info(f"Loaded {values.shape[0]} observations from {path}")
        return values

    def save_data(self, data: np.ndarray, path: Union[str, Path],
                  columns: Sequence[str] = DATA_COLUMNS) -> str:
        """Write an observation matrix as CSV; integer-valued columns stay integers."""
        frame = pd.DataFrame(np.asarray(data), columns=list(columns))
        for column in frame.columns:
            if np.all(frame[column] == np.round(frame[column])):
                frame[column] = frame[column].astype(int)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        self.logger.info(f"Wrote {len(frame)} rows to {path}")
        return str(path)

    def load_model(self, source: Union[str, Path, Dict[str, Any]]) -> MomentModel:
        """
        Build a moment model from a YAML file or an already parsed definition.

        Raises:
            ConfigurationError: If the definition fails validation or its declared
                d, J1, J2 or pairing disagree with the built model
        """
        if isinstance(source, dict):
            definition = source
        else:
            path = Path(source)
            if not path.exists():
                raise ConfigurationError(f"model file not found: {path}", 'model')
            with open(path, 'r', encoding='utf-8') as f:
                definition = yaml.safe_load(f) or {}

        result = self.validator.validate_model(definition)
        if not result['valid']:
            raise ConfigurationError('; '.join(result['errors']), 'model')

        family = definition['family']
        params = definition.get('params', {})
        if family == 'entry_game':
            model = moments(get_dgp(params['dgp']))
        elif family == 'mean':
            box = definition.get('theta_box', [[-10.0, 10.0]])
            model = mean_model(lower=box[0][0], upper=box[0][1],
                               equality=bool(params.get('equality', False)),
                               column=int(params.get('column', 0)))
        else:
            model = linear_model(params['Z'], definition['theta_box'], J2=int(params.get('J2', 0)))
        _check_declared(definition, model)
        return model

    def save_results(self, rows: Iterable[Any], path: Union[str, Path],
                     float_format: str = '%.6f') -> str:
        """
        Write records (dataclasses or dicts) as CSV in field order.
        """
        records = [row.to_dict() if hasattr(row, 'to_dict') else dict(row) for row in rows]
        frame = pd.DataFrame.from_records(records)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=float_format)
        self.logger.info(f"Wrote results to {path}")
        return str(path)

    def render_report(self, context: Dict[str, Any],
                      template_name: str = 'results_table.md.j2') -> str:
        """Render a Jinja2 template from the template directory."""
        env = Environment(
            loader=FileSystemLoader(str(self.template_dir)),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
        )
        env.filters['fmt'] = _format_number
        return env.get_template(template_name).render(**context)

    def write_report(self, context: Dict[str, Any], path: Union[str, Path],
                     template_name: str = 'results_table.md.j2') -> str:
        text = self.render_report(context, template_name)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        self.logger.info(f"Wrote report to {path}")
        return str(path)


def _format_number(value: Any, digits: int = 3) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return '-'
    return f"{value:.{digits}f}"


def records_to_frame(records: List[Dict[str, Any]]) -> pd.DataFrame:
    """DataFrame of replication records, ordered by replication index."""
    frame = pd.DataFrame.from_records(records)
    if not frame.empty:
        frame = frame.sort_values(['rep', 'component', 'alpha', 'method'], kind='mergesort')
    return frame.reset_index(drop=True)
