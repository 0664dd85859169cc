"""
Monte Carlo experiments for the built-in entry-game DGPs.

Each replication simulates a sample, computes one interval per
(component, alpha, method) and records whether it covers the lower and the
upper end of the projected identified set. Replications get independent
seeds spawned from the master seed, so the aggregate does not depend on
the number of workers.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from .critical_level import rho_from_eta
from .data_manager import DataManager, eam_options, inference_settings, records_to_frame
from .eam import METHODS, EamOptions, InferenceSettings, confidence_interval
from .entry_game import EntryGameSpec, get_dgp, identified_bounds, moments, simulate
from .exceptions import ConfigurationError, ProjectionError

logger = logging.getLogger(__name__)

RESULT_COLUMNS = (
    'component', 'alpha', 'median_lower', 'median_upper', 'coverage_lower',
    'coverage_upper', 'avg_time_s', 'method', 'coverage_lower_se',
    'coverage_upper_se', 'empty_share', 'failures', 'reps',
)


@dataclass
class ExperimentConfig:
    """
    One Monte Carlo design.

    Attributes:
        dgp: Registered DGP name
        n: Sample size per replication
        mc_reps: Replications
        alphas: Nominal levels
        components: Components of theta to cover, by name or index
        methods: Critical-level methods
        seed: Master seed
        n_jobs: Parallel workers over replications
        inference: Critical-level settings (alpha and method are overridden per cell)
        eam: E-A-M tuning
        eta: Bias target used to derive rho when ``inference.rho`` is unset
        output: Summary CSV path
        report: Markdown report path
    """

    dgp: str = 'set1'
    n: int = 4000
    mc_reps: int = 300
    alphas: Tuple[float, ...] = (0.05,)
    components: Tuple[Any, ...] = ('delta1',)
    methods: Tuple[str, ...] = ('calibrated',)
    seed: int = 0
    n_jobs: int = 1
    inference: InferenceSettings = field(default_factory=InferenceSettings)
    eam: EamOptions = field(default_factory=EamOptions)
    eta: Optional[Any] = None
    output: Optional[str] = None
    report: Optional[str] = None

    def __post_init__(self):
        if self.mc_reps < 1:
            raise ConfigurationError("mc_reps must be at least 1", 'experiment.mc_reps')
        for alpha in self.alphas:
            if not 0.0 < alpha < 0.5:
                raise ConfigurationError("alpha must lie in (0, 0.5)", 'experiment.alphas')
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigurationError(f"unknown methods {unknown}", 'experiment.methods')
        self.alphas = tuple(float(a) for a in self.alphas)
        self.components = tuple(self.components)
        self.methods = tuple(self.methods)

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> 'ExperimentConfig':
        """Build from a merged run configuration (``experiment`` plus shared sections)."""
        experiment = dict(config.get('experiment', {}))
        inference = dict(config.get('inference', {}))
        eta = inference.pop('eta', None) if inference.get('rho') is None else None
        n_jobs = int(config.get('advanced', {}).get('n_jobs', 1))
        return cls(
            dgp=experiment.get('dgp', 'set1'),
            n=int(experiment.get('n', 4000)),
            mc_reps=int(experiment.get('mc_reps', 300)),
            alphas=tuple(experiment.get('alphas', [inference.get('alpha', 0.05)])),
            components=tuple(experiment.get('components', ['delta1'])),
            methods=tuple(experiment.get('methods', [inference.get('method', 'calibrated')])),
            seed=int(experiment.get('seed', 0)),
            n_jobs=n_jobs,
            inference=inference_settings(inference),
            eam=eam_options(config.get('eam', {}), config.get('surrogate', {})),
            eta=eta,
            output=experiment.get('output'),
            report=experiment.get('report'),
        )

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out['inference'] = asdict(self.inference)
        out['eam'] = asdict(self.eam)
        return out


@dataclass
class ResultRow:
    """
    Aggregate over replications for one (component, alpha, method) cell.

    Coverage counts an empty interval as not covering; failed replications
    are left out of every rate.
    """

    component: str
    alpha: float
    median_lower: Optional[float]
    median_upper: Optional[float]
    coverage_lower: float
    coverage_upper: float
    avg_time_s: float
    method: str
    coverage_lower_se: float
    coverage_upper_se: float
    empty_share: float
    failures: int
    reps: int

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in RESULT_COLUMNS}


def true_bounds(spec: EntryGameSpec, component) -> Tuple[float, float]:
    """Projection of the identified set, falling back to the true value when unknown."""
    index = spec.component_index(component)
    name = spec.component_names[index]
    if name in spec.bounds:
        return spec.bounds[name]
    if spec.variant == 'set1':
        return identified_bounds(spec, name)
    value = float(spec.theta_true[index])
    logger.warning("no stored bounds for %s in %s; using the true value %.4f",
                   name, spec.name, value)
    return value, value


def _replication(config: ExperimentConfig, rep: int, seed_seq: np.random.SeedSequence
                 ) -> List[Dict[str, Any]]:
    spec = get_dgp(config.dgp)
    model = moments(spec)
    data_seed, boot_seed, eam_seed = (int(s) for s in seed_seq.generate_state(3))
    data = simulate(spec, n=config.n, seed=data_seed)

    settings = config.inference
    if config.eta is not None and not np.isfinite(settings.rho):
        settings = replace(settings, rho=rho_from_eta(config.eta, model.J1 + model.J2, model.d))
    options = replace(config.eam, seed=eam_seed % (2 ** 31), n_jobs=1)

    records = []
    for component in config.components:
        index = spec.component_index(component)
        name = spec.component_names[index]
        p = np.zeros(spec.d)
        p[index] = 1.0
        for alpha in config.alphas:
            for method in config.methods:
                cell = replace(settings, alpha=alpha, method=method, seed=boot_seed % (2 ** 31))
                record = {'rep': rep, 'component': name, 'alpha': alpha, 'method': method,
                          'lower': np.nan, 'upper': np.nan, 'empty': False, 'failed': False,
                          'converged': False, 'evaluations': 0, 'time_s': 0.0}
                started = time.perf_counter()
                try:
                    ci = confidence_interval(model, data, p, cell, options)
                except ProjectionError as e:
                    logger.warning("replication %d (%s, %s) failed: %s", rep, name, method, e)
                    record['failed'] = True
                else:
                    record.update({
                        'lower': np.nan if ci.lower is None else ci.lower,
                        'upper': np.nan if ci.upper is None else ci.upper,
                        'empty': ci.empty,
                        'converged': ci.lower_run.converged and ci.upper_run.converged,
                        'evaluations': ci.lower_run.evaluations + ci.upper_run.evaluations,
                    })
                record['time_s'] = time.perf_counter() - started
                records.append(record)
    return records


def _coverage_se(rate: float, reps: int) -> float:
    return float(np.sqrt(rate * (1.0 - rate) / reps)) if reps else float('nan')


def summarize(frame: pd.DataFrame, bounds: Dict[str, Tuple[float, float]]) -> List[ResultRow]:
    """
    Aggregate replication records into one row per (component, alpha, method).

    Args:
        frame: Replication records with columns rep, component, alpha,
            method, lower, upper, empty, failed, time_s
        bounds: True (lower, upper) projection bounds per component

    Returns:
        List[ResultRow]: Rows in first-appearance order
    """
    rows = []
    for (component, alpha, method), cell in frame.groupby(
            ['component', 'alpha', 'method'], sort=False):
        ok = cell[~cell['failed'].astype(bool)]
        reps = len(ok)
        lo_true, hi_true = bounds[component]
        nonempty = ok[~ok['empty'].astype(bool)]
        covers_lo = (nonempty['lower'] <= lo_true) & (lo_true <= nonempty['upper'])
        covers_hi = (nonempty['lower'] <= hi_true) & (hi_true <= nonempty['upper'])
        cov_lo = float(covers_lo.sum()) / reps if reps else float('nan')
        cov_hi = float(covers_hi.sum()) / reps if reps else float('nan')
        rows.append(ResultRow(
            component=component,
            alpha=float(alpha),
            median_lower=float(nonempty['lower'].median()) if len(nonempty) else None,
            median_upper=float(nonempty['upper'].median()) if len(nonempty) else None,
            coverage_lower=cov_lo,
            coverage_upper=cov_hi,
            avg_time_s=float(ok['time_s'].mean()) if reps else float('nan'),
            method=method,
            coverage_lower_se=_coverage_se(cov_lo, reps),
            coverage_upper_se=_coverage_se(cov_hi, reps),
            empty_share=float(ok['empty'].astype(bool).mean()) if reps else float('nan'),
            failures=int(len(cell) - reps),
            reps=reps,
        ))
    return rows


def run_monte_carlo(config: ExperimentConfig, manager: Optional[DataManager] = None,
                    progress: bool = True) -> List[ResultRow]:
    """
    Run the experiment and write its outputs.

    Writes the summary CSV to ``config.output`` (if set), the per-replication
    records next to it as ``<stem>_replications.csv`` and the Markdown
    report to ``config.report`` (if set). The replication CSV carries no
    timings and is byte-identical across runs with the same seed.

    Returns:
        List[ResultRow]: One row per (component, alpha, method)
    """
    manager = manager or DataManager()
    spec = get_dgp(config.dgp)
    bounds = {spec.component_names[spec.component_index(c)]: true_bounds(spec, c)
              for c in config.components}

    children = np.random.SeedSequence(config.seed).spawn(config.mc_reps)
    logger.info("Monte Carlo %s: n=%d, %d replications, %d worker(s)",
                config.dgp, config.n, config.mc_reps, config.n_jobs)
    tasks = tqdm(range(config.mc_reps), desc=f"{config.dgp} replications", disable=not progress)
    if config.n_jobs == 1:
        chunks = [_replication(config, rep, children[rep]) for rep in tasks]
    else:
        chunks = Parallel(n_jobs=config.n_jobs)(
            delayed(_replication)(config, rep, children[rep]) for rep in tasks
        )
    frame = records_to_frame([record for chunk in chunks for record in chunk])
    rows = summarize(frame, bounds)
    for row in rows:
        logger.info("%s alpha=%.3f %s: coverage %.3f / %.3f, median [%s, %s]",
                    row.component, row.alpha, row.method, row.coverage_lower,
                    row.coverage_upper, row.median_lower, row.median_upper)

    if config.output:
        manager.save_results(rows, config.output)
        detail = Path(config.output)
        detail = detail.with_name(f"{detail.stem}_replications.csv")
        manager.save_results(
            frame.drop(columns=['time_s']).to_dict('records'), detail, float_format='%.10f'
        )
    if config.report:
        manager.write_report({
            'config': config.to_dict(),
            'rows': [row.to_dict() for row in rows],
            'bounds': bounds,
        }, config.report)
    return rows
