#!/usr/bin/env python3
"""
Command-line front door for calibrated projection.

This script computes confidence intervals and single critical levels,
simulates entry-game data, derives the rho-box radius and runs Monte
Carlo experiments.
"""

import os
import sys
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

# Add the package directory to the path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from projection.config_validator import ConfigValidator
from projection.critical_level import critical_level, rho_from_eta
from projection.data_manager import DataManager, eam_options, inference_settings
from projection.eam import METHODS, confidence_interval
from projection.entry_game import DATA_COLUMNS, DGPS, get_dgp, moments, simulate
from projection.exceptions import ConfigurationError, ProjectionError
from projection.harness import ExperimentConfig, run_monte_carlo
from projection.moment_model import GMS_KINDS, KAPPA_RULES, MomentModel

DEFAULT_CONFIG = Path(__file__).with_name('config.yaml')


class ProjectionRunner:
    """
    Runs the command-line actions against a merged configuration.

    Attributes:
        config: Configuration dictionary
        logger: Logger instance
        data_manager: Data and report I/O
        validator: Configuration validator
    """

    def __init__(self, config_file: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None):
        """
        Initialize the runner.

        Args:
            config_file: Path to the configuration file (the bundled default when None)
            overrides: Per-section values taking precedence over the file
        """
        self.config = self._load_config(config_file)
        for section, values in (overrides or {}).items():
            self.config.setdefault(section, {}).update(
                {k: v for k, v in values.items() if v is not None}
            )
        self.logger = self._setup_logging()
        self.data_manager = DataManager(self.config['advanced'].get('template_dir'))
        self.validator = ConfigValidator()

    def _load_config(self, config_file: Optional[str]) -> Dict[str, Any]:
        """
        Load configuration from a YAML file, merged section by section over defaults.

        Args:
            config_file: Path to configuration file

        Returns:
            dict: Configuration dictionary
        """
        default_config = {
            'inference': {
                'alpha': 0.05,
                'rho': None,
                'eta': None,
                'kappa_rule': 'sqrt_ln_n',
                'gms': 'phi1_hard',
                'B': 301,
                'bootstrap': 'multiplier',
                'tol': 1e-4,
                'method': 'calibrated',
                'seed': 0,
            },
            'eam': {
                'k': None,
                'epsilon': 0.05,
                'max_iter': 100,
                'conv_tol': 0.005,
                'min_stall': 3,
                'n_starts': 30,
                'n_candidates': 1000,
                'seed': 0,
            },
            'surrogate': {
                'kernel': 'gaussian',
                'nu': 2.5,
                'nugget': 1e-10,
                'n_restarts': 8,
                'max_evals': 200,
            },
            'experiment': {
                'dgp': 'set1',
                'n': 4000,
                'mc_reps': 300,
                'alphas': [0.05],
                'components': ['delta1'],
                'methods': ['calibrated'],
                'seed': 0,
                'output': None,
                'report': None,
            },
            'logging': {
                'level': 'INFO',
                'file': None,
                'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            },
            'advanced': {
                'n_jobs': 1,
                'progress': True,
            },
        }

        config_path = Path(config_file) if config_file else DEFAULT_CONFIG
        if config_path.exists():
            try:
                with open(config_path, 'r') as f:
                    loaded_config = yaml.safe_load(f) or {}
                for section, values in loaded_config.items():
                    if isinstance(values, dict) and isinstance(default_config.get(section), dict):
                        default_config[section].update(values)
                    else:
                        default_config[section] = values
            except yaml.YAMLError as e:
                print(f"Warning: Failed to load config file {config_path}: {e}", file=sys.stderr)
                print("Using default configuration", file=sys.stderr)

        return default_config

    def _setup_logging(self) -> logging.Logger:
        """
        Set up logging configuration.

        Returns:
            Logger instance
        """
        settings = self.config['logging']
        handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
        if settings.get('file'):
            handlers.insert(0, logging.FileHandler(settings['file']))

        logging.basicConfig(
            level=getattr(logging, str(settings.get('level', 'INFO')).upper()),
            format=settings.get('format'),
            handlers=handlers,
        )
        return logging.getLogger(__name__)

    def validate(self) -> Dict[str, Any]:
        return self.validator.validate_config(self.config)

    def load_model(self, model_file: Optional[str], dgp: Optional[str]) -> MomentModel:
        if dgp:
            return moments(get_dgp(dgp))
        if not model_file:
            raise ProjectionError("either --model or --dgp is required")
        return self.data_manager.load_model(model_file)

    def _direction(self, model: MomentModel, p: Optional[List[float]], component: Optional[str],
                   dgp: Optional[str]) -> np.ndarray:
        if component is not None:
            if not dgp:
                raise ProjectionError("--component needs --dgp; use --p for other models")
            direction = np.zeros(model.d)
            direction[get_dgp(dgp).component_index(component)] = 1.0
            return direction
        if p is None:
            if model.d != 1:
                raise ProjectionError(f"--p with {model.d} entries is required")
            return np.ones(1)
        if len(p) != model.d:
            raise ProjectionError(f"--p has {len(p)} entries, the model has d = {model.d}")
        return np.asarray(p, dtype=float)

    def _data(self, data_file: str, dgp: Optional[str]) -> np.ndarray:
        return self.data_manager.load_data(data_file, columns=DATA_COLUMNS if dgp else None)

    def compute_interval(self, data_file: str, model_file: Optional[str] = None,
                         dgp: Optional[str] = None, p: Optional[List[float]] = None,
                         component: Optional[str] = None,
                         output: Optional[str] = None) -> Dict[str, Any]:
        """
        Confidence interval for p'theta.

        Returns:
            dict: Result with success flag, interval record and output path
        """
        model = self.load_model(model_file, dgp)
        data = self._data(data_file, dgp)
        direction = self._direction(model, p, component, dgp)
        settings = inference_settings(self.config['inference'], model)
        options = eam_options(self.config['eam'], self.config['surrogate'],
                              n_jobs=int(self.config['advanced'].get('n_jobs', 1)))
        self.logger.info(f"Computing {settings.method} interval for {model.name} (d={model.d})")
        ci = confidence_interval(model, data, direction, settings, options)

        output_path = None
        if output:
            output_path = self._write_record(ci.to_dict(), output)
        return {'success': True, 'error': None, 'interval': ci, 'output_path': output_path}

    def critical_value(self, data_file: str, theta: List[float], model_file: Optional[str] = None,
                       dgp: Optional[str] = None, p: Optional[List[float]] = None,
                       component: Optional[str] = None) -> Dict[str, Any]:
        """Calibrated critical level at one theta."""
        model = self.load_model(model_file, dgp)
        if len(theta) != model.d:
            raise ProjectionError(f"--theta has {len(theta)} entries, the model has d = {model.d}")
        data = self._data(data_file, dgp)
        direction = self._direction(model, p, component, dgp)
        settings = inference_settings(self.config['inference'], model)
        result = critical_level(model, data, np.asarray(theta, dtype=float), settings.alpha,
                                settings.rho, settings.gms_config(len(data)), settings.B,
                                settings.seed, settings.tol,
                                p=direction / np.linalg.norm(direction), mode=settings.bootstrap)
        return {'success': True, 'error': None, 'critical_level': result, 'output_path': None}

    def simulate_data(self, dgp: str, n: int, seed: int, output: str) -> Dict[str, Any]:
        """Simulate an entry-game sample and write it as CSV."""
        data = simulate(get_dgp(dgp), n=n, seed=seed)
        path = self.data_manager.save_data(data, output)
        return {'success': True, 'error': None, 'output_path': path}

    def run_experiment(self) -> Dict[str, Any]:
        """Monte Carlo experiment from the ``experiment`` section."""
        experiment = ExperimentConfig.from_config(self.config)
        rows = run_monte_carlo(experiment, self.data_manager,
                               progress=bool(self.config['advanced'].get('progress', True)))
        return {'success': True, 'error': None, 'rows': rows, 'output_path': experiment.output}

    def _write_record(self, record: Dict[str, Any], output: str) -> str:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix in ('.yaml', '.yml'):
            with open(path, 'w', encoding='utf-8') as f:
                yaml.safe_dump(record, f, sort_keys=False)
        elif path.suffix == '.csv':
            flat = {k: v for k, v in record.items() if not isinstance(v, dict)}
            self.data_manager.save_results([flat], path)
        else:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(record, f, indent=2)
        self.logger.info(f"Wrote interval record to {path}")
        return str(path)


def _fmt(value: Optional[float]) -> str:
    return 'empty' if value is None else f"{value:.6f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='calproj',
        description='Calibrated projection confidence intervals for moment (in)equality models'
    )
    parser.add_argument('--config', help='Configuration file path')
    parser.add_argument('--verbose', action='store_true', help='Enable verbose logging')
    sub = parser.add_subparsers(dest='action', required=True)

    def add_model_args(p: argparse.ArgumentParser) -> None:
        p.add_argument('--model', help='Model definition (YAML)')
        p.add_argument('--dgp', choices=sorted(DGPS), help='Built-in entry-game model')
        p.add_argument('--data', required=True, help='Observation CSV with a header row')
        p.add_argument('--p', nargs='+', type=float, help='Projection direction')
        p.add_argument('--component', help='Component name of a built-in model')

    def add_inference_args(p: argparse.ArgumentParser) -> None:
        p.add_argument('--alpha', type=float, help='Nominal level')
        group = p.add_mutually_exclusive_group()
        group.add_argument('--rho', type=float, help='rho-box radius')
        group.add_argument('--eta', help="Bias target for rho (number or 'liberal')")
        p.add_argument('--kappa', choices=KAPPA_RULES, help='GMS thresholding rule')
        p.add_argument('--gms', choices=GMS_KINDS, help='GMS function')
        p.add_argument('--B', type=int, help='Bootstrap replicates')
        p.add_argument('--seed', type=int, help='Bootstrap seed')

    ci = sub.add_parser('ci', help='Confidence interval for a projection')
    add_model_args(ci)
    add_inference_args(ci)
    ci.add_argument('--mode', choices=METHODS, help='Critical-level method')
    ci.add_argument('--conv-tol', type=float, help='E-A-M convergence threshold')
    ci.add_argument('--output', help='Write the interval record (.json, .yaml or .csv)')

    chat = sub.add_parser('chat', help='Calibrated critical level at one theta')
    add_model_args(chat)
    add_inference_args(chat)
    chat.add_argument('--theta', nargs='+', type=float, required=True, help='Parameter value')

    mc = sub.add_parser('mc', help='Monte Carlo experiment')
    mc.add_argument('--dgp', choices=sorted(DGPS), help='DGP')
    mc.add_argument('--n', type=int, help='Sample size')
    mc.add_argument('--reps', type=int, help='Replications')
    mc.add_argument('--alpha', type=float, help='Nominal level (replaces experiment.alphas)')
    mc_rho = mc.add_mutually_exclusive_group()
    mc_rho.add_argument('--rho', type=float, help='rho-box radius')
    mc_rho.add_argument('--eta', help="Bias target for rho (number or 'liberal')")
    mc.add_argument('--B', type=int, help='Bootstrap replicates')
    mc.add_argument('--jobs', type=int, help='Parallel workers')
    mc.add_argument('--seed', type=int, help='Master seed')
    mc.add_argument('--output', help='Summary CSV')
    mc.add_argument('--report', help='Markdown report')

    sim = sub.add_parser('simulate', help='Simulate entry-game data')
    sim.add_argument('--dgp', choices=sorted(DGPS), required=True, help='DGP')
    sim.add_argument('--n', type=int, default=4000, help='Sample size')
    sim.add_argument('--seed', type=int, default=0, help='Seed')
    sim.add_argument('--out', required=True, help='Output CSV')

    rho = sub.add_parser('rho', help='rho-box radius for a bias target')
    rho.add_argument('--eta', required=True, help="Bias target (number or 'liberal')")
    rho.add_argument('--J', type=int, required=True, help='Number of distinct moments')
    rho.add_argument('--d', type=int, required=True, help='Parameter dimension')
    return parser


def _eta(value: Optional[str]):
    if value is None or value == 'liberal':
        return value
    return float(value)


def _overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    get = lambda name: getattr(args, name, None)
    overrides = {
        'inference': {
            'alpha': get('alpha'), 'rho': get('rho'), 'kappa_rule': get('kappa'),
            'gms': get('gms'), 'B': get('B'), 'method': get('mode'),
        },
        'eam': {'conv_tol': get('conv_tol')},
        'experiment': {},
        'advanced': {'n_jobs': get('jobs')},
    }
    if get('eta') is not None:
        overrides['inference']['eta'] = _eta(get('eta'))
        overrides['inference']['rho'] = None
    if args.action == 'mc':
        overrides['experiment'] = {
            'dgp': get('dgp'), 'n': get('n'), 'mc_reps': get('reps'), 'seed': get('seed'),
            'output': get('output'), 'report': get('report'),
        }
        if get('alpha') is not None:
            overrides['experiment']['alphas'] = [get('alpha')]
    else:
        overrides['inference']['seed'] = get('seed')
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.action == 'rho':
        try:
            value = rho_from_eta(_eta(args.eta), args.J, args.d)
        except ProjectionError as e:
            print(f"Error: {e}", file=sys.stderr)
            return 2
        print(f"{value:.4f}")
        return 0

    if args.config and not Path(args.config).exists():
        parser.error(f"configuration file not found: {args.config}")

    try:
        runner = ProjectionRunner(args.config, _overrides(args))
        if getattr(args, 'eta', None) is not None:
            runner.config['inference']['rho'] = None

        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)

        validation = runner.validate()
        if not validation['valid']:
            print("Invalid configuration:", file=sys.stderr)
            for error in validation['errors']:
                print(f"  - {error}", file=sys.stderr)
            return 2

        if args.action == 'ci':
            result = runner.compute_interval(args.data, args.model, args.dgp, args.p,
                                             args.component, args.output)
            ci = result['interval']
            print(f"{ci.method} interval: [{_fmt(ci.lower)}, {_fmt(ci.upper)}]")
            for side, run in (('lower', ci.lower_run), ('upper', ci.upper_run)):
                status = 'converged' if run.converged else 'max_iter reached'
                print(f"  {side}: L={run.evaluations}, iterations={run.iterations}, {status}")
            if result['output_path']:
                print(f"Output: {result['output_path']}")
            return 0

        if args.action == 'chat':
            result = runner.critical_value(args.data, args.theta, args.model, args.dgp, args.p,
                                           args.component)
            level = result['critical_level']
            print(yaml.safe_dump(level.to_dict(), sort_keys=False).rstrip())
            return 0

        if args.action == 'simulate':
            result = runner.simulate_data(args.dgp, args.n, args.seed, args.out)
            print(f"Simulated {args.n} markets from {args.dgp}")
            print(f"Output: {result['output_path']}")
            return 0

        if args.action == 'mc':
            result = runner.run_experiment()
            for row in result['rows']:
                print(f"{row.component} alpha={row.alpha:.2f} {row.method}: "
                      f"median CI [{_fmt(row.median_lower)}, {_fmt(row.median_upper)}], "
                      f"coverage {row.coverage_lower:.3f} ({row.coverage_lower_se:.3f}) / "
                      f"{row.coverage_upper:.3f} ({row.coverage_upper_se:.3f}), "
                      f"avg time {row.avg_time_s:.2f}s")
            if result['output_path']:
                print(f"Output: {result['output_path']}")
            return 0

    except ConfigurationError as e:
        print(f"Invalid configuration: {e}", file=sys.stderr)
        return 2
    except ProjectionError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


def cli_main() -> None:
    sys.exit(main())


if __name__ == '__main__':
    cli_main()
