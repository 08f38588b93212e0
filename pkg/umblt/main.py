"""
UMBLT Command-Line Entry Point
Two-grid source reconstruction experiments with coefficient uncertainty ensembles
"""

import argparse
import platform
import sys
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import loguru
import numpy as np
import pydantic
import scipy
from pydantic import ValidationError

from . import __version__
from .models.coefficients import check_hypotheses, coefficients_from_preset, experiment_coefficients
from .models.mesh import build_grid
from .schemas import DESK_SCALE, PAPER_SCALE, ExperimentConfig, ExperimentId, RunManifest, load_config_file
from .services.pipeline_service import get_pipeline_service
from .services.report_service import ReportService
from .services.uq_service import EnsemblePlan, get_uq_service
from .utils.config import settings
from .utils.errors import ConfigError, EnsembleError, UMBLTError
from .utils.logger import add_run_log, get_logger, log_error, remove_run_log, setup_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3

# CLI flag -> ExperimentConfig field
_FLAG_FIELDS = {
    "experiment": "experiment",
    "preset": "preset",
    "samples": "samples",
    "levels": "levels",
    "sweep": "sweep",
    "gamma": "gamma",
    "ell": "ell",
    "adjoint_mode": "adjoint_mode",
    "partial_gamma": "partial_gamma",
    "fine_n": "fine_n",
    "coarse_n": "coarse_n",
    "seed": "seed",
    "out_dir": "out_dir",
    "jobs": "jobs",
    "bound_checks": "bound_check_count",
    "plots": "plots",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="umblt",
        description="Reconstruct a bioluminescent source from ultrasound-modulated internal data "
                    "and measure its sensitivity to coefficient uncertainty.",
    )
    parser.add_argument("--experiment", help="1, 2 or custom (default 1)")
    parser.add_argument("--preset", help="Coefficient preset for --experiment custom")
    parser.add_argument("--config", type=Path, help="INI config file or a manifest.json to replay")
    parser.add_argument("--samples", type=int, help="Ensemble size per uncertainty level")
    parser.add_argument("--levels", help="Comma-separated relative uncertainty levels, e.g. 0.02,0.04")
    parser.add_argument("--sweep", help="both, D_only, sigma_only or joint")
    parser.add_argument("--gamma", type=float, help="Elasto-optical constant")
    parser.add_argument("--ell", type=float, help="Extrapolation length")
    parser.add_argument("--adjoint-mode", help="data (adjoint paired with H) or believed (re-solved per sample)")
    parser.add_argument("--partial-gamma", help="Dirichlet sides of the adjoint, e.g. top,left")
    parser.add_argument("--fine-n", type=int, help="Fine grid nodes per axis")
    parser.add_argument("--coarse-n", type=int, help="Coarse grid nodes per axis")
    parser.add_argument("--seed", type=int, help="Perturbation seed")
    parser.add_argument("--out-dir", help="Output directory (default $UMBLT_OUT)")
    parser.add_argument("--jobs", type=int, help="Worker processes for the ensemble")
    parser.add_argument("--paper-scale", action="store_true", help="Fine 401, coarse 201, 1000 samples")
    parser.add_argument("--bound-checks", type=int, help="Samples checked against the discrete bound")
    parser.add_argument("--plots", action="store_true", default=None, help="Render SVG figures")
    parser.add_argument("--log-level", help="Override LOG_LEVEL")
    return parser


def _parse_levels(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Invalid --levels value {text!r}") from e


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Desk preset, then --paper-scale, then --config, then explicit flags"""
    values: Dict[str, Any] = dict(DESK_SCALE)
    if args.paper_scale:
        values.update(PAPER_SCALE)
    if args.config is not None:
        values.update(load_config_file(args.config))

    for flag, name in _FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if flag == "levels":
            value = _parse_levels(value)
        elif flag == "partial_gamma":
            value = {"sides": [s.strip() for s in value.split(",") if s.strip()]}
        values[name] = value

    if values.get("out_dir") is None:
        values["out_dir"] = settings.UMBLT_OUT
    return ExperimentConfig(**values)


def _versions() -> Dict[str, str]:
    return {
        "umblt": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.VERSION,
        "loguru": loguru.__version__,
    }


def run_experiment(cfg: ExperimentConfig) -> int:
    """
    Hypothesis check, fine-grid data, coarse baseline reconstruction and
    ensemble, then every artifact

    Args:
        cfg: Validated experiment configuration

    Returns:
        Exit status (0 ok, 1 sample or pipeline failure, 3 I/O failure)
    """
    started = datetime.now()
    out_dir = Path(cfg.out_dir or settings.UMBLT_OUT)
    wall: Dict[str, float] = {}
    try:
        reports = ReportService(out_dir)
        sink = add_run_log(out_dir / "run.log")
    except OSError as e:
        log_error(e, "run_experiment output setup")
        return EXIT_IO

    try:
        logger.info("=" * 60)
        logger.info(f"Experiment {cfg.experiment.value} | fine={cfg.fine_n} | coarse={cfg.coarse_n} | "
                    f"samples={cfg.samples} | sweep={cfg.sweep.value}")
        logger.info("=" * 60)

        if cfg.experiment == ExperimentId.CUSTOM:
            c, s = coefficients_from_preset(cfg.preset, cfg.gamma, cfg.ell)
        else:
            c, s = experiment_coefficients(cfg.experiment.value, cfg.gamma, cfg.ell)
        fine = build_grid(cfg.bounds, cfg.fine_n, cfg.fine_n)
        coarse = build_grid(cfg.bounds, cfg.coarse_n, cfg.coarse_n)

        t0 = time.time()
        hypotheses = check_hypotheses(c, coarse)
        pipeline = get_pipeline_service()
        data = pipeline.prepare_two_grid(c, s, fine, coarse, cfg.gamma_set)
        wall["data_generation"] = time.time() - t0

        t0 = time.time()
        baseline = pipeline.reconstruct_source(
            coarse, c, data.psi_coarse, data.H_coarse, adjoint_mode=cfg.adjoint_mode, gamma_set=cfg.gamma_set,
        )
        baseline_error = baseline.relative_error(data.source_coarse)
        wall["baseline_reconstruction"] = time.time() - t0
        logger.info(f"✓ Baseline reconstruction | relative L2 error={baseline_error:.4g} | "
                    f"hypotheses passed={hypotheses.passed}")

        t0 = time.time()
        plan = EnsemblePlan(
            levels=tuple(cfg.levels),
            sweep=cfg.sweep,
            samples=cfg.samples,
            seed=cfg.seed,
            jobs=cfg.jobs,
            bound_check_count=cfg.bound_check_count,
            bound_grid_n=cfg.bound_grid_n,
            k_max=cfg.chaos_order,
            gamma_set=cfg.gamma_set,
            adjoint_mode=cfg.adjoint_mode,
        )
        ensemble = get_uq_service().run_ensemble(c, s, data, plan)
        wall["ensemble"] = time.time() - t0

        reports.write_ensemble(ensemble)
        reports.write_field("baseline_reconstruction.txt", baseline.source)
        reports.write_field("truth_source.txt", data.source_coarse)
        reports.write_field("internal_data.txt", data.H_coarse)
        reports.write_field("adjoint.txt", data.psi_coarse)
        if cfg.plots:
            reports.write_plots(ensemble)

        manifest = RunManifest(
            config=cfg,
            versions=_versions(),
            started_at=started,
            wall_times=wall,
            baseline_error=baseline_error,
            failures=ensemble.failures,
            rejections=ensemble.rejections,
            artifacts=reports.written + ["manifest.json", "run.log"],
        )
        reports.write_manifest(manifest)
        logger.info(f"✓ Run complete | artifacts in {out_dir}")
        return EXIT_OK

    except EnsembleError as e:
        log_error(e, "run_experiment ensemble")
        return EXIT_FAILURE
    except OSError as e:
        log_error(e, "run_experiment I/O")
        return EXIT_IO
    except UMBLTError as e:
        log_error(e, "run_experiment")
        return EXIT_FAILURE
    except Exception as e:
        log_error(e, "run_experiment unexpected")
        return EXIT_FAILURE
    finally:
        remove_run_log(sink)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.log_level:
        setup_logger(args.log_level.upper())

    try:
        cfg = resolve_config(args)
    except ValidationError as e:
        logger.error(f"Invalid configuration:\n{e}")
        return EXIT_CONFIG
    except (ConfigError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"Cannot read configuration: {e}")
        return EXIT_IO

    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
