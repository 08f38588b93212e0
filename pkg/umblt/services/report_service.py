"""
Report Service
CSV tables, field dumps, run manifest and optional SVG figures
"""

import csv
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np

from .uq_service import BoundCheck, EnsembleReport, UqSample
from ..models.mesh import NodeField
from ..utils.logger import get_logger, log_error

logger = get_logger(__name__)

DISTRIBUTION_FIELDS = ["sample_id", "xi", "dD_H1", "dSigma_L2", "dS_L2", "rejected"]
STABILITY_FIELDS = ["sweep", "level", "E_S"]
BOUND_FIELDS = ["sample_id", "lhs", "rhs", "holds"]


def _fmt(value: Any) -> Any:
    """Shortest round-trip text for floats so reruns are byte-identical"""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def write_csv(path: Path, fieldnames: List[str], rows: Iterable[Dict[str, Any]]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def distribution_rows(samples: List[UqSample]) -> List[Dict[str, Any]]:
    return [
        {
            "sample_id": s.sample_id,
            "xi": s.xi,
            "dD_H1": s.dD_H1,
            "dSigma_L2": s.dSigma_L2,
            "dS_L2": s.dS_L2,
            "rejected": s.rejected,
        }
        for s in samples
    ]


def bound_rows(checks: List[BoundCheck]) -> List[Dict[str, Any]]:
    return [{"sample_id": c.sample_id, "lhs": c.lhs, "rhs": c.rhs, "holds": c.holds} for c in checks]


class ReportService:
    """Writes every artifact of a run into one output directory"""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[str] = []

    def _path(self, name: str) -> Path:
        self.written.append(name)
        return self.out_dir / name

    def write_ensemble(self, report: EnsembleReport):
        """distribution.csv, stability.csv, bound.csv and mean_reconstruction.txt"""
        write_csv(self._path("distribution.csv"), DISTRIBUTION_FIELDS, distribution_rows(report.distribution.samples))
        write_csv(self._path("stability.csv"), STABILITY_FIELDS, report.stability_rows)
        write_csv(self._path("bound.csv"), BOUND_FIELDS, bound_rows(report.bound_checks))
        self.write_field("mean_reconstruction.txt", report.mean_source)
        logger.info(f"✓ Ensemble tables written to {self.out_dir}")

    def write_field(self, name: str, field: NodeField) -> Path:
        path = self._path(name)
        field.save_txt(path)
        return path

    def write_manifest(self, manifest) -> Path:
        path = self._path("manifest.json")
        path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path

    def write_plots(self, report: EnsembleReport):
        """distribution.svg and stability.svg; skipped with a warning when matplotlib is missing"""
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            logger.warning("matplotlib not available - skipping figures")
            return

        try:
            samples = [s for s in report.distribution.samples if not s.failed]
            fig, axes = plt.subplots(1, 2, figsize=(10, 4))
            axes[0].scatter([s.dD_H1 for s in samples], [s.dS_L2 for s in samples], s=8)
            axes[0].set_xlabel(r"$\|\Delta D\|_{H^1}$")
            axes[0].set_ylabel(r"$\|\Delta S\|_{L^2}$")
            axes[1].scatter([s.dSigma_L2 for s in samples], [s.dS_L2 for s in samples], s=8, color="tab:orange")
            axes[1].set_xlabel(r"$\|\Delta \sigma_a\|_{L^2}$")
            fig.tight_layout()
            fig.savefig(self._path("distribution.svg"), format="svg")
            plt.close(fig)

            fig, ax = plt.subplots(figsize=(5, 4))
            for sweep in ("D", "sigma", "joint"):
                rows = [r for r in report.stability_rows if r["sweep"] == sweep]
                if rows:
                    ax.plot([100 * r["level"] for r in rows], [r["E_S"] for r in rows], marker="o", label=sweep)
            ax.set_xlabel("relative uncertainty level (%)")
            ax.set_ylabel(r"$\mathcal{E}_S$")
            ax.legend()
            fig.tight_layout()
            fig.savefig(self._path("stability.svg"), format="svg")
            plt.close(fig)
        except Exception as e:
            log_error(e, "write_plots")
            raise
