"""Evaluation tool: PSNR/SSIM of a model over the labeled pairs of a manifest."""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from data_pipeline.manifest import load_manifest, load_pools
from evaluation.report import evaluate, write_metrics_csv
from tools.derain_tool import load_model
from utils.errors import ConfigurationError, SemiDRDError, error_result

logger = logging.getLogger(__name__)

METRICS_NAME = "metrics.csv"


def run_eval(manifest: str, out: str, checkpoint: Optional[str] = None, config: Optional[str] = None,
             preset: Optional[str] = None, overrides: Iterable[Tuple[str, str, str]] = ()) -> Dict[str, Any]:
    """
    Evaluate a model and write metrics.csv into `out`.

    Returns:
        Dict with success status, the CSV path and the mean metrics.
    """
    try:
        labeled, _ = load_pools(load_manifest(manifest))
        if not labeled:
            raise ConfigurationError(f"manifest {manifest} has no labeled pairs to evaluate")
        model = load_model(checkpoint, config, preset, overrides)
        report = evaluate(model, labeled)
        path = write_metrics_csv(report, Path(out) / METRICS_NAME)
        mean = report.mean()
        return {
            "success": True,
            "metrics": str(path),
            "images": len(report.images),
            "psnr": mean.psnr,
            "ssim": mean.ssim,
            "rainy_psnr": mean.rainy_psnr,
            "rainy_ssim": mean.rainy_ssim,
            "seconds": mean.seconds,
            "parameters": report.parameters,
        }
    except SemiDRDError as e:
        return error_result(e)
