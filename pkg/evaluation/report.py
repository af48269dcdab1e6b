"""Dataset evaluation and the metrics CSV."""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np

from data_pipeline.types import LabeledSample
from evaluation.inference import derain
from evaluation.metrics import psnr, ssim
from networks.model import SemiDRDNet, count_parameters
from utils.artifacts import write_csv_artifact

logger = logging.getLogger(__name__)

METRICS_FIELDS = ("name", "psnr", "ssim", "rainy_psnr", "rainy_ssim", "seconds")
MEAN_ROW = "mean"


@dataclass
class ImageMetrics:
    name: str
    psnr: float
    ssim: float
    rainy_psnr: float
    rainy_ssim: float
    seconds: float


@dataclass
class MetricsReport:
    images: List[ImageMetrics] = field(default_factory=list)
    parameters: int = 0

    def mean(self) -> ImageMetrics:
        if not self.images:
            nan = float("nan")
            return ImageMetrics(MEAN_ROW, nan, nan, nan, nan, nan)
        columns = {key: float(np.mean([getattr(m, key) for m in self.images])) for key in METRICS_FIELDS[1:]}
        return ImageMetrics(name=MEAN_ROW, **columns)

    def rows(self) -> List[dict]:
        """One row per image, ordered by name, then the mean row."""
        return [asdict(m) for m in self.images] + [asdict(self.mean())]


def evaluate(model: SemiDRDNet, dataset: Sequence[LabeledSample]) -> MetricsReport:
    """
    Derains every rainy image and scores it against its clean image. The
    rainy input is scored too, as the no-op baseline.
    """
    report = MetricsReport(parameters=count_parameters(model))
    for index, sample in sorted(enumerate(dataset), key=lambda item: (item[1].name, item[0])):
        started = time.perf_counter()
        output = derain(sample.rainy, model)
        seconds = time.perf_counter() - started
        report.images.append(ImageMetrics(
            name=sample.name or f"image-{index:04d}",
            psnr=psnr(output, sample.clean),
            ssim=ssim(output, sample.clean),
            rainy_psnr=psnr(sample.rainy, sample.clean),
            rainy_ssim=ssim(sample.rainy, sample.clean),
            seconds=seconds,
        ))
    mean = report.mean()
    logger.info("Evaluated %d image(s): PSNR %.3f dB (rainy %.3f), SSIM %.4f (rainy %.4f), %.4f s/image, %d parameters",
                len(report.images), mean.psnr, mean.rainy_psnr, mean.ssim, mean.rainy_ssim, mean.seconds,
                report.parameters)
    return report


def write_metrics_csv(report: MetricsReport, path: Union[str, Path]) -> Path:
    return write_csv_artifact(METRICS_FIELDS, report.rows(), path)
