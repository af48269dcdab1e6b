"""Derain tool: one output PNG per input image, same dimensions."""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple

from data_pipeline.image_io import list_images, load_image, save_png
from evaluation.inference import derain, model_from_checkpoint
from networks.model import SemiDRDNet
from training.checkpoint import load_checkpoint
from training.config import load_train_config
from utils.errors import InvalidArgumentError, SemiDRDError, error_result

logger = logging.getLogger(__name__)


def load_model(checkpoint: Optional[str] = None, config: Optional[str] = None, preset: Optional[str] = None,
               overrides: Iterable[Tuple[str, str, str]] = ()) -> SemiDRDNet:
    """
    The trained model of a checkpoint, or a freshly initialized model
    described by a config when no checkpoint is given.
    """
    if checkpoint:
        return model_from_checkpoint(load_checkpoint(checkpoint))
    cfg = load_train_config(config, preset=preset, overrides=overrides)
    logger.warning("No checkpoint given; using an untrained model")
    return SemiDRDNet.from_config(cfg.model, cfg.train.seed).eval()


def run_derain(inputs: str, out: str, checkpoint: Optional[str] = None, config: Optional[str] = None,
               preset: Optional[str] = None, overrides: Iterable[Tuple[str, str, str]] = ()) -> Dict[str, Any]:
    """
    Derain an image file or every image of a directory.

    Args:
        inputs: Image file or directory.
        out: Output directory; outputs keep the input stem with a .png suffix.
        checkpoint: Trained checkpoint.
        config / preset / overrides: Model description when no checkpoint is given.

    Returns:
        Dict with success status and the written paths.
    """
    try:
        source = Path(inputs)
        paths = list_images(source) if source.is_dir() else [source]
        if not paths:
            raise InvalidArgumentError(f"no images found in {source}")
        model = load_model(checkpoint, config, preset, overrides)
        written = []
        for path in paths:
            output = derain(load_image(path), model)
            written.append(str(save_png(output, Path(out) / f"{path.stem}.png")))
        logger.info("Derained %d image(s) into %s", len(written), out)
        return {"success": True, "outputs": written}
    except SemiDRDError as e:
        return error_result(e)
