"""Final derained output for host-side images."""

import numpy as np
import torch

from data_pipeline.types import images_to_tensor, tensor_to_images, validate_image
from networks.model import SemiDRDNet
from networks.rain_residual import MIN_INPUT_SIDE
from training.checkpoint import Checkpoint
from utils.errors import CheckpointFormatError


def derain(rainy: np.ndarray, model: SemiDRDNet) -> np.ndarray:
    """
    clamp(O - f(O) + g(O), 0, 1) for one (H, W, 3) image.

    The model is switched to inference mode, so batch norm uses its running
    statistics. Images with a side below the networks' minimum are
    edge-padded for the forward pass and cropped back afterwards.
    """
    rainy = validate_image(rainy, "rainy")
    height, width = rainy.shape[:2]
    padded = np.pad(rainy, ((0, max(0, MIN_INPUT_SIDE - height)), (0, max(0, MIN_INPUT_SIDE - width)), (0, 0)),
                    mode="edge")
    model.eval()
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        output = model.derain(images_to_tensor([padded]).to(dtype))
    return tensor_to_images(output)[0][:height, :width]


def model_from_checkpoint(ck: Checkpoint) -> SemiDRDNet:
    """Rebuilds the trained model recorded in a checkpoint."""
    cfg = ck.config()
    model = SemiDRDNet.from_config(cfg.model, cfg.train.seed)
    try:
        model.load_state_dict(ck.model_state)
    except RuntimeError as e:
        raise CheckpointFormatError(f"checkpoint parameters do not fit its own config: {e}")
    return model.eval()
