"""
Checkpoint files.

A checkpoint is a tensor-record file (see utils/tensor_records.py) whose
metadata block carries the format version, config hash and text, epoch,
step, encoder reference and optimizer hyperparameters, and whose records
hold the model state (parameters and buffers), Adam moments, the torch RNG
state and optionally the memory bank.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import torch

from training.config import TrainConfig
from utils.config_loader import parse_config_text
from utils.errors import CheckpointFormatError
from utils.tensor_records import decode_records, read_records, write_records

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SDRDCKPT"
CHECKPOINT_VERSION = 1

_MODEL = "model."
_OPTIM = "optim."
_RNG = "rng.torch"


@dataclass
class Checkpoint:
    model_state: Dict[str, torch.Tensor]
    optimizer_state: Dict[str, Any]
    epoch: int
    step: int
    rng_state: torch.Tensor
    config_text: str = ""
    config_hash: str = ""
    encoder: Dict[str, Any] = field(default_factory=dict)
    bank: Optional[Dict[str, np.ndarray]] = None

    def config(self) -> TrainConfig:
        """The TrainConfig this checkpoint was trained with."""
        return TrainConfig.from_raw(parse_config_text(self.config_text, source="checkpoint"))


def _to_array(tensor: torch.Tensor) -> np.ndarray:
    tensor = tensor.detach().cpu()
    if tensor.is_floating_point():
        tensor = tensor.to(torch.float32)
    return tensor.numpy()


def checkpoint_records(ck: Checkpoint) -> Dict[str, np.ndarray]:
    records = {f"{_MODEL}{name}": _to_array(t) for name, t in ck.model_state.items()}
    for index, slots in ck.optimizer_state.get("state", {}).items():
        for key, value in slots.items():
            records[f"{_OPTIM}{index}.{key}"] = _to_array(torch.as_tensor(value))
    records[_RNG] = _to_array(ck.rng_state)
    records.update(ck.bank or {})
    return records


def save_checkpoint(ck: Checkpoint, path: Union[str, Path]) -> Path:
    """Writes `ck` atomically to `path`."""
    metadata = {
        "epoch": ck.epoch,
        "step": ck.step,
        "config_hash": ck.config_hash,
        "config_text": ck.config_text,
        "encoder": ck.encoder,
        "param_groups": ck.optimizer_state.get("param_groups", []),
        "has_bank": ck.bank is not None,
    }
    path = write_records(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, metadata, checkpoint_records(ck))
    logger.debug("Wrote checkpoint %s (epoch %d, step %d)", path, ck.epoch, ck.step)
    return path


def _from_records(metadata: Dict[str, Any], records: Dict[str, np.ndarray], source: str) -> Checkpoint:
    try:
        model_state, optim_state, bank = {}, {}, {}
        for name, array in records.items():
            if name.startswith(_MODEL):
                model_state[name[len(_MODEL):]] = torch.from_numpy(array)
            elif name.startswith(_OPTIM):
                index, key = name[len(_OPTIM):].split(".", 1)
                optim_state.setdefault(int(index), {})[key] = torch.from_numpy(array)
            elif name.startswith("bank."):
                bank[name] = array
        return Checkpoint(
            model_state=model_state,
            optimizer_state={"state": optim_state, "param_groups": metadata["param_groups"]},
            epoch=int(metadata["epoch"]),
            step=int(metadata["step"]),
            rng_state=torch.from_numpy(records[_RNG]),
            config_text=metadata.get("config_text", ""),
            config_hash=metadata.get("config_hash", ""),
            encoder=metadata.get("encoder", {}),
            bank=bank if metadata.get("has_bank") else None,
        )
    except (KeyError, ValueError) as e:
        raise CheckpointFormatError(f"{source}: incomplete checkpoint ({e})")


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Reads a checkpoint.

    Raises:
        CheckpointFormatError: bad magic, other version, truncation or missing fields.
        ArtifactIOError: the file cannot be read.
    """
    metadata, records = read_records(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    return _from_records(metadata, records, str(path))


def checkpoint_from_bytes(data: bytes) -> Checkpoint:
    metadata, records = decode_records(data, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, source="<bytes>")
    return _from_records(metadata, records, "<bytes>")
