"""
Training tool.

Builds the effective configuration (preset, file, environment, command-line
overrides), echoes it into the run directory, loads the manifest's pools and
runs the training engine. The run directory receives config.echo, loss.csv
and one ck-epoch-N checkpoint per epoch.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from data_pipeline.manifest import load_manifest, load_pools
from training.checkpoint import load_checkpoint, save_checkpoint
from training.config import load_train_config
from training.engine import checkpoint_name, train
from utils.artifacts import write_text_artifact
from utils.errors import SemiDRDError, error_result

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.echo"


def cli_overrides(overrides: Iterable[Tuple[str, str, str]] = (), epochs: Optional[int] = None,
                  seed: Optional[int] = None, supervised_only: bool = False) -> List[Tuple[str, str, str]]:
    """Dedicated flags expressed as (section, key, value) overrides, applied after --set."""
    merged = list(overrides)
    if epochs is not None:
        merged.append(("train", "epochs", str(epochs)))
    if seed is not None:
        merged.append(("train", "seed", str(seed)))
    if supervised_only:
        merged.append(("train", "lambda_unsup", "0"))
        merged.append(("data", "semi_supervised", "false"))
    return merged


def run_train(manifest: str, out: str, config: Optional[str] = None, preset: Optional[str] = None,
              overrides: Iterable[Tuple[str, str, str]] = (), epochs: Optional[int] = None,
              seed: Optional[int] = None, supervised_only: bool = False,
              resume: Optional[str] = None) -> Dict[str, Any]:
    """
    Train a model.

    Args:
        manifest: Dataset manifest (labeled and unlabeled pools).
        out: Run directory.
        config: INI config file.
        preset: Named preset applied beneath the config file.
        overrides: (section, key, value) triples from --set.
        epochs / seed: Shorthand overrides.
        supervised_only: Treat lambda_unsup as 0 and skip unlabeled batches.
        resume: Checkpoint to continue from.

    Returns:
        Dict with success status, the final checkpoint path and run counters.
    """
    try:
        cfg = load_train_config(config, preset=preset,
                                overrides=cli_overrides(overrides, epochs, seed, supervised_only))
        run_dir = Path(out)
        write_text_artifact(cfg.echo(), run_dir / CONFIG_ECHO)
        labeled, unlabeled = load_pools(load_manifest(manifest))
        start = load_checkpoint(resume) if resume else None
        final = train(cfg, labeled, unlabeled, run_dir=run_dir, resume=start)
        path = run_dir / checkpoint_name(final.epoch)
        if not path.exists():
            save_checkpoint(final, path)
        return {"success": True, "checkpoint": str(path), "epochs": final.epoch, "steps": final.step,
                "config_hash": cfg.config_hash()}
    except SemiDRDError as e:
        return error_result(e)
