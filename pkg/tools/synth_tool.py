"""
Dataset tool.

run_synth writes `count` labeled (rainy, clean) pairs and `unlabeled` rainy
images with a wider, real-like streak distribution, plus a manifest.json
that points at all of them. Output is a pure function of the arguments.

run_ingest writes only a manifest.json for folders of existing images.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from data_pipeline.image_io import save_png
from data_pipeline.manifest import Manifest, build_manifest, write_manifest
from data_pipeline.synthesis import (
    composite,
    random_streak_params,
    synthesize_background,
    synthesize_streaks,
)
from utils.errors import InvalidArgumentError, SemiDRDError, error_result

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def run_synth(out: str, count: int = 8, unlabeled: Optional[int] = None, size: int = 64,
              seed: int = 1) -> Dict[str, Any]:
    """
    Generate a synthetic dataset.

    Args:
        out: Output directory.
        count: Number of labeled pairs.
        unlabeled: Number of unlabeled rainy images (defaults to count).
        size: Square image side, >= 16.
        seed: Dataset seed.

    Returns:
        Dict with success status, the manifest path and image counts.
    """
    try:
        unlabeled = count if unlabeled is None else unlabeled
        if count < 0 or unlabeled < 0:
            raise InvalidArgumentError("image counts must be >= 0")
        root = Path(out)
        rng = np.random.default_rng(seed)
        manifest = Manifest()
        shape = (size, size)

        for i in range(count):
            clean = synthesize_background(shape, int(rng.integers(0, 2 ** 63)))
            streaks = synthesize_streaks(shape, random_streak_params(rng))
            rainy_path = save_png(composite(clean, streaks), root / "labeled" / "rainy" / f"{i:04d}.png")
            clean_path = save_png(clean, root / "labeled" / "clean" / f"{i:04d}.png")
            manifest.labeled.append((rainy_path, clean_path))

        for i in range(unlabeled):
            clean = synthesize_background(shape, int(rng.integers(0, 2 ** 63)))
            streaks = synthesize_streaks(shape, random_streak_params(rng, real_like=True))
            manifest.unlabeled.append(save_png(composite(clean, streaks), root / "unlabeled" / f"{i:04d}.png"))

        manifest_path = write_manifest(manifest, root / MANIFEST_NAME)
        logger.info("Wrote %d labeled pairs and %d unlabeled images to %s", count, unlabeled, root)
        return {"success": True, "manifest": str(manifest_path), "labeled": count, "unlabeled": unlabeled}
    except SemiDRDError as e:
        return error_result(e)


def run_ingest(out: str, rainy_dir: Optional[str] = None, clean_dir: Optional[str] = None,
               unlabeled_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    Index user-supplied images into a manifest.

    Args:
        out: Directory receiving manifest.json.
        rainy_dir / clean_dir: Labeled pairs, matched by file name.
        unlabeled_dir: Unpaired rainy images.

    Returns:
        Dict with success status, the manifest path and image counts.
    """
    try:
        if rainy_dir is None and unlabeled_dir is None:
            raise InvalidArgumentError("nothing to ingest: give labeled and/or unlabeled directories")
        manifest = build_manifest(rainy_dir, clean_dir, unlabeled_dir)
        if not manifest.labeled and not manifest.unlabeled:
            raise InvalidArgumentError("the given directories hold no usable images")
        manifest_path = write_manifest(manifest, Path(out) / MANIFEST_NAME)
        logger.info("Indexed %d labeled pairs and %d unlabeled images", len(manifest.labeled),
                    len(manifest.unlabeled))
        return {"success": True, "manifest": str(manifest_path), "labeled": len(manifest.labeled),
                "unlabeled": len(manifest.unlabeled)}
    except SemiDRDError as e:
        return error_result(e)
