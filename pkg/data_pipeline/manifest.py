"""
Dataset manifests.

A manifest is a JSON document listing labeled (rainy, clean) path pairs and
unlabeled rainy paths:

    {
      "version": 1,
      "labeled": [{"rainy": "labeled/rainy/0000.png", "clean": "labeled/clean/0000.png"}],
      "unlabeled": ["unlabeled/0000.png"]
    }

Relative paths are resolved against the manifest's directory.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

from data_pipeline.image_io import list_images, load_image
from data_pipeline.types import LabeledSample, UnlabeledSample
from utils.artifacts import write_text_artifact
from utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass
class Manifest:
    """Absolute paths of a dataset."""

    labeled: List[Tuple[Path, Path]] = field(default_factory=list)
    unlabeled: List[Path] = field(default_factory=list)


def _resolve(root: Path, value) -> Path:
    if not isinstance(value, str) or not value:
        raise ConfigurationError(f"manifest paths must be non-empty strings, got {value!r}")
    path = Path(value)
    return path if path.is_absolute() else (root / path).resolve()


def load_manifest(path: Union[str, Path]) -> Manifest:
    """
    Reads a manifest file.

    Raises:
        ConfigurationError: unreadable JSON, wrong version or malformed entries.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"cannot read manifest {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"manifest {path} is not valid JSON: {e}")
    if not isinstance(document, dict) or document.get("version") != MANIFEST_VERSION:
        raise ConfigurationError(f"manifest {path} must be a version {MANIFEST_VERSION} object")

    root = path.parent.resolve()
    manifest = Manifest()
    for entry in document.get("labeled", []):
        if not isinstance(entry, dict):
            raise ConfigurationError(f"labeled entries must be objects, got {entry!r}")
        manifest.labeled.append((_resolve(root, entry.get("rainy")), _resolve(root, entry.get("clean"))))
    for entry in document.get("unlabeled", []):
        manifest.unlabeled.append(_resolve(root, entry))
    return manifest


def write_manifest(manifest: Manifest, path: Union[str, Path]) -> Path:
    """Writes a manifest with paths relative to its own directory where possible."""
    path = Path(path)
    root = path.parent.resolve()

    def relative(p: Path) -> str:
        p = Path(p).resolve()
        try:
            return Path(os.path.relpath(p, root)).as_posix()
        except ValueError:
            return p.as_posix()

    document = {
        "version": MANIFEST_VERSION,
        "labeled": [{"rainy": relative(r), "clean": relative(c)} for r, c in manifest.labeled],
        "unlabeled": [relative(p) for p in manifest.unlabeled],
    }
    return write_text_artifact(json.dumps(document, indent=2) + "\n", path)


def build_manifest(rainy_dir: Optional[Union[str, Path]] = None,
                   clean_dir: Optional[Union[str, Path]] = None,
                   unlabeled_dir: Optional[Union[str, Path]] = None) -> Manifest:
    """
    Builds a manifest from folders of user-supplied images.

    Labeled pairs are matched by file name; rainy files without a clean
    partner are skipped with a warning.
    """
    manifest = Manifest()
    if (rainy_dir is None) != (clean_dir is None):
        raise ConfigurationError("labeled data needs both a rainy and a clean directory")
    if rainy_dir is not None:
        clean_by_name = {p.name: p for p in list_images(clean_dir)}
        for rainy in list_images(rainy_dir):
            partner = clean_by_name.get(rainy.name)
            if partner is None:
                logger.warning("No clean partner for %s, skipping", rainy)
                continue
            manifest.labeled.append((rainy.resolve(), partner.resolve()))
    if unlabeled_dir is not None:
        manifest.unlabeled = [p.resolve() for p in list_images(unlabeled_dir)]
    return manifest


def load_pools(manifest: Manifest) -> Tuple[List[LabeledSample], List[UnlabeledSample]]:
    """Loads every image a manifest names into training samples."""
    labeled = [
        LabeledSample.from_pair(load_image(rainy), load_image(clean), name=rainy.stem)
        for rainy, clean in manifest.labeled
    ]
    unlabeled = [UnlabeledSample(rainy=load_image(p), name=p.stem) for p in manifest.unlabeled]
    logger.info("Loaded %d labeled and %d unlabeled images", len(labeled), len(unlabeled))
    return labeled, unlabeled
