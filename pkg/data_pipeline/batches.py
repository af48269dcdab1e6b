"""
Deterministic batch stream for the two training phases.

One call to make_batches yields one epoch: ceil(|labeled| / batch_size)
labeled batches, each followed by an unlabeled batch when semi-supervised
mode is on (L, U, L, U, ...). Pools smaller than a batch are cycled through
successive shuffles. Every unlabeled patch is paired with a crop of a clean
image drawn uniformly from the labeled pool.
"""

import math
from typing import Iterator, List, Sequence, Union

import numpy as np

from data_pipeline.patches import crop_patch, random_window
from data_pipeline.types import (
    LabeledBatch,
    LabeledSample,
    UnlabeledBatch,
    UnlabeledSample,
    images_to_tensor,
)
from utils.errors import ConfigurationError, InvalidArgumentError

Batch = Union[LabeledBatch, UnlabeledBatch]


def epoch_seed(seed: int, epoch: int) -> int:
    """Stream seed of one epoch, derived from the run seed."""
    return int(np.random.SeedSequence([int(seed), int(epoch)]).generate_state(1, dtype=np.uint64)[0])


def _index_cycle(rng: np.random.Generator, size: int) -> Iterator[int]:
    while True:
        for index in rng.permutation(size):
            yield int(index)


def _check_pool(images: Sequence[np.ndarray], patch: int, pool: str) -> None:
    for i, image in enumerate(images):
        height, width = image.shape[:2]
        if height < patch or width < patch:
            raise InvalidArgumentError(f"{pool} image {i} is {height}x{width}, smaller than patch {patch}")


def make_batches(labeled: List[LabeledSample], unlabeled: List[UnlabeledSample], batch_size: int,
                 patch: int, seed: int, semi_supervised: bool = True) -> Iterator[Batch]:
    """
    Yields one epoch of batches.

    Args:
        labeled: Paired samples.
        unlabeled: Unpaired rainy samples (ignored when semi_supervised is False).
        batch_size: Patches per batch, >= 1.
        patch: Square patch side.
        seed: Stream seed; equal seeds give identical streams.
        semi_supervised: Interleave unlabeled batches.

    Raises:
        InvalidArgumentError: batch_size < 1 or a patch larger than an image.
        ConfigurationError: a required pool is empty.
    """
    if batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be >= 1, got {batch_size}")
    if not labeled:
        raise ConfigurationError("the labeled pool is empty")
    if semi_supervised and not unlabeled:
        raise ConfigurationError("semi-supervised mode needs at least one unlabeled sample")
    _check_pool([s.rainy for s in labeled], patch, "labeled")
    if semi_supervised:
        _check_pool([s.rainy for s in unlabeled], patch, "unlabeled")

    rng = np.random.default_rng(seed)
    labeled_order = _index_cycle(rng, len(labeled))
    unlabeled_order = _index_cycle(rng, len(unlabeled)) if semi_supervised else None

    for _ in range(math.ceil(len(labeled) / batch_size)):
        rainy, clean, streaks, indices = [], [], [], []
        for _ in range(batch_size):
            index = next(labeled_order)
            sample = labeled[index]
            top, left = random_window(rng, sample.rainy.shape, patch)
            rainy.append(crop_patch(sample.rainy, top, left, patch))
            clean.append(crop_patch(sample.clean, top, left, patch))
            streaks.append(crop_patch(sample.streaks, top, left, patch))
            indices.append(index)
        yield LabeledBatch(
            rainy=images_to_tensor(rainy),
            clean=images_to_tensor(clean),
            streaks=images_to_tensor(streaks),
            indices=indices,
        )

        if not semi_supervised:
            continue
        rainy, pseudo, indices, clean_indices = [], [], [], []
        for _ in range(batch_size):
            index = next(unlabeled_order)
            sample = unlabeled[index]
            top, left = random_window(rng, sample.rainy.shape, patch)
            rainy.append(crop_patch(sample.rainy, top, left, patch))
            clean_index = int(rng.integers(len(labeled)))
            partner = labeled[clean_index].clean
            top, left = random_window(rng, partner.shape, patch)
            pseudo.append(crop_patch(partner, top, left, patch))
            indices.append(index)
            clean_indices.append(clean_index)
        yield UnlabeledBatch(
            rainy=images_to_tensor(rainy),
            pseudo_clean=images_to_tensor(pseudo),
            indices=indices,
            clean_indices=clean_indices,
        )
