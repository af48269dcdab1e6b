"""FIFO store of detached rain-layer estimates used to build negatives."""

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Deque, Dict, List, Optional, Union

import numpy as np
import torch

from utils.errors import EmptyBankError, InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 64


class RainOrigin(str, Enum):
    SYNTHETIC = "synthetic"
    REAL = "real"


@dataclass
class BankEntry:
    rain: torch.Tensor  # (3, H, W) on the CPU, no grad
    origin: RainOrigin


class MemoryBank:
    """
    Bounded bank of rain layers. Oldest entries are evicted first.

    Args:
        capacity: Maximum number of stored rain layers.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY) -> None:
        if capacity < 1:
            raise InvalidArgumentError(f"bank capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: Deque[BankEntry] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._entries)

    def count(self, origin: Optional[RainOrigin] = None) -> int:
        if origin is None:
            return len(self._entries)
        return sum(1 for e in self._entries if e.origin == RainOrigin(origin))

    def entries(self) -> List[BankEntry]:
        return list(self._entries)

    def push(self, rain: torch.Tensor, origin: Union[RainOrigin, str]) -> None:
        """Stores a detached copy of one (3, H, W) rain layer or of every item of an (N, 3, H, W) batch."""
        origin = RainOrigin(origin)
        rain = rain.detach()
        if rain.dim() == 3:
            rain = rain.unsqueeze(0)
        if rain.dim() != 4 or rain.shape[1] != 3:
            raise InvalidArgumentError(f"rain layer must be (3, H, W) or (N, 3, H, W), got {tuple(rain.shape)}")
        if not torch.isfinite(rain).all():
            raise InvalidArgumentError("rain layer contains non-finite values")
        for item in rain:
            self._entries.append(BankEntry(item.to("cpu", torch.float32).clone(), origin))

    def sample(self, m: int, origin: Optional[Union[RainOrigin, str]] = None,
               seed: Union[int, np.random.Generator] = 0) -> List[torch.Tensor]:
        """
        Draws `m` rain layers uniformly with replacement.

        Args:
            m: Number of layers.
            origin: Restrict to entries of this origin; None means any.
            seed: Seed or generator; equal seeds over equal contents give equal draws.

        Raises:
            EmptyBankError: No entry matches the filter.
        """
        if m < 0:
            raise InvalidArgumentError(f"sample count must be >= 0, got {m}")
        pool = self.entries() if origin is None else [e for e in self._entries if e.origin == RainOrigin(origin)]
        if not pool:
            what = "entries" if origin is None else f"{RainOrigin(origin).value} entries"
            raise EmptyBankError(f"memory bank holds no {what}")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return [pool[i].rain for i in rng.integers(len(pool), size=m)]

    def state(self) -> Dict[str, np.ndarray]:
        """Contents as named arrays for checkpointing, oldest first."""
        records = {}
        width = max(4, len(str(self.capacity - 1)))
        for index, entry in enumerate(self._entries):
            records[f"bank.{index:0{width}d}.{entry.origin.value}"] = entry.rain.numpy()
        return records

    def load_state(self, records: Dict[str, np.ndarray]) -> None:
        self._entries.clear()
        names = sorted((name for name in records if name.startswith("bank.")), key=lambda n: int(n.split(".")[1]))
        for name in names:
            origin = name.rsplit(".", 1)[1]
            rain = torch.from_numpy(np.array(records[name], dtype=np.float32))
            self._entries.append(BankEntry(rain, RainOrigin(origin)))
        logger.debug("Restored %d memory bank entries", len(self._entries))
