"""
Free-slot bitmap of the N-FBM.

The bitmap is split into parts of one block each. ``positions[part]`` is the
bitmap-region offset currently holding that part. Relocating a part swaps it
with the occupant of a uniformly chosen offset and writes both, so the write
pattern never points at the part that changed.
"""

import logging
import math
from typing import List, Optional

import numpy as np

from block_store import SealedRegion
from crypto_env import RandomSource

logger = logging.getLogger(__name__)


class SlotBitmap:
    """One bit per N-FBM slot; set means free."""

    def __init__(
        self,
        n_slots: int,
        bits_per_part: int,
        region: Optional[SealedRegion] = None,
        positions: Optional[List[int]] = None,
        relocate_on_write: bool = True,
    ):
        self.n_slots = n_slots
        self.bits_per_part = bits_per_part
        self.parts = math.ceil(n_slots / bits_per_part)
        self.region = region
        self.relocate_on_write = relocate_on_write
        self.bits = np.ones(n_slots, dtype=np.uint8)
        self.positions = list(positions) if positions is not None else list(range(self.parts))
        if sorted(self.positions) != list(range(self.parts)):
            raise ValueError("Bitmap positions must be a permutation of the parts")
        self._occupant = [0] * self.parts
        for part, offset in enumerate(self.positions):
            self._occupant[offset] = part

    @classmethod
    def load(
        cls,
        n_slots: int,
        bits_per_part: int,
        region: SealedRegion,
        positions: List[int],
        relocate_on_write: bool = True,
    ) -> "SlotBitmap":
        bitmap = cls(n_slots, bits_per_part, region, positions, relocate_on_write)
        for part, offset in enumerate(bitmap.positions):
            start, stop = bitmap._bounds(part)
            raw = np.frombuffer(region.read(offset), dtype=np.uint8)
            bitmap.bits[start:stop] = np.unpackbits(raw, bitorder="little")[: stop - start]
        return bitmap

    def _bounds(self, part: int):
        start = part * self.bits_per_part
        return start, min(start + self.bits_per_part, self.n_slots)

    # --- bits ---

    def is_free(self, slot: int) -> bool:
        return bool(self.bits[slot])

    def set_free(self, slot: int) -> None:
        self.bits[slot] = 1

    def set_occupied(self, slot: int) -> None:
        self.bits[slot] = 0

    @property
    def free_count(self) -> int:
        return int(self.bits.sum())

    @property
    def occupied_count(self) -> int:
        return self.n_slots - self.free_count

    def part_of(self, slot: int) -> int:
        return slot // self.bits_per_part

    # --- persistence ---

    def encode_part(self, part: int) -> bytes:
        start, stop = self._bounds(part)
        return np.packbits(self.bits[start:stop], bitorder="little").tobytes()

    def shuffle_positions(self, rng: RandomSource) -> None:
        rng.shuffle(self.positions)
        for part, offset in enumerate(self.positions):
            self._occupant[offset] = part

    def relocate(self, part: int, rng: RandomSource) -> None:
        """Swap ``part`` with a random offset's occupant; two block writes"""
        if self.region is None or not self.relocate_on_write:
            return
        target = rng.below(self.parts)
        source = self.positions[part]
        other = self._occupant[target]
        self.positions[part], self.positions[other] = target, source
        self._occupant[target], self._occupant[source] = part, other
        self.region.write(source, self.encode_part(other))
        self.region.write(target, self.encode_part(part))

    def flush_all(self) -> None:
        if self.region is None:
            return
        for part, offset in enumerate(self.positions):
            self.region.write(offset, self.encode_part(part))
