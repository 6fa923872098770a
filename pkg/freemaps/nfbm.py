"""
Non-free-block matrix (N-FBM): addresses of hidden-occupied blocks.

Slots are filled at random coordinates; the bitmap says which slots hold a
live address. A freed slot keeps its stale bytes and is simply ignored.
"""

import logging
from typing import Dict, List, Optional, Tuple

from block_store import IoCounters, SealedRegion
from crypto_env import RandomSource
from exceptions import DoubleFreeError, EmptyMatrixError, InvariantViolationError
from .bitmap import SlotBitmap
from .indexed_set import IndexedSet
from .layout import NULL_ADDRESS, MatrixLayout, NfbmCoord

logger = logging.getLogger(__name__)


class Nfbm:
    def __init__(
        self,
        layout: MatrixLayout,
        bitmap: SlotBitmap,
        slots: Optional[List[int]] = None,
        columns: Optional[SealedRegion] = None,
    ):
        self.layout = layout
        self.bitmap = bitmap
        self.slots = slots if slots is not None else [NULL_ADDRESS] * layout.n_slots
        self.columns = columns
        self.stats = IoCounters()
        self.occupied: IndexedSet[int] = IndexedSet(
            s for s in range(layout.n_slots) if not bitmap.is_free(s)
        )
        self._where: Dict[int, int] = {self.slots[s]: s for s in self.occupied}

    @classmethod
    def load(
        cls, layout: MatrixLayout, columns: SealedRegion, bitmap: SlotBitmap
    ) -> "Nfbm":
        slots = [NULL_ADDRESS] * layout.n_slots
        for column in range(layout.columns):
            layout.decode_column(columns.read(column), column, slots)
        return cls(layout, bitmap, slots, columns)

    # --- queries ---

    @property
    def occupied_count(self) -> int:
        return len(self.occupied)

    def __contains__(self, address: int) -> bool:
        return address in self._where

    def slot_of(self, address: int) -> Optional[int]:
        return self._where.get(address)

    def address_at(self, slot: int) -> int:
        return self.slots[slot]

    def occupied_addresses(self) -> List[int]:
        return [self.slots[s] for s in self.occupied]

    def coord(self, slot: int) -> NfbmCoord:
        return self.layout.coord(slot)

    # --- insertion ---

    def draw_slot(self, rng: RandomSource) -> Tuple[int, bool]:
        """One uniformly random slot and whether the bitmap marks it free"""
        slot = rng.below(self.layout.n_slots)
        self.stats.reads += 1
        return slot, self.bitmap.is_free(slot)

    def claim(self, slot: int, address: int) -> None:
        """Store ``address`` in a free slot and persist its column."""
        if not self.bitmap.is_free(slot):
            raise InvariantViolationError("nfbm_claim_free_slot", {"slot": slot})
        if address in self._where:
            raise InvariantViolationError("nfbm_address_unique", {"address": address})
        self.slots[slot] = address
        self.bitmap.set_occupied(slot)
        self.occupied.add(slot)
        self._where[address] = slot
        self.touch_slot(slot)

    def add(self, address: int, rng: RandomSource) -> Optional[NfbmCoord]:
        """One slot draw. On a free slot the address is stored; otherwise the
        drawn column is reencrypted and ``None`` tells the caller to stash."""
        slot, free = self.draw_slot(rng)
        if free:
            self.claim(slot, address)
            return self.layout.coord(slot)
        self.touch_slot(slot)
        return None

    def add_with_retry(self, address: int, rng: RandomSource) -> int:
        """Draw slots until a free one turns up. Draws are reads only."""
        if self.occupied_count >= self.layout.n_slots:
            raise EmptyMatrixError("nfbm")
        while True:
            slot, free = self.draw_slot(rng)
            if free:
                self.claim(slot, address)
                return slot

    # --- sampling and removal ---

    def sample_occupied(self, rng: RandomSource, count: int) -> List[Tuple[int, int]]:
        """``count`` distinct occupied (slot, address) pairs"""
        if count > self.occupied_count:
            raise EmptyMatrixError("nfbm")
        picked = self.occupied.sample(rng, count)
        self.stats.reads += count
        return [(slot, self.slots[slot]) for slot in picked]

    def mark_free(self, slot: int) -> None:
        """Flip ``slot`` free in memory only.

        The on-disk bitmap part catches up when that part is next relocated or
        at unmount, so the bitmap region is consistent only after ``flush_all``.
        """
        if self.bitmap.is_free(slot):
            raise DoubleFreeError(slot)
        self.bitmap.set_free(slot)
        self.occupied.remove(slot)
        address = self.slots[slot]
        if self._where.get(address) == slot:
            del self._where[address]

    # --- persistence ---

    def touch_slot(self, slot: int) -> None:
        """Rewrite (reencrypt) the column holding ``slot``."""
        if self.columns is None:
            return
        column = self.layout.column_of(slot)
        self.columns.write(column, self.layout.encode_column(self.slots, column))
        self.stats.writes += 1

    def touch_random(self, rng: RandomSource) -> int:
        slot = rng.below(self.layout.n_slots)
        self.touch_slot(slot)
        return slot

    def attach(self, columns: SealedRegion) -> None:
        self.columns = columns

    def flush_all(self) -> None:
        if self.columns is None:
            return
        for column in range(self.layout.columns):
            self.columns.write(column, self.layout.encode_column(self.slots, column))
