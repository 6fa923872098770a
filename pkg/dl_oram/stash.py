"""
Bounded in-memory stash and its fixed on-disk region.

Region layout: ``stash_header_blocks`` sealed header blocks (magic, entry
count, bitmap positions, per-entry id/flags/IV), then one block per entry
holding its ciphertext, then random padding. Every save rewrites all blocks.
"""

import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional

from block_store import BlockStore, SealedRegion
from crypto_env import RandomSource, SealedBlock, VolumeKey, seal, unseal
from exceptions import StashOverflowError
from models.device import Region

logger = logging.getLogger(__name__)

STASH_MAGIC = b"DLRS"
STASH_VERSION = 1
FLAG_STALE = 0x01

_FIXED = struct.Struct("<4sHHII")
_ENTRY = struct.Struct("<QB16s")


@dataclass
class StashEntry:
    logical_id: int
    data: bytes
    stale: bool = False


class Stash:
    """FIFO of blocks waiting for a home. Rewriting an id keeps its place."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._entries: "OrderedDict[int, StashEntry]" = OrderedDict()
        self.high_water = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, logical_id: int) -> bool:
        return logical_id in self._entries

    def put(self, logical_id: int, data: bytes, stale: bool = False) -> None:
        entry = self._entries.get(logical_id)
        if entry is None:
            self._entries[logical_id] = StashEntry(logical_id, data, stale)
        else:
            entry.data = data
            entry.stale = entry.stale or stale
        self.high_water = max(self.high_water, len(self._entries))

    def mark_stale(self, logical_id: int) -> None:
        self._entries[logical_id].stale = True

    def get(self, logical_id: int) -> Optional[bytes]:
        entry = self._entries.get(logical_id)
        return entry.data if entry is not None else None

    def entry(self, logical_id: int) -> Optional[StashEntry]:
        return self._entries.get(logical_id)

    def remove(self, logical_id: int) -> None:
        del self._entries[logical_id]

    def entries(self) -> List[StashEntry]:
        return list(self._entries.values())

    @property
    def stale_count(self) -> int:
        return sum(1 for e in self._entries.values() if e.stale)

    @property
    def full(self) -> bool:
        return len(self._entries) >= self.capacity

    def check_capacity(self) -> None:
        if len(self._entries) > self.capacity:
            raise StashOverflowError(len(self._entries), self.capacity)


@dataclass
class StashState:
    entries: List[StashEntry]
    bitmap_positions: List[int]


class StashRegion:
    def __init__(self, store: BlockStore, rng: RandomSource):
        geometry = store.geometry
        self.store = store
        self.rng = rng
        self.block_size = geometry.block_size
        self.header_blocks = geometry.stash_header_blocks
        self.capacity = geometry.stash_capacity
        self.length = geometry.stash_region_blocks
        self.parts = geometry.bitmap_blocks

    def save(self, stash: Stash, bitmap_positions: List[int], key: VolumeKey) -> None:
        entries = stash.entries()
        if len(entries) > self.capacity:
            raise StashOverflowError(len(entries), self.capacity)
        sealed = [seal(key, e.data, self.rng, size=self.block_size) for e in entries]
        header = _FIXED.pack(STASH_MAGIC, STASH_VERSION, 0, len(entries), self.parts)
        header += struct.pack(f"<{self.parts}I", *bitmap_positions)
        header += b"".join(
            _ENTRY.pack(e.logical_id, FLAG_STALE if e.stale else 0, s.iv)
            for e, s in zip(entries, sealed)
        )
        meta = SealedRegion(self.store, Region.STASH, key, self.rng)
        step = meta.payload_size
        for block in range(self.header_blocks):
            meta.write(block, header[block * step:(block + 1) * step])
        for i, s in enumerate(sealed):
            self.store.write_region(Region.STASH, self.header_blocks + i, s.ciphertext)
        for block in range(self.header_blocks + len(sealed), self.length):
            self.store.write_region(Region.STASH, block, self.rng.bytes(self.block_size))

    def scramble(self) -> None:
        """Random bytes over the whole region; same writes as ``save``"""
        for block in range(self.length):
            self.store.write_region(Region.STASH, block, self.rng.bytes(self.block_size))

    def load(self, key: VolumeKey) -> Optional[StashState]:
        """Decoded stash, or ``None`` if the key does not open the header"""
        meta = SealedRegion(self.store, Region.STASH, key, self.rng)
        header = b"".join(meta.read(block) for block in range(self.header_blocks))
        magic, version, _flags, count, parts = _FIXED.unpack_from(header)
        if magic != STASH_MAGIC or version != STASH_VERSION:
            return None
        if parts != self.parts or count > self.capacity:
            return None
        offset = _FIXED.size
        positions = list(struct.unpack_from(f"<{parts}I", header, offset))
        offset += 4 * parts
        entries = []
        for i in range(count):
            logical_id, flags, iv = _ENTRY.unpack_from(header, offset + i * _ENTRY.size)
            raw = self.store.read_region(Region.STASH, self.header_blocks + i)
            data = unseal(key, SealedBlock(iv=iv, ciphertext=raw))
            entries.append(StashEntry(logical_id, data, bool(flags & FLAG_STALE)))
        return StashState(entries=entries, bitmap_positions=positions)
