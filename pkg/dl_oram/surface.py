"""
Hidden-region surfaces.

Every hidden-side round touches one data block, one FBM column plus header,
one N-FBM column and (bitmap on disk) two bitmap blocks. ``LiveSurface``
performs those touches as reencryptions of real hidden metadata;
``ChaffSurface`` writes fresh random bytes at the same regions for a device
with no hidden volume. Simulated writes and public inserts are expressed
against this interface so both modes issue the same write pattern.
"""

import logging
from typing import Callable, Protocol, Sequence

from block_store import BlockStore, DataRegion, SealedRegion
from crypto_env import RandomSource, VolumeKey
from freemaps import Fbm, Nfbm, SlotBitmap
from models.device import Region
from .selection import BlockSampler

logger = logging.getLogger(__name__)


class HiddenSurface(Protocol):
    def touch_data(self, address: int) -> None: ...

    def touch_fbm(self) -> None: ...

    def touch_nfbm(self) -> int: ...

    def touch_bitmap(self, slot: int) -> None: ...

    def touch_root(self) -> None: ...


def simulate_rounds(
    surface: HiddenSurface, sampler: BlockSampler, rounds: int, rng: RandomSource
) -> None:
    """Write pattern of a hidden write from reencryptions alone"""
    for address in sampler.sample(rng, rounds):
        surface.touch_data(address)
        surface.touch_fbm()
        slot = surface.touch_nfbm()
        surface.touch_bitmap(slot)
    surface.touch_root()


class ChaffSurface:
    """Random refills over the hidden regions of a device without a hidden key"""

    def __init__(
        self,
        store: BlockStore,
        data: DataRegion,
        rng: RandomSource,
        bitmap_on_disk: bool = True,
    ):
        geometry = store.geometry
        self.store = store
        self.data = data
        self.rng = rng
        self.bitmap_on_disk = bitmap_on_disk
        self.n_slots = geometry.n_blocks
        self.root = SealedRegion(store, Region.ROOT_POINTER, None, rng)
        self.fbm_columns = SealedRegion(store, Region.FBM_COLUMNS, None, rng)
        self.fbm_header = SealedRegion(store, Region.FBM_HEADER, None, rng)
        self.nfbm_columns = SealedRegion(store, Region.NFBM_COLUMNS, None, rng)
        self.bitmap = SealedRegion(store, Region.BITMAP, None, rng)

    def touch_data(self, address: int) -> None:
        self.data.refill(address)

    def touch_fbm(self) -> None:
        self.fbm_columns.refill(self.rng.below(len(self.fbm_columns)))
        self.fbm_header.refill(0)

    def touch_nfbm(self) -> int:
        slot = self.rng.below(self.n_slots)
        self.nfbm_columns.refill(slot % len(self.nfbm_columns))
        return slot

    def touch_bitmap(self, slot: int) -> None:
        if not self.bitmap_on_disk:
            return
        parts = len(self.bitmap)
        self.bitmap.refill(self.rng.below(parts))
        self.bitmap.refill(self.rng.below(parts))

    def touch_root(self) -> None:
        self.root.refill(0)

    def fill_initial(self, addresses: Sequence[int]) -> None:
        """Format-time pass over every hidden block and the given data blocks"""
        self.root.refill(0)
        for column in range(len(self.fbm_columns)):
            self.fbm_columns.refill(column)
        self.fbm_header.refill(0)
        for column in range(len(self.nfbm_columns)):
            self.nfbm_columns.refill(column)
        self.flush_bitmap()
        for address in sorted(addresses):
            self.data.refill(address)

    def flush_bitmap(self) -> None:
        for offset in range(len(self.bitmap)):
            self.bitmap.refill(offset)

    def place_public(
        self,
        sampler: BlockSampler,
        rounds: int,
        write_public: Callable[[int], None],
    ) -> int:
        """Public data lands on one of ``rounds`` uniform free-list blocks"""
        addresses = sampler.sample(self.rng, rounds)
        target = self.rng.below(rounds)
        for i, address in enumerate(addresses):
            if i == target:
                write_public(address)
            else:
                self.touch_data(address)
            self.touch_fbm()
            self.touch_bitmap(self.touch_nfbm())
        return addresses[target]

    def rebalance(self) -> None:
        self.touch_fbm()
        self.touch_bitmap(self.touch_nfbm())


class LiveSurface:
    """Reencryptions of real hidden metadata under the hidden key"""

    def __init__(
        self,
        data: DataRegion,
        key: VolumeKey,
        fbm: Fbm,
        nfbm: Nfbm,
        bitmap: SlotBitmap,
        rng: RandomSource,
        write_root: Callable[[], None],
    ):
        self.data = data
        self.key = key
        self.fbm = fbm
        self.nfbm = nfbm
        self.bitmap = bitmap
        self.rng = rng
        self._write_root = write_root

    def touch_data(self, address: int) -> None:
        self.data.reencrypt(address, self.key)

    def touch_fbm(self) -> None:
        self.fbm.touch_random(self.rng)

    def touch_nfbm(self) -> int:
        return self.nfbm.touch_random(self.rng)

    def touch_bitmap(self, slot: int) -> None:
        self.bitmap.relocate(self.bitmap.part_of(slot), self.rng)

    def touch_root(self) -> None:
        self._write_root()
