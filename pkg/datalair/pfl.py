"""
Public free list.

The forward mapping array (FMA) is a compact list of every data block that
holds no public data; its live length is kept in the public header. The
reverse records (RMA, owned by ``DataRegion``) point each block back at its
FMA index, so removing a specific block is O(1): the last entry moves into
the hole.
"""

import logging
import struct
from typing import List, Sequence

from block_store import NULL_INDEX, DataRegion, SealedRegion
from crypto_env import RandomSource
from exceptions import InvariantViolationError
from freemaps import NULL_ADDRESS
from models.device import DeviceGeometry

logger = logging.getLogger(__name__)


class Pfl:
    def __init__(
        self,
        geometry: DeviceGeometry,
        region: SealedRegion,
        data: DataRegion,
        fma: List[int],
    ):
        self.beta = geometry.beta
        self.region = region
        self.data = data
        self.fma = fma

    @classmethod
    def create(
        cls,
        geometry: DeviceGeometry,
        region: SealedRegion,
        data: DataRegion,
        addresses: Sequence[int],
    ) -> "Pfl":
        pfl = cls(geometry, region, data, list(addresses))
        for index, address in enumerate(pfl.fma):
            data.set_fma_index(address, index)
        return pfl

    @classmethod
    def load(
        cls,
        geometry: DeviceGeometry,
        region: SealedRegion,
        data: DataRegion,
        length: int,
    ) -> "Pfl":
        fma: List[int] = []
        for block in range(len(region)):
            fma.extend(struct.unpack_from(f"<{geometry.beta}Q", region.read(block)))
        return cls(geometry, region, data, fma[:length])

    # --- sampler interface ---

    def __len__(self) -> int:
        return len(self.fma)

    def __contains__(self, address: int) -> bool:
        return self.data.fma_index[address] != NULL_INDEX

    def sample(self, rng: RandomSource, count: int) -> List[int]:
        return [self.fma[i] for i in rng.sample(len(self.fma), count)]

    def addresses(self) -> List[int]:
        return list(self.fma)

    # --- mutation ---

    def remove(self, address: int) -> None:
        """Two FMA block writes and two RMA record writes, always"""
        index = self.data.fma_index[address]
        if index == NULL_INDEX or self.fma[index] != address:
            raise InvariantViolationError("pfl_bijection", {"address": address})
        last = len(self.fma) - 1
        moved = self.fma[last]
        self.fma[index] = moved
        self.fma.pop()
        self._write_block(index // self.beta)
        self._write_block(last // self.beta)
        self.data.set_fma_index(moved, index)
        self.data.set_fma_index(address, NULL_INDEX)

    def _write_block(self, block: int) -> None:
        values = self.fma[block * self.beta:(block + 1) * self.beta]
        values += [NULL_ADDRESS] * (self.beta - len(values))
        self.region.write(block, struct.pack(f"<{self.beta}Q", *values))

    def flush_all(self) -> None:
        for block in range(len(self.region)):
            self._write_block(block)
