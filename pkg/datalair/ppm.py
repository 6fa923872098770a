"""
Public position map: public logical id -> data-region address.

Pages of ``beta`` addresses, sealed with the public key. The map is public
data; it is what a coerced user hands over along with the public password.
"""

import struct
from typing import List, Optional

from block_store import SealedRegion
from exceptions import InvariantViolationError
from freemaps import NULL_ADDRESS
from models.device import DeviceGeometry


class Ppm:
    def __init__(
        self,
        geometry: DeviceGeometry,
        region: SealedRegion,
        entries: Optional[List[int]] = None,
    ):
        self.size = geometry.public_blocks
        self.beta = geometry.beta
        self.region = region
        self.entries = entries if entries is not None else [NULL_ADDRESS] * self.size
        self._mapped = {a for a in self.entries if a != NULL_ADDRESS}

    @classmethod
    def identity(cls, geometry: DeviceGeometry, region: SealedRegion) -> "Ppm":
        """Lite layout: public id i is pinned to data block i"""
        return cls(geometry, region, list(range(geometry.public_blocks)))

    @classmethod
    def load(cls, geometry: DeviceGeometry, region: SealedRegion) -> "Ppm":
        entries: List[int] = []
        for page in range(len(region)):
            entries.extend(cls._decode(region.read(page), geometry.beta))
        return cls(geometry, region, entries[: geometry.public_blocks])

    @staticmethod
    def _decode(payload: bytes, beta: int) -> List[int]:
        return list(struct.unpack_from(f"<{beta}Q", payload))

    def _encode(self, page: int) -> bytes:
        values = self.entries[page * self.beta:(page + 1) * self.beta]
        return struct.pack(f"<{len(values)}Q", *values)

    @property
    def mapped_count(self) -> int:
        return len(self._mapped)

    def __contains__(self, address: int) -> bool:
        return address in self._mapped

    def get(self, public_id: int) -> Optional[int]:
        address = self.entries[public_id]
        return None if address == NULL_ADDRESS else address

    def lookup(self, public_id: int) -> Optional[int]:
        """Like ``get`` but served from the on-disk page (one read)"""
        page = public_id // self.beta
        address = self._decode(self.region.read(page), self.beta)[public_id % self.beta]
        return None if address == NULL_ADDRESS else address

    def mapped_ids(self) -> List[int]:
        return [i for i, a in enumerate(self.entries) if a != NULL_ADDRESS]

    def mapped_addresses(self) -> List[int]:
        return sorted(self._mapped)

    def set(self, public_id: int, address: int) -> None:
        if address in self._mapped:
            raise InvariantViolationError("ppm_distinct", {"address": address})
        previous = self.entries[public_id]
        self._mapped.discard(previous)
        self.entries[public_id] = address
        self._mapped.add(address)
        page = public_id // self.beta
        self.region.write(page, self._encode(page))

    def flush_all(self) -> None:
        for page in range(len(self.region)):
            self.region.write(page, self._encode(page))
