"""
Sealed public header (block 1)
"""

import struct
from dataclasses import dataclass
from typing import Optional

PUBLIC_MAGIC = b"DLRP"
PUBLIC_VERSION = 1

_HEADER = struct.Struct("<4sIQQQ")


@dataclass
class PublicHeader:
    public_blocks: int
    fma_length: int
    mapped_count: int

    def encode(self) -> bytes:
        return _HEADER.pack(
            PUBLIC_MAGIC,
            PUBLIC_VERSION,
            self.public_blocks,
            self.fma_length,
            self.mapped_count,
        )

    @classmethod
    def decode(cls, payload: bytes) -> Optional["PublicHeader"]:
        """``None`` when the payload does not open (wrong public key)"""
        magic, version, public_blocks, fma_length, mapped_count = _HEADER.unpack_from(payload)
        if magic != PUBLIC_MAGIC or version != PUBLIC_VERSION:
            return None
        return cls(public_blocks, fma_length, mapped_count)
