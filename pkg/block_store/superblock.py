"""
Plaintext superblock codec.

The superblock carries only what is needed to find the regions and derive
keys. It is byte-for-byte the same kind of record whether or not a hidden
volume exists.
"""

import struct
from dataclasses import dataclass, field

from exceptions import CorruptDeviceError
from models.device import DeviceGeometry, KdfParams, Layout, Region

MAGIC = b"DLR1"
VERSION = 1
# Fits in the smallest supported block, so it can be read before B is known
HEAD_READ_SIZE = 512

_HEAD = struct.Struct("<4sIQIIBQ16sIIIIII")
_SPAN = struct.Struct("<BQQ")
_REGIONS = list(Region)
_LAYOUTS = list(Layout)


@dataclass(frozen=True)
class Superblock:
    geometry: DeviceGeometry
    salt: bytes = b"\x00" * 16
    kdf: KdfParams = field(default_factory=KdfParams)
    version: int = VERSION

    def encode(self) -> bytes:
        g = self.geometry
        spans = g.regions
        head = _HEAD.pack(
            MAGIC,
            self.version,
            g.n_blocks,
            g.block_size,
            g.addr_size,
            _LAYOUTS.index(g.layout),
            g.public_blocks,
            self.salt,
            self.kdf.time_cost,
            self.kdf.memory_cost,
            self.kdf.parallelism,
            g.stash_region_blocks,
            g.stash_capacity,
            len(spans),
        )
        body = b"".join(
            _SPAN.pack(_REGIONS.index(span.region), span.start, span.length)
            for span in spans
        )
        raw = head + body
        return raw + b"\x00" * (g.block_size - len(raw))

    @classmethod
    def decode(cls, raw: bytes) -> "Superblock":
        if len(raw) < _HEAD.size or raw[:4] != MAGIC:
            raise CorruptDeviceError("Not a DataLair device", structure="superblock")
        (
            _magic,
            version,
            n_blocks,
            block_size,
            addr_size,
            layout,
            public_blocks,
            salt,
            time_cost,
            memory_cost,
            parallelism,
            stash_region_blocks,
            stash_capacity,
            span_count,
        ) = _HEAD.unpack_from(raw)
        try:
            geometry = DeviceGeometry(
                n_blocks=n_blocks,
                block_size=block_size,
                addr_size=addr_size,
                layout=_LAYOUTS[layout],
                public_blocks=public_blocks,
                stash_region_blocks=stash_region_blocks,
                stash_capacity=stash_capacity,
            )
            kdf = KdfParams(
                time_cost=time_cost, memory_cost=memory_cost, parallelism=parallelism
            )
        except (ValueError, IndexError) as exc:
            raise CorruptDeviceError(
                "Superblock fields are inconsistent", structure="superblock"
            ) from exc

        if span_count != len(geometry.regions):
            raise CorruptDeviceError("Region table size mismatch", structure="superblock")
        for i, expected in enumerate(geometry.regions):
            tag, start, length = _SPAN.unpack_from(raw, _HEAD.size + i * _SPAN.size)
            if (tag, start, length) != (
                _REGIONS.index(expected.region),
                expected.start,
                expected.length,
            ):
                raise CorruptDeviceError(
                    "Region table disagrees with geometry", structure="superblock"
                )
        return cls(geometry=geometry, salt=salt, kdf=kdf, version=version)
