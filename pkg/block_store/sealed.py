"""
Encrypted views over device regions.

Metadata regions store the IV inline, leaving ``B - 16`` bytes of payload per
block. Data blocks use the full block for ciphertext; their IVs live in the
reverse-mapping (RMA) records, which are mirrored in memory and written
through under the public key.

A view whose key is ``None`` writes fresh random bytes instead of sealing.
That is how a device without a hidden volume touches hidden regions.
"""

import struct
from typing import List, Optional

from crypto_env import IV_SIZE, RandomSource, SealedBlock, VolumeKey, seal, unseal
from exceptions import ValidationError
from models.device import RMA_RECORD_SIZE, Region
from .store import BlockStore

NULL_INDEX = 0xFFFF_FFFF_FFFF_FFFF

_RECORD = struct.Struct("<Q16s")


class SealedRegion:
    """Region of inline-IV metadata blocks sealed with one key."""

    def __init__(
        self,
        store: BlockStore,
        region: Region,
        key: Optional[VolumeKey],
        rng: RandomSource,
    ):
        self.store = store
        self.region = region
        self.key = key
        self.rng = rng
        self.span = store.geometry.span(region)
        self.payload_size = store.block_size - IV_SIZE

    def __len__(self) -> int:
        return self.span.length

    def write(self, offset: int, payload: bytes) -> None:
        if len(payload) > self.payload_size:
            raise ValidationError(
                f"{self.region.value} payload exceeds {self.payload_size} bytes"
            )
        if self.key is None:
            self.refill(offset)
            return
        padded = payload + b"\x00" * (self.payload_size - len(payload))
        sealed = seal(self.key, padded, self.rng)
        self.store.write_region(self.region, offset, sealed.to_bytes())

    def read(self, offset: int) -> bytes:
        raw = self.store.read_region(self.region, offset)
        if self.key is None:
            return raw[IV_SIZE:]
        return unseal(self.key, SealedBlock.from_bytes(raw))

    def reencrypt(self, offset: int) -> None:
        if self.key is None:
            self.refill(offset)
        else:
            self.write(offset, self.read(offset))

    def refill(self, offset: int) -> None:
        self.store.write_region(self.region, offset, self.rng.bytes(self.store.block_size))


class DataRegion:
    """Data-region blocks with IVs and FMA back-pointers kept in RMA records."""

    def __init__(self, store: BlockStore, rng: RandomSource, rma_key: Optional[VolumeKey]):
        geometry = store.geometry
        self.store = store
        self.rng = rng
        self.n_blocks = geometry.n_blocks
        self.block_size = geometry.block_size
        self.per_block = geometry.rma_records_per_block
        self.ivs: List[bytes] = [b"\x00" * IV_SIZE] * self.n_blocks
        self.fma_index: List[int] = [NULL_INDEX] * self.n_blocks
        self._rma = SealedRegion(store, Region.PFL_RMA, rma_key, rng)
        self.write_through = True

    @classmethod
    def load(cls, store: BlockStore, rng: RandomSource, rma_key: VolumeKey) -> "DataRegion":
        region = cls(store, rng, rma_key)
        for block in range(len(region._rma)):
            payload = region._rma.read(block)
            first = block * region.per_block
            for i in range(min(region.per_block, region.n_blocks - first)):
                index, iv = _RECORD.unpack_from(payload, i * RMA_RECORD_SIZE)
                region.fma_index[first + i] = index
                region.ivs[first + i] = iv
        return region

    def _check(self, address: int) -> None:
        if not 0 <= address < self.n_blocks:
            raise ValidationError(f"Data address {address} out of range")

    # --- block content ---

    def write(self, address: int, key: Optional[VolumeKey], plaintext: bytes) -> None:
        self._check(address)
        if key is None:
            self.refill(address)
            return
        sealed = seal(key, plaintext, self.rng, size=self.block_size)
        self.store.write_region(Region.DATA, address, sealed.ciphertext)
        self.ivs[address] = sealed.iv
        self._persist(address)

    def read(self, address: int, key: VolumeKey) -> bytes:
        self._check(address)
        raw = self.store.read_region(Region.DATA, address)
        return unseal(key, SealedBlock(iv=self.ivs[address], ciphertext=raw))

    def reencrypt(self, address: int, key: Optional[VolumeKey]) -> None:
        if key is None:
            self.refill(address)
        else:
            self.write(address, key, self.read(address, key))

    def refill(self, address: int) -> None:
        self._check(address)
        self.store.write_region(Region.DATA, address, self.rng.bytes(self.block_size))
        self.ivs[address] = self.rng.bytes(IV_SIZE)
        self._persist(address)

    # --- reverse mapping ---

    def set_fma_index(self, address: int, index: int) -> None:
        self.fma_index[address] = index
        self._persist(address)

    def record_block(self, address: int) -> int:
        return address // self.per_block

    def _encode(self, block: int) -> bytes:
        first = block * self.per_block
        last = min(first + self.per_block, self.n_blocks)
        return b"".join(
            _RECORD.pack(self.fma_index[a], self.ivs[a]) for a in range(first, last)
        )

    def _persist(self, address: int) -> None:
        if self.write_through:
            block = self.record_block(address)
            self._rma.write(block, self._encode(block))

    def flush_records(self) -> None:
        for block in range(len(self._rma)):
            self._rma.write(block, self._encode(block))
