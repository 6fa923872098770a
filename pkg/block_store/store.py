"""
File-backed block device with write tracing and snapshots
"""

import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from exceptions import (
    BlockRangeError,
    GeometryMismatchError,
    StorageIOError,
    TraceStateError,
    ValidationError,
)
from models.device import DeviceGeometry, Region
from .superblock import HEAD_READ_SIZE, Superblock
from .trace import Snapshot, TraceEntry, WriteTrace

logger = logging.getLogger(__name__)

_ZERO_CHUNK_BLOCKS = 256


@dataclass
class IoCounters:
    reads: int = 0
    writes: int = 0

    def reset(self) -> None:
        self.reads = 0
        self.writes = 0


class BlockStore:
    """
    Fixed array of equal-size blocks backed by one pre-allocated file.

    Every write lands in the open trace (if any) tagged with its region, so
    the recorded trace is the full set of blocks an observer could see change.
    """

    def __init__(self, path: Path, geometry: DeviceGeometry, fd: int):
        self.path = path
        self.geometry = geometry
        self.block_size = geometry.block_size
        self.total_blocks = geometry.total_blocks
        self._fd = fd
        self._trace: Optional[WriteTrace] = None
        self.stats = IoCounters()

    # --- lifecycle ---

    @classmethod
    def open_or_create(cls, path: Union[str, Path], geometry: DeviceGeometry) -> "BlockStore":
        """Open an existing device of this geometry, or create and zero-fill one."""
        path = Path(path)
        if path.exists():
            store = cls.open_existing(path)
            if store.geometry.signature() != geometry.signature():
                store.close()
                raise GeometryMismatchError(
                    "Existing device has a different geometry",
                    details={"path": str(path)},
                )
            return store

        try:
            fd = os.open(path, os.O_RDWR | os.O_CREAT | os.O_EXCL, 0o600)
        except OSError as exc:
            raise StorageIOError(operation="create") from exc
        store = cls(path, geometry, fd)
        store._zero_fill()
        store.write_superblock(Superblock(geometry=geometry))
        logger.info(
            f"Created device {path.name}: {geometry.total_blocks} blocks of {geometry.block_size} bytes",
            extra={"device": str(path), "event_type": "device_created"},
        )
        return store

    @classmethod
    def open_existing(cls, path: Union[str, Path]) -> "BlockStore":
        path = Path(path)
        try:
            fd = os.open(path, os.O_RDWR)
        except OSError as exc:
            raise StorageIOError(operation="open") from exc
        try:
            superblock = Superblock.decode(os.pread(fd, HEAD_READ_SIZE, 0))
            geometry = superblock.geometry
            size = os.fstat(fd).st_size
        except Exception:
            os.close(fd)
            raise
        if size != geometry.total_blocks * geometry.block_size:
            os.close(fd)
            raise GeometryMismatchError(
                "File size disagrees with superblock geometry",
                details={"size": size, "expected": geometry.total_blocks * geometry.block_size},
            )
        return cls(path, geometry, fd)

    def _zero_fill(self) -> None:
        chunk = b"\x00" * (self.block_size * _ZERO_CHUNK_BLOCKS)
        offset, end = 0, self.total_blocks * self.block_size
        try:
            while offset < end:
                piece = chunk[: min(len(chunk), end - offset)]
                os.pwrite(self._fd, piece, offset)
                offset += len(piece)
            os.fsync(self._fd)
        except OSError as exc:
            raise StorageIOError(operation="zero-fill") from exc

    def close(self) -> None:
        if self._fd >= 0:
            os.close(self._fd)
            self._fd = -1

    def __enter__(self) -> "BlockStore":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    # --- block I/O ---

    def _check(self, index: int) -> None:
        if not 0 <= index < self.total_blocks:
            raise BlockRangeError(index, self.total_blocks)

    def read_block(self, index: int) -> bytes:
        self._check(index)
        try:
            data = os.pread(self._fd, self.block_size, index * self.block_size)
        except OSError as exc:
            raise StorageIOError(operation="read") from exc
        self.stats.reads += 1
        if self._trace is not None:
            self._trace.reads.append(TraceEntry(index, self.geometry.region_of(index)))
        return data

    def write_block(self, index: int, data: bytes) -> None:
        self._check(index)
        if len(data) != self.block_size:
            raise ValidationError(
                f"Block writes must be {self.block_size} bytes, got {len(data)}"
            )
        try:
            os.pwrite(self._fd, data, index * self.block_size)
        except OSError as exc:
            raise StorageIOError(operation="write") from exc
        self.stats.writes += 1
        if self._trace is not None:
            self._trace.entries.append(TraceEntry(index, self.geometry.region_of(index)))

    def read_region(self, region: Region, offset: int) -> bytes:
        span = self.geometry.span(region)
        if not 0 <= offset < span.length:
            raise BlockRangeError(offset, span.length, details={"region": region.value})
        return self.read_block(span.start + offset)

    def write_region(self, region: Region, offset: int, data: bytes) -> None:
        span = self.geometry.span(region)
        if not 0 <= offset < span.length:
            raise BlockRangeError(offset, span.length, details={"region": region.value})
        self.write_block(span.start + offset, data)

    def read_superblock(self) -> Superblock:
        return Superblock.decode(self.read_block(0))

    def write_superblock(self, superblock: Superblock) -> None:
        self.write_block(0, superblock.encode())

    # --- observation ---

    def begin_trace(self, label: str) -> None:
        if self._trace is not None:
            raise TraceStateError(f"Trace '{self._trace.label}' is already open")
        self._trace = WriteTrace(label=label)

    def end_trace(self) -> WriteTrace:
        if self._trace is None:
            raise TraceStateError("No trace is open")
        trace, self._trace = self._trace, None
        return trace

    @property
    def tracing(self) -> bool:
        return self._trace is not None

    def snapshot(self) -> Snapshot:
        """SHA-256 of every block, read straight from the file"""
        digests = []
        step = self.block_size * _ZERO_CHUNK_BLOCKS
        end = self.total_blocks * self.block_size
        offset = 0
        try:
            while offset < end:
                chunk = os.pread(self._fd, min(step, end - offset), offset)
                for start in range(0, len(chunk), self.block_size):
                    digests.append(
                        hashlib.sha256(chunk[start:start + self.block_size]).digest()
                    )
                offset += len(chunk)
        except OSError as exc:
            raise StorageIOError(operation="snapshot") from exc
        return Snapshot(
            digests=tuple(digests),
            data_start=self.geometry.region_start(Region.DATA),
        )
