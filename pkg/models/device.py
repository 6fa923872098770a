"""
Pydantic models describing device geometry and operating modes
"""

import bisect
import math
from enum import Enum
from functools import cached_property
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

IV_SIZE = 16
ADDR_SIZE = 8
NODE_HEADER_SIZE = 8
LEAF_ENTRY_SIZE = 20
INTERNAL_ENTRY_SIZE = 12
RMA_RECORD_SIZE = 24
STASH_HEADER_FIXED = 16
STASH_POSITION_SIZE = 4
STASH_ENTRY_SIZE = 25
MIN_BLOCKS = 64


class Region(str, Enum):
    """Device regions in on-disk order"""

    SUPERBLOCK = "superblock"
    PUBLIC_HEADER = "public_header"
    ROOT_POINTER = "root_pointer"
    FBM_COLUMNS = "fbm_columns"
    FBM_HEADER = "fbm_header"
    NFBM_COLUMNS = "nfbm_columns"
    BITMAP = "bitmap"
    PFL_FMA = "pfl_fma"
    PFL_RMA = "pfl_rma"
    PPM = "ppm"
    STASH = "stash"
    DATA = "data"


class Layout(str, Enum):
    """Public volume layout"""

    FULL = "full"  # public blocks placed anywhere among the data region
    LITE = "lite"  # public volume is the fixed first half of the data region


class DeviceMode(str, Enum):
    """Mode a device is mounted in"""

    ONLY_PUB = "only_pub"
    PUB_HID = "pub_hid"


class PhiPolicy(str, Enum):
    """Which public writes carry hidden steps"""

    EVERY_WRITE = "every_write"
    EVERY_N = "every_n"
    UPDATES_ONLY = "updates_only"


class OpLabel(str, Enum):
    """Operation labels attached to recorded traces"""

    PUBLIC_READ = "public_read"
    PUBLIC_WRITE = "public_write"
    HIDDEN_READ = "hidden_read"
    HIDDEN_WRITE = "hidden_write"
    SIMULATED_HIDDEN_WRITE = "simulated_hidden_write"
    FORMAT = "format"
    MOUNT = "mount"
    UNMOUNT = "unmount"


class KdfParams(BaseModel):
    """argon2id cost parameters stored in the superblock"""

    time_cost: int = Field(default=3, ge=1, description="Iterations")
    memory_cost: int = Field(default=65536, ge=8, description="Memory in KiB")
    parallelism: int = Field(default=4, ge=1, description="Lanes")

    @model_validator(mode="after")
    def check_memory(self):
        """argon2 needs at least 8 KiB per lane"""
        if self.memory_cost < 8 * self.parallelism:
            raise ValueError("memory_cost must be at least 8 * parallelism")
        return self

    model_config = ConfigDict(frozen=True)


class RegionSpan(BaseModel):
    """Contiguous block range of one region"""

    region: Region
    start: int = Field(..., ge=0)
    length: int = Field(..., ge=0)

    @property
    def stop(self) -> int:
        return self.start + self.length

    model_config = ConfigDict(frozen=True)


class DeviceGeometry(BaseModel):
    """
    Block-level geometry of a device.

    All region sizes derive from the block count, block size, layout and
    public volume size; nothing else needs to be stored.
    """

    n_blocks: int = Field(..., ge=MIN_BLOCKS, description="Data-region blocks (N)")
    block_size: int = Field(default=4096, description="Block size in bytes (B)")
    addr_size: int = Field(default=ADDR_SIZE, description="Address width in bytes")
    layout: Layout = Field(default=Layout.FULL, description="Public volume layout")
    public_blocks: Optional[int] = Field(
        default=None, description="Public volume size in blocks"
    )
    stash_region_blocks: int = Field(default=64, ge=1)
    stash_capacity: int = Field(default=50, ge=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("block_size")
    @classmethod
    def validate_block_size(cls, v):
        """Block size must be a power of two of at least 512 bytes"""
        if v < 512 or v & (v - 1):
            raise ValueError("Block size must be a power of two >= 512")
        return v

    @field_validator("addr_size")
    @classmethod
    def validate_addr_size(cls, v):
        if v != ADDR_SIZE:
            raise ValueError("Only 8-byte addresses are supported")
        return v

    @model_validator(mode="after")
    def fill_public_blocks(self):
        """Default the public volume size and check it against the layout"""
        half = self.n_blocks // 2
        if self.public_blocks is None:
            default = half if self.layout == Layout.LITE else self.n_blocks // 4
            object.__setattr__(self, "public_blocks", default)
        if self.layout == Layout.LITE and self.public_blocks != half:
            raise ValueError("Lite layout fixes the public volume at N/2 blocks")
        if not 1 <= self.public_blocks <= half:
            raise ValueError("Public volume must hold between 1 and N/2 blocks")
        if not self.fbm_header_fits:
            raise ValueError("FBM header does not fit in one block")
        if self.stash_header_blocks + self.stash_capacity > self.stash_region_blocks:
            raise ValueError("Stash region too small for header and capacity")
        return self

    # --- derived sizes ---

    @property
    def payload_size(self) -> int:
        """Sealed payload of a metadata block (IV stored inline)"""
        return self.block_size - IV_SIZE

    @property
    def beta(self) -> int:
        """Addresses per metadata block"""
        return self.payload_size // self.addr_size

    @property
    def columns(self) -> int:
        return math.ceil(self.n_blocks / self.beta)

    @property
    def matrix_rows(self) -> int:
        return math.ceil(self.n_blocks / self.columns)

    @property
    def fbm_header_fits(self) -> bool:
        """Per-row counters of the FBM fit one header block"""
        row_bits = math.ceil(math.log2(max(self.n_blocks / self.beta, 2)))
        return (
            self.beta * row_bits <= 8 * self.payload_size
            and 4 * self.matrix_rows <= self.payload_size
        )

    @property
    def bitmap_bits_per_block(self) -> int:
        return self.payload_size * 8

    @property
    def bitmap_blocks(self) -> int:
        return math.ceil(self.n_blocks / self.bitmap_bits_per_block)

    @property
    def fma_blocks(self) -> int:
        return math.ceil(self.n_blocks / self.beta)

    @property
    def rma_records_per_block(self) -> int:
        return self.payload_size // RMA_RECORD_SIZE

    @property
    def rma_blocks(self) -> int:
        return math.ceil(self.n_blocks / self.rma_records_per_block)

    @property
    def ppm_blocks(self) -> int:
        return math.ceil(self.public_blocks / self.beta)

    @property
    def stash_header_blocks(self) -> int:
        size = (
            STASH_HEADER_FIXED
            + STASH_POSITION_SIZE * self.bitmap_blocks
            + STASH_ENTRY_SIZE * self.stash_capacity
        )
        return math.ceil(size / self.payload_size)

    @property
    def leaf_fanout(self) -> int:
        return (self.block_size - NODE_HEADER_SIZE) // LEAF_ENTRY_SIZE

    @property
    def internal_fanout(self) -> int:
        return (self.block_size - NODE_HEADER_SIZE) // INTERNAL_ENTRY_SIZE

    @property
    def preallocated_public(self) -> int:
        """Data blocks pinned to the public volume at format time"""
        return self.public_blocks if self.layout == Layout.LITE else 0

    @property
    def oram_occupancy(self) -> int:
        """Blocks the hidden ORAM keeps occupied: half of the non-pinned blocks"""
        return (self.n_blocks - self.preallocated_public) // 2

    @property
    def default_hidden_blocks(self) -> int:
        """Hidden volume size when the caller does not pick one"""
        if self.layout == Layout.LITE:
            return self.oram_occupancy
        return self.n_blocks // 2 - self.public_blocks

    @cached_property
    def regions(self) -> List[RegionSpan]:
        sizes = [
            (Region.SUPERBLOCK, 1),
            (Region.PUBLIC_HEADER, 1),
            (Region.ROOT_POINTER, 1),
            (Region.FBM_COLUMNS, self.columns),
            (Region.FBM_HEADER, 1),
            (Region.NFBM_COLUMNS, self.columns),
            (Region.BITMAP, self.bitmap_blocks),
            (Region.PFL_FMA, self.fma_blocks),
            (Region.PFL_RMA, self.rma_blocks),
            (Region.PPM, self.ppm_blocks),
            (Region.STASH, self.stash_region_blocks),
            (Region.DATA, self.n_blocks),
        ]
        spans, start = [], 0
        for region, length in sizes:
            spans.append(RegionSpan(region=region, start=start, length=length))
            start += length
        return spans

    @cached_property
    def span_starts(self) -> Tuple[List[int], List[RegionSpan]]:
        spans = self.regions
        return [span.start for span in spans], spans

    @property
    def total_blocks(self) -> int:
        last = self.regions[-1]
        return last.start + last.length

    def span(self, region: Region) -> RegionSpan:
        for candidate in self.regions:
            if candidate.region == region:
                return candidate
        raise KeyError(region)

    def region_start(self, region: Region) -> int:
        return self.span(region).start

    def region_of(self, index: int) -> Region:
        """Region tag of a physical block index"""
        starts, spans = self.span_starts
        return spans[bisect.bisect_right(starts, index) - 1].region

    def data_block(self, address: int) -> int:
        """Physical index of data-region address"""
        return self.region_start(Region.DATA) + address

    def signature(self) -> tuple:
        """Comparable identity of the geometry"""
        return (
            self.n_blocks,
            self.block_size,
            self.addr_size,
            self.layout.value,
            self.public_blocks,
            self.stash_region_blocks,
            self.stash_capacity,
        )


class ModeConfig(BaseModel):
    """Protocol knobs for a mounted device"""

    mode: DeviceMode = Field(default=DeviceMode.ONLY_PUB)
    selection_rounds: int = Field(default=5, ge=1, description="k")
    phi: int = Field(default=1, ge=0, description="Hidden steps per eligible write")
    phi_policy: PhiPolicy = Field(default=PhiPolicy.EVERY_WRITE)
    phi_every: int = Field(default=1, ge=1)
    legacy_selection: bool = Field(default=False)
    bitmap_on_disk: bool = Field(default=True)
    hidden_queue_capacity: int = Field(default=256, ge=1)
