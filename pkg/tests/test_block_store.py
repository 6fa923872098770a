"""
Unit tests for the block device layer
"""

import os

import pytest

from block_store import NULL_INDEX, BlockStore, DataRegion, SealedRegion, Superblock
from block_store.superblock import _HEAD
from exceptions import (
    BlockRangeError,
    CorruptDeviceError,
    GeometryMismatchError,
    TraceStateError,
    ValidationError,
)
from models.device import DeviceGeometry, Region


@pytest.mark.unit
class TestBlockStore:
    """Test file-backed block I/O"""

    def test_file_is_preallocated(self, store, geometry):
        """The file holds every region from the start"""
        assert os.path.getsize(store.path) == geometry.total_blocks * geometry.block_size

    def test_superblock_written_on_create(self, store, geometry):
        assert store.read_superblock().geometry.signature() == geometry.signature()

    def test_reopen_reads_geometry(self, tmp_path, geometry):
        path = tmp_path / "reopen.img"
        BlockStore.open_or_create(path, geometry).close()
        with BlockStore.open_existing(path) as reopened:
            assert reopened.geometry.signature() == geometry.signature()

    def test_reopen_with_other_geometry_fails(self, tmp_path, geometry):
        """Existing file, different geometry"""
        path = tmp_path / "mismatch.img"
        BlockStore.open_or_create(path, geometry).close()
        other = DeviceGeometry(n_blocks=geometry.n_blocks * 2, block_size=geometry.block_size)
        with pytest.raises(GeometryMismatchError):
            BlockStore.open_or_create(path, other)

    def test_open_non_device_fails(self, tmp_path):
        path = tmp_path / "zeros.img"
        path.write_bytes(b"\x00" * 4096)
        with pytest.raises(CorruptDeviceError):
            BlockStore.open_existing(path)

    def test_truncated_file_fails(self, tmp_path, geometry):
        path = tmp_path / "short.img"
        BlockStore.open_or_create(path, geometry).close()
        with open(path, "r+b") as handle:
            handle.truncate(geometry.block_size * 4)
        with pytest.raises(GeometryMismatchError):
            BlockStore.open_existing(path)

    def test_write_read_round_trip(self, store, make_block):
        block = make_block(0xAB)
        store.write_block(5, block)
        assert store.read_block(5) == block

    def test_wrong_length_rejected(self, store):
        with pytest.raises(ValidationError):
            store.write_block(5, b"\x00" * 10)

    @pytest.mark.parametrize("index", [-1, "total"])
    def test_out_of_range_rejected(self, store, make_block, index):
        index = store.total_blocks if index == "total" else index
        with pytest.raises(BlockRangeError):
            store.write_block(index, make_block(1))
        with pytest.raises(BlockRangeError):
            store.read_block(index)

    def test_region_offsets(self, store, geometry, make_block):
        """Region offsets are relative to the region start"""
        block = make_block(7)
        store.write_region(Region.DATA, 3, block)
        assert store.read_block(geometry.region_start(Region.DATA) + 3) == block

    def test_region_offset_bounds(self, store, make_block):
        with pytest.raises(BlockRangeError):
            store.write_region(Region.FBM_HEADER, 1, make_block(0))

    def test_counters(self, store, make_block):
        store.stats.reset()
        store.write_block(4, make_block(1))
        store.read_block(4)
        store.read_block(4)
        assert (store.stats.reads, store.stats.writes) == (2, 1)


@pytest.mark.unit
class TestTracing:
    """Test write traces and snapshots"""

    def test_trace_records_regions(self, store, geometry, make_block):
        store.begin_trace("t")
        store.write_region(Region.DATA, 0, make_block(1))
        store.write_region(Region.DATA, 1, make_block(1))
        store.write_region(Region.BITMAP, 0, make_block(1))
        store.read_region(Region.PPM, 0)
        trace = store.end_trace()
        assert len(trace) == 3
        assert trace.shape() == {Region.DATA: 2, Region.BITMAP: 1}
        assert trace.read_shape() == {Region.PPM: 1}
        assert trace.in_region(Region.DATA) == [
            geometry.region_start(Region.DATA),
            geometry.region_start(Region.DATA) + 1,
        ]

    def test_nested_trace_rejected(self, store):
        store.begin_trace("outer")
        with pytest.raises(TraceStateError):
            store.begin_trace("inner")
        store.end_trace()

    def test_end_without_begin_rejected(self, store):
        with pytest.raises(TraceStateError):
            store.end_trace()

    def test_no_trace_outside_begin_end(self, store, make_block):
        store.write_block(3, make_block(2))
        assert not store.tracing

    def test_snapshot_diff_finds_changed_blocks(self, store, make_block):
        """Only rewritten blocks with new content show up"""
        before = store.snapshot()
        store.write_block(9, make_block(3))
        store.write_block(10, store.read_block(10))
        after = store.snapshot()
        assert after.changed_since(before) == frozenset({9})

    def test_snapshot_covers_device(self, store):
        assert len(store.snapshot()) == store.total_blocks


@pytest.mark.unit
class TestSuperblock:
    """Test the plaintext superblock codec"""

    def test_encode_fills_one_block(self, geometry):
        assert len(Superblock(geometry=geometry).encode()) == geometry.block_size

    def test_round_trip(self, geometry, fast_kdf):
        original = Superblock(geometry=geometry, salt=b"\x05" * 16, kdf=fast_kdf)
        decoded = Superblock.decode(original.encode())
        assert decoded.salt == original.salt
        assert decoded.kdf == fast_kdf
        assert decoded.geometry.signature() == geometry.signature()

    def test_bad_magic(self, geometry):
        raw = bytearray(Superblock(geometry=geometry).encode())
        raw[0:4] = b"NOPE"
        with pytest.raises(CorruptDeviceError):
            Superblock.decode(bytes(raw))

    def test_tampered_region_table(self, geometry):
        """A region span that disagrees with the geometry"""
        raw = bytearray(Superblock(geometry=geometry).encode())
        # first byte of the first span length
        raw[_HEAD.size + 9] ^= 0x01
        with pytest.raises(CorruptDeviceError):
            Superblock.decode(bytes(raw))


@pytest.mark.unit
class TestSealedRegions:
    """Test sealed metadata and data regions"""

    def test_sealed_region_round_trip(self, store, rng, hidden_key):
        region = SealedRegion(store, Region.FBM_COLUMNS, hidden_key, rng)
        region.write(2, b"payload")
        read = region.read(2)
        assert len(read) == region.payload_size
        assert read.startswith(b"payload")
        assert read[len(b"payload"):] == b"\x00" * (region.payload_size - len(b"payload"))

    def test_oversized_payload_rejected(self, store, rng, hidden_key):
        region = SealedRegion(store, Region.FBM_COLUMNS, hidden_key, rng)
        with pytest.raises(ValidationError):
            region.write(0, b"\x00" * (region.payload_size + 1))

    def test_reencrypt_changes_bytes_only(self, store, rng, hidden_key):
        region = SealedRegion(store, Region.NFBM_COLUMNS, hidden_key, rng)
        region.write(1, b"stable")
        before = store.read_region(Region.NFBM_COLUMNS, 1)
        region.reencrypt(1)
        assert store.read_region(Region.NFBM_COLUMNS, 1) != before
        assert region.read(1).startswith(b"stable")

    def test_keyless_region_writes_noise(self, store, rng):
        """Without a key a write is a random refill"""
        region = SealedRegion(store, Region.FBM_HEADER, None, rng)
        region.write(0, b"\x00" * 32)
        assert region.read(0)[:32] != b"\x00" * 32

    def test_data_region_round_trip(self, store, rng, public_key, make_block):
        data = DataRegion(store, rng, public_key)
        block = make_block(0x42)
        data.write(7, public_key, block)
        assert data.read(7, public_key) == block

    def test_data_ivs_live_in_reverse_records(self, store, rng, public_key, make_block):
        """A reloaded data region recovers IVs and FMA indices"""
        data = DataRegion(store, rng, public_key)
        data.write(7, public_key, make_block(1))
        data.set_fma_index(9, 3)
        reloaded = DataRegion.load(store, rng, public_key)
        assert reloaded.read(7, public_key) == make_block(1)
        assert reloaded.fma_index[9] == 3
        assert reloaded.fma_index[8] == NULL_INDEX

    def test_data_write_size_enforced(self, store, rng, public_key):
        data = DataRegion(store, rng, public_key)
        with pytest.raises(ValidationError):
            data.write(0, public_key, b"\x00" * 10)

    def test_data_address_bounds(self, store, rng, public_key, make_block):
        data = DataRegion(store, rng, public_key)
        with pytest.raises(ValidationError):
            data.write(store.geometry.n_blocks, public_key, make_block(0))

    def test_data_write_touches_data_and_rma(self, store, rng, public_key, make_block):
        """One data block plus its reverse-mapping record block"""
        data = DataRegion(store, rng, public_key)
        store.begin_trace("data")
        data.write(0, public_key, make_block(1))
        trace = store.end_trace()
        assert trace.shape() == {Region.DATA: 1, Region.PFL_RMA: 1}
