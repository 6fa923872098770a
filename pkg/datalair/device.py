"""
DataLair device: a public volume with an optional hidden volume on one file.

Public blocks are placed through the public position map (PPM) and the public
free list (PFL). The hidden volume is a DL-ORAM over the same data region.
Every public write is followed by the hidden steps its φ policy asks for; a
hidden step is a queued hidden write, a stash flush, or a simulated write.
Without a hidden volume every hidden-side access becomes a random refill of
the same blocks, so a device mounted with only the public password writes
exactly the pattern it would write with a hidden volume in use.
"""

import logging
import time
from collections import OrderedDict
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, List, Optional, Union

from block_store import BlockStore, DataRegion, SealedRegion, Superblock, WriteTrace
from crypto_env import (
    SALT_SIZE,
    KeyRole,
    RandomSource,
    VolumeKey,
    derive_volume_key,
)
from dl_oram import (
    ChaffSurface,
    DlOram,
    StashRegion,
    TreeShape,
    hidden_volume_capacity,
    hidden_write_shape,
    hidden_write_trace_size,
    simulate_rounds,
)
from exceptions import (
    AuthenticationError,
    DiskFullError,
    HiddenQueueFullError,
    UnmappedBlockError,
    ValidationError,
)
from logging_config import get_logger_with_context, log_device_operation, log_trace_shape
from models.device import (
    DeviceGeometry,
    DeviceMode,
    KdfParams,
    Layout,
    ModeConfig,
    PhiPolicy,
    Region,
)
from .header import PublicHeader
from .pfl import Pfl
from .ppm import Ppm

logger = logging.getLogger(__name__)

PlaintextSource = Callable[[int], bytes]


@dataclass
class TraceCapture:
    """Filled with the recorded trace when the ``capture`` block exits"""

    label: str
    trace: Optional[WriteTrace] = None


class DataLairDevice:
    def __init__(
        self,
        *,
        store: BlockStore,
        superblock: Superblock,
        pub_key: VolumeKey,
        rng: RandomSource,
        config: ModeConfig,
        data: DataRegion,
        pfl: Pfl,
        ppm: Ppm,
        oram: Optional[DlOram] = None,
        hid_key: Optional[VolumeKey] = None,
    ):
        self.store = store
        self.log = get_logger_with_context(__name__, device=str(store.path))
        self.geometry = store.geometry
        self.superblock = superblock
        self.pub_key = pub_key
        self.hid_key = hid_key
        self.rng = rng
        self.mode = DeviceMode.PUB_HID if oram is not None else DeviceMode.ONLY_PUB
        self.config = config.model_copy(update={"mode": self.mode})
        self.data = data
        self.pfl = pfl
        self.ppm = ppm
        self.oram = oram
        self.chaff = ChaffSurface(store, data, rng, config.bitmap_on_disk)
        self.header_region = SealedRegion(store, Region.PUBLIC_HEADER, pub_key, rng)
        self.stash_region = StashRegion(store, rng)
        self.hidden_capacity = hidden_volume_capacity(self.geometry)
        self.shape = TreeShape.for_geometry(self.geometry, self.hidden_capacity)
        self.queue: "OrderedDict[int, bytes]" = OrderedDict()
        self.public_writes = 0
        self.public_updates = 0
        self.hidden_steps = 0
        self.mounted = True

    # --- lifecycle ---

    @classmethod
    def format(
        cls,
        path: Union[str, Path],
        n_blocks: int,
        pub_password: str,
        hid_password: Optional[str] = None,
        *,
        block_size: int = 4096,
        layout: Layout = Layout.FULL,
        public_blocks: Optional[int] = None,
        stash_capacity: Optional[int] = None,
        stash_region_blocks: Optional[int] = None,
        kdf: Optional[KdfParams] = None,
        config: Optional[ModeConfig] = None,
        rng: Optional[RandomSource] = None,
        plaintext_source: Optional[PlaintextSource] = None,
    ) -> "DataLairDevice":
        """Create a device; with ``hid_password`` it also carries a hidden volume"""
        started = time.perf_counter()
        rng = rng or RandomSource()
        kdf = kdf or KdfParams()
        config = config or ModeConfig()
        if hid_password is not None and hid_password == pub_password:
            raise ValidationError("Public and hidden passwords must differ")
        stash = {
            name: value
            for name, value in (
                ("stash_capacity", stash_capacity),
                ("stash_region_blocks", stash_region_blocks),
            )
            if value is not None
        }
        geometry = DeviceGeometry(
            n_blocks=n_blocks,
            block_size=block_size,
            layout=layout,
            public_blocks=public_blocks,
            **stash,
        )
        store = BlockStore.open_or_create(path, geometry)
        superblock = Superblock(geometry=geometry, salt=rng.bytes(SALT_SIZE), kdf=kdf)
        store.write_superblock(superblock)
        pub_key = derive_volume_key(pub_password, superblock.salt, KeyRole.PUBLIC, kdf)
        hid_key = (
            derive_volume_key(hid_password, superblock.salt, KeyRole.HIDDEN, kdf)
            if hid_password
            else None
        )

        data = DataRegion(store, rng, pub_key)
        data.write_through = False
        pinned = geometry.preallocated_public
        pfl = Pfl.create(
            geometry,
            SealedRegion(store, Region.PFL_FMA, pub_key, rng),
            data,
            range(pinned, n_blocks),
        )
        ppm_region = SealedRegion(store, Region.PPM, pub_key, rng)
        ppm = Ppm.identity(geometry, ppm_region) if pinned else Ppm(geometry, ppm_region)
        SealedRegion(store, Region.PUBLIC_HEADER, pub_key, rng).write(
            0, PublicHeader(geometry.public_blocks, len(pfl), ppm.mapped_count).encode()
        )

        oram = None
        if hid_key is not None:
            oram = DlOram.oram_init(
                store,
                data,
                hid_key,
                rng,
                pfl,
                config,
                capacity=hidden_volume_capacity(geometry),
                plaintext_source=plaintext_source,
                flush_records=False,
            )
        else:
            ChaffSurface(store, data, rng, config.bitmap_on_disk).fill_initial(pfl.addresses())

        zero = b"\x00" * block_size
        for address in range(pinned):
            data.write(address, pub_key, zero)
        pfl.flush_all()
        data.flush_records()
        data.write_through = True
        ppm.flush_all()

        device = cls(
            store=store,
            superblock=superblock,
            pub_key=pub_key,
            rng=rng,
            config=config,
            data=data,
            pfl=pfl,
            ppm=ppm,
            oram=oram,
            hid_key=hid_key,
        )
        device._save_stash()
        device.log.info(
            f"Formatted {Path(path).name}",
            extra={
                "operation": "format",
                "duration": time.perf_counter() - started,
                "event_type": "device_formatted",
            },
        )
        return device

    @classmethod
    def mount(
        cls,
        path: Union[str, Path],
        pub_password: str,
        hid_password: Optional[str] = None,
        *,
        config: Optional[ModeConfig] = None,
        rng: Optional[RandomSource] = None,
    ) -> "DataLairDevice":
        """Open a formatted device.

        A hidden password that does not open the stash is indistinguishable
        from having no hidden volume: the device mounts public-only.
        """
        rng = rng or RandomSource()
        config = config or ModeConfig()
        store = BlockStore.open_existing(path)
        try:
            superblock = store.read_superblock()
            geometry = store.geometry
            pub_key = derive_volume_key(
                pub_password, superblock.salt, KeyRole.PUBLIC, superblock.kdf
            )
            header = PublicHeader.decode(
                SealedRegion(store, Region.PUBLIC_HEADER, pub_key, rng).read(0)
            )
            if header is None:
                raise AuthenticationError()
            data = DataRegion.load(store, rng, pub_key)
            pfl = Pfl.load(
                geometry,
                SealedRegion(store, Region.PFL_FMA, pub_key, rng),
                data,
                header.fma_length,
            )
            ppm = Ppm.load(geometry, SealedRegion(store, Region.PPM, pub_key, rng))

            oram, hid_key = None, None
            if hid_password:
                key = derive_volume_key(
                    hid_password, superblock.salt, KeyRole.HIDDEN, superblock.kdf
                )
                state = StashRegion(store, rng).load(key)
                if state is not None:
                    hid_key = key
                    oram = DlOram.load(
                        store,
                        data,
                        key,
                        rng,
                        pfl,
                        config,
                        capacity=hidden_volume_capacity(geometry),
                        stash_state=state,
                    )
        except Exception:
            store.close()
            raise

        device = cls(
            store=store,
            superblock=superblock,
            pub_key=pub_key,
            rng=rng,
            config=config,
            data=data,
            pfl=pfl,
            ppm=ppm,
            oram=oram,
            hid_key=hid_key,
        )
        # the stash is rewritten on every mount
        device._save_stash()
        device.log.info(
            f"Mounted {Path(path).name}",
            extra={"operation": "mount", "event_type": "device_mounted"},
        )
        return device

    def unmount(self) -> None:
        """Persist the stash (queued hidden writes included) and the bitmap"""
        if not self.mounted:
            return
        if self.oram is not None:
            for logical_id, block in self.queue.items():
                self.oram.stash.put(logical_id, block)
            self.queue.clear()
            self._save_stash()
            self.oram.flush_bitmap()
        else:
            self._save_stash()
            self.chaff.flush_bitmap()
        self.store.close()
        self.mounted = False
        self.log.info(
            f"Unmounted {self.store.path.name}",
            extra={"operation": "unmount", "event_type": "device_unmounted"},
        )

    def close(self) -> None:
        self.unmount()

    def __enter__(self) -> "DataLairDevice":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.unmount()

    def _save_stash(self) -> None:
        if self.oram is not None:
            self.stash_region.save(self.oram.stash, self.oram.bitmap_positions(), self.hid_key)
        else:
            self.stash_region.scramble()

    # --- public volume ---

    @property
    def public_blocks(self) -> int:
        return self.geometry.public_blocks

    def _check_public(self, public_id: int) -> None:
        if not 0 <= public_id < self.public_blocks:
            raise ValidationError(
                f"Public id {public_id} outside [0, {self.public_blocks})",
                field_errors={"public_id": str(public_id)},
            )

    def _check_block(self, block: bytes) -> None:
        if len(block) != self.geometry.block_size:
            raise ValidationError(
                f"Blocks are {self.geometry.block_size} bytes, got {len(block)}"
            )

    def public_read(self, public_id: int) -> bytes:
        self._check_public(public_id)
        if self.geometry.layout == Layout.LITE:
            address = public_id
        else:
            address = self.ppm.lookup(public_id)
        if address is None:
            raise UnmappedBlockError(public_id)
        return self.data.read(address, self.pub_key)

    def public_write(self, public_id: int, block: bytes) -> None:
        self._check_public(public_id)
        self._check_block(block)
        address = self.ppm.get(public_id)
        if address is not None:
            self.data.write(address, self.pub_key, block)
            self._after_public(update=True)
            return
        if self.ppm.mapped_count >= self.public_blocks:
            raise DiskFullError(self.public_blocks)

        def write_public(target: int) -> None:
            self.data.write(target, self.pub_key, block)

        if self.oram is not None:
            address = self.oram.place_public(write_public, reserve=self._queued_outside_stash())
        else:
            address = self.chaff.place_public(
                self.pfl, self.config.selection_rounds, write_public
            )
        self.pfl.remove(address)
        self.ppm.set(public_id, address)
        self._write_header()
        if self.oram is not None:
            self.oram.rebalance()
        else:
            self.chaff.rebalance()
        self._after_public(update=False)

    def _write_header(self) -> None:
        header = PublicHeader(self.public_blocks, len(self.pfl), self.ppm.mapped_count)
        self.header_region.write(0, header.encode())

    def _after_public(self, update: bool) -> None:
        self.public_writes += 1
        if update:
            self.public_updates += 1
        for _ in range(self._steps_due(update)):
            self.hidden_step()

    def _steps_due(self, update: bool) -> int:
        policy, every = self.config.phi_policy, self.config.phi_every
        if policy is PhiPolicy.EVERY_WRITE:
            return self.config.phi
        if policy is PhiPolicy.EVERY_N:
            return self.config.phi if self.public_writes % every == 0 else 0
        if update and self.public_updates % every == 0:
            return self.config.phi
        return 0

    # --- hidden volume ---

    def hidden_step(self) -> None:
        """Oldest queued hidden write, else a stash flush, else a simulation"""
        self.hidden_steps += 1
        oram = self.oram
        if oram is None:
            simulate_rounds(self.chaff, self.pfl, self.rounds_per_hidden_step, self.rng)
            return
        if self.queue:
            logical_id = next(iter(self.queue))
            if not oram.stash.full or logical_id in oram.stash:
                oram.write_oram(logical_id, self.queue.pop(logical_id))
                return
        if len(oram.stash):
            oram.flush_stash()
        else:
            oram.simulate_write()

    @property
    def rounds_per_hidden_step(self) -> int:
        return self.config.selection_rounds * (1 + self.shape.depth)

    def expected_hidden_step_writes(self) -> int:
        return hidden_write_trace_size(
            self.config.selection_rounds, self.shape.depth, self.config.bitmap_on_disk
        )

    def expected_hidden_step_shape(self):
        return hidden_write_shape(
            self.config.selection_rounds, self.shape.depth, self.config.bitmap_on_disk
        )

    def _require_hidden(self, logical_id: int) -> DlOram:
        # same answer as an unmapped public read
        if self.oram is None:
            raise UnmappedBlockError(logical_id)
        return self.oram

    def hidden_write(self, logical_id: int, block: bytes) -> None:
        """Queue a hidden write; it runs as the hidden step of a later public write"""
        oram = self._require_hidden(logical_id)
        oram.check_id(logical_id)
        self._check_block(block)
        if logical_id not in self.queue and self.hidden_queue_room() == 0:
            raise HiddenQueueFullError(len(self.queue))
        self.queue[logical_id] = block

    def hidden_queue_room(self) -> int:
        """Hidden writes the queue still accepts; queued writes must fit the stash at unmount"""
        if self.oram is None:
            return 0
        stash_room = self.oram.stash.capacity - len(self.oram.stash)
        return max(0, min(self.config.hidden_queue_capacity, stash_room) - len(self.queue))

    def _queued_outside_stash(self) -> int:
        # queued writes land in the stash at unmount at the latest
        return sum(1 for i in self.queue if i not in self.oram.stash)

    def hidden_read(self, logical_id: int) -> bytes:
        oram = self._require_hidden(logical_id)
        queued = self.queue.get(logical_id)
        if queued is not None:
            return queued
        return oram.read_oram(logical_id)

    def flush_hidden(self) -> int:
        """Drain the queue, pairing each hidden write with an in-place update
        of a random mapped public block. Returns the number of writes drained."""
        if self.oram is None or not self.queue:
            return 0
        mapped = self.ppm.mapped_ids()
        if not mapped:
            raise ValidationError("Flushing hidden writes needs at least one public block")
        queued = len(self.queue)
        while self.queue:
            address = self.ppm.get(self.rng.choice(mapped))
            self.data.write(address, self.pub_key, self.data.read(address, self.pub_key))
            self.public_writes += 1
            self.public_updates += 1
            # with a full stash this step flushes instead of dequeuing
            self.hidden_step()
        self.log.with_context(volume="hidden").debug(
            f"Flushed {queued} queued writes", extra={"operation": "flush_hidden", "writes": queued}
        )
        return queued

    # --- observation ---

    @contextmanager
    def capture(self, label: str) -> Iterator[TraceCapture]:
        """Record every block write issued inside the block"""
        holder = TraceCapture(label=label)
        self.store.begin_trace(label)
        started = time.perf_counter()
        try:
            yield holder
        finally:
            holder.trace = self.store.end_trace()
            log_device_operation(
                logger,
                label,
                device=str(self.store.path),
                duration=time.perf_counter() - started,
                writes=len(holder.trace),
                reads=len(holder.trace.reads),
            )
            log_trace_shape(
                logger, label, {region.value: count for region, count in holder.trace.shape().items()}
            )

    def status(self) -> dict:
        """Public status only; nothing here depends on the hidden volume"""
        return {
            "n_blocks": self.geometry.n_blocks,
            "block_size": self.geometry.block_size,
            "layout": self.geometry.layout.value,
            "public_blocks": self.public_blocks,
            "public_mapped": self.ppm.mapped_count,
            "free_list": len(self.pfl),
            "public_writes": self.public_writes,
        }

    def hidden_status(self) -> dict:
        oram = self._require_hidden(0)
        return {
            "capacity": oram.logical_capacity,
            "depth": oram.depth,
            "stash": len(oram.stash),
            "stash_high_water": oram.stash.high_water,
            "queued": len(self.queue),
            "free": oram.fbm.valid_count,
            "occupied": oram.nfbm.occupied_count,
            "filler": len(oram.filler),
        }

    def public_free_addresses(self) -> List[int]:
        return self.pfl.addresses()
