"""
DL-ORAM: write-only ORAM with the position map interleaved among data blocks.

A hidden write runs ``1 + depth`` selection runs of k rounds each. FBM draws and
N-FBM slot draws happen up front; the acquired free blocks are then handed out to
stash entries (data first, then every dirty tree node, leaves up), all new
addresses and node contents are computed, and only then are the rounds
executed. Every round writes the same regions whatever its outcome, so the
write pattern of a hidden write depends on nothing but k and the tree depth.

Occupancy is held at exactly ``geometry.oram_occupancy``: data blocks, tree
nodes and anonymous filler blocks. Filler blocks sit in the N-FBM but no tree
entry points at them; they are what public inserts and rebalancing consume.
"""

import logging
import struct
from typing import Callable, Dict, List, Optional, Set, Tuple

from block_store import BlockStore, DataRegion, SealedRegion
from crypto_env import RandomSource, VolumeKey
from exceptions import (
    CorruptDeviceError,
    InvariantViolationError,
    StashOverflowError,
    UnmappedBlockError,
    ValidationError,
)
from freemaps import (
    NULL_ADDRESS,
    Fbm,
    IndexedSet,
    MatrixLayout,
    Nfbm,
    SlotBitmap,
)
from models.device import ModeConfig, Region
from .selection import BlockSampler, Pick, PickTag, SelectionPlan, SelectionProtocol
from .stash import Stash, StashEntry, StashState
from .surface import LiveSurface, simulate_rounds
from .tree import (
    NULL_LOCATION,
    Location,
    NodeId,
    TreeNode,
    TreeShape,
    decode_node,
    default_capacity,
    encode_node,
)

logger = logging.getLogger(__name__)

ROOT_MAGIC = b"DLRR"
_ROOT = struct.Struct("<4sQIB")

# address owners: ("data", logical_id) or ("node", level, index)
Owner = Tuple
PlaintextSource = Callable[[int], bytes]

# fallback victim search gives up after this many extra samples
_VICTIM_SAMPLES = 256


def hidden_write_shape(
    rounds: int, depth: int, bitmap_on_disk: bool = True
) -> Dict[Region, int]:
    """Region-tagged write counts of one hidden (or simulated) write"""
    total = rounds * (1 + depth)
    shape = {
        Region.DATA: total,
        Region.PFL_RMA: total,
        Region.FBM_COLUMNS: total,
        Region.FBM_HEADER: total,
        Region.NFBM_COLUMNS: total,
        Region.ROOT_POINTER: 1,
    }
    if bitmap_on_disk:
        shape[Region.BITMAP] = 2 * total
    return shape


def hidden_write_trace_size(rounds: int, depth: int, bitmap_on_disk: bool = True) -> int:
    return sum(hidden_write_shape(rounds, depth, bitmap_on_disk).values())


class DlOram:
    def __init__(
        self,
        *,
        store: BlockStore,
        data: DataRegion,
        key: VolumeKey,
        rng: RandomSource,
        sampler: BlockSampler,
        mode: ModeConfig,
        shape: TreeShape,
        fbm: Fbm,
        nfbm: Nfbm,
        bitmap: SlotBitmap,
        levels: List[List[TreeNode]],
        stash: Stash,
        filler: Optional[IndexedSet] = None,
    ):
        self.store = store
        self.geometry = store.geometry
        self.data = data
        self.key = key
        self.rng = rng
        self.sampler = sampler
        self.mode = mode
        self.shape = shape
        self.fbm = fbm
        self.nfbm = nfbm
        self.bitmap = bitmap
        self.levels = levels
        self.stash = stash
        self.root_region = SealedRegion(store, Region.ROOT_POINTER, key, rng)
        self.owners: Dict[int, Owner] = self._index_owners()
        if filler is None:
            filler = IndexedSet(
                a for a in nfbm.occupied_addresses() if a not in self.owners
            )
        self.filler = filler
        self.protocol = SelectionProtocol(
            fbm, nfbm, mode.selection_rounds, sampler, legacy=mode.legacy_selection
        )
        self.surface = LiveSurface(data, key, fbm, nfbm, bitmap, rng, self._write_root)
        self.writes = 0

    # --- construction ---

    @classmethod
    def oram_init(
        cls,
        store: BlockStore,
        data: DataRegion,
        key: VolumeKey,
        rng: RandomSource,
        sampler: BlockSampler,
        mode: ModeConfig,
        capacity: Optional[int] = None,
        plaintext_source: Optional[PlaintextSource] = None,
        flush_records: bool = True,
    ) -> "DlOram":
        """Fill half of the managed blocks and persist every hidden block once"""
        geometry = store.geometry
        if capacity is None:
            capacity = default_capacity(geometry)
        shape = TreeShape.for_geometry(geometry, capacity)
        filler_count = geometry.oram_occupancy - capacity - shape.node_count
        if capacity < 1 or filler_count < 0:
            raise ValidationError(
                f"Hidden capacity {capacity} does not fit the ORAM occupancy",
                field_errors={"capacity": str(capacity)},
            )

        addresses = sampler.addresses()
        layout = MatrixLayout.for_geometry(geometry)
        fbm = Fbm.init_full(layout, rng, addresses)
        bitmap = SlotBitmap(
            layout.n_slots,
            geometry.bitmap_bits_per_block,
            SealedRegion(store, Region.BITMAP, key, rng),
            relocate_on_write=mode.bitmap_on_disk,
        )
        bitmap.shuffle_positions(rng)
        nfbm = Nfbm(layout, bitmap)

        def place() -> Location:
            receipt = fbm.select_random(rng)
            fbm.invalidate_with_compaction(receipt)
            return receipt.address, nfbm.add_with_retry(receipt.address, rng)

        mapped = [place() for _ in range(capacity)]
        filler = IndexedSet(place()[0] for _ in range(filler_count))

        levels: List[List[TreeNode]] = [[] for _ in range(shape.depth)]
        for index in range(shape.level_sizes[-1]):
            node = TreeNode(
                shape.leaf_level, index, entries=[mapped[i] for i in shape.leaf_ids(index)]
            )
            node.address, node.slot = place()
            levels[-1].append(node)
        for level in range(shape.depth - 2, -1, -1):
            children = levels[level + 1]
            for index in range(shape.level_sizes[level]):
                node = TreeNode(
                    level,
                    index,
                    entries=[children[c].location for c in shape.child_range(level, index)],
                )
                node.address, node.slot = place()
                levels[level].append(node)

        fbm.attach(
            SealedRegion(store, Region.FBM_COLUMNS, key, rng),
            SealedRegion(store, Region.FBM_HEADER, key, rng),
        )
        nfbm.attach(SealedRegion(store, Region.NFBM_COLUMNS, key, rng))
        oram = cls(
            store=store,
            data=data,
            key=key,
            rng=rng,
            sampler=sampler,
            mode=mode,
            shape=shape,
            fbm=fbm,
            nfbm=nfbm,
            bitmap=bitmap,
            levels=levels,
            stash=Stash(geometry.stash_capacity),
            filler=filler,
        )
        oram._persist_all(addresses, plaintext_source, flush_records)
        logger.info(
            "ORAM initialised",
            extra={
                "operation": "oram_init",
                "capacity": capacity,
                "depth": shape.depth,
                "filler": filler_count,
            },
        )
        return oram

    @classmethod
    def load(
        cls,
        store: BlockStore,
        data: DataRegion,
        key: VolumeKey,
        rng: RandomSource,
        sampler: BlockSampler,
        mode: ModeConfig,
        capacity: int,
        stash_state: StashState,
    ) -> "DlOram":
        """Rebuild the in-memory mirrors from a mounted device"""
        geometry = store.geometry
        shape = TreeShape.for_geometry(geometry, capacity)
        layout = MatrixLayout.for_geometry(geometry)
        fbm = Fbm.load(
            layout,
            SealedRegion(store, Region.FBM_COLUMNS, key, rng),
            SealedRegion(store, Region.FBM_HEADER, key, rng),
        )
        bitmap = SlotBitmap.load(
            layout.n_slots,
            geometry.bitmap_bits_per_block,
            SealedRegion(store, Region.BITMAP, key, rng),
            stash_state.bitmap_positions,
            relocate_on_write=mode.bitmap_on_disk,
        )
        nfbm = Nfbm.load(layout, SealedRegion(store, Region.NFBM_COLUMNS, key, rng), bitmap)

        root_region = SealedRegion(store, Region.ROOT_POINTER, key, rng)
        address, slot = cls._decode_root(root_region.read(0), shape)
        levels: List[List[TreeNode]] = [[TreeNode(0, 0, address, slot)]]
        for level in range(shape.depth):
            for node in levels[level]:
                node.entries = decode_node(
                    data.read(node.address, key), shape, level, node.index
                )
            if level == shape.leaf_level:
                break
            children = []
            for node in levels[level]:
                first = node.index * shape.internal_fanout
                for child in shape.child_range(level, node.index):
                    address, slot = node.entries[child - first]
                    children.append(TreeNode(level + 1, child, address, slot))
            levels.append(children)

        stash = Stash(geometry.stash_capacity)
        for entry in stash_state.entries:
            stash.put(entry.logical_id, entry.data, entry.stale)
        return cls(
            store=store,
            data=data,
            key=key,
            rng=rng,
            sampler=sampler,
            mode=mode,
            shape=shape,
            fbm=fbm,
            nfbm=nfbm,
            bitmap=bitmap,
            levels=levels,
            stash=stash,
        )

    def _index_owners(self) -> Dict[int, Owner]:
        owners: Dict[int, Owner] = {}
        leaf_level = self.shape.leaf_level
        for level, nodes in enumerate(self.levels):
            for node in nodes:
                owners[node.address] = ("node", level, node.index)
                if level != leaf_level:
                    continue
                first = node.index * self.shape.leaf_fanout
                for offset, (address, slot) in enumerate(node.entries):
                    # entries left behind by eviction no longer match the N-FBM
                    if address != NULL_ADDRESS and self.nfbm.slot_of(address) == slot:
                        owners[address] = ("data", first + offset)
        return owners

    def _persist_all(
        self,
        addresses: List[int],
        plaintext_source: Optional[PlaintextSource],
        flush_records: bool,
    ) -> None:
        block_size = self.geometry.block_size
        self._write_root()
        self.fbm.flush_all()
        self.nfbm.flush_all()
        self.bitmap.flush_all()
        write_through = self.data.write_through
        self.data.write_through = False
        try:
            for address in sorted(addresses):
                owner = self.owners.get(address)
                if owner is None:
                    self.data.refill(address)
                elif owner[0] == "data":
                    plaintext = (
                        plaintext_source(owner[1])
                        if plaintext_source is not None
                        else self.rng.bytes(block_size)
                    )
                    self.data.write(address, self.key, plaintext)
                else:
                    self.data.write(address, self.key, self._encode(owner[1], owner[2]))
        finally:
            self.data.write_through = write_through
        if flush_records:
            self.data.flush_records()

    # --- properties ---

    @property
    def k(self) -> int:
        return self.mode.selection_rounds

    @property
    def depth(self) -> int:
        return self.shape.depth

    @property
    def runs(self) -> int:
        return 1 + self.shape.depth

    @property
    def rounds_per_write(self) -> int:
        return self.k * self.runs

    @property
    def logical_capacity(self) -> int:
        return self.shape.logical_capacity

    @property
    def root(self) -> TreeNode:
        return self.levels[0][0]

    def expected_trace_size(self) -> int:
        return hidden_write_trace_size(self.k, self.depth, self.mode.bitmap_on_disk)

    def expected_shape(self) -> Dict[Region, int]:
        return hidden_write_shape(self.k, self.depth, self.mode.bitmap_on_disk)

    def node(self, node_id: NodeId) -> TreeNode:
        level, index = node_id
        return self.levels[level][index]

    def kind_of(self, address: int) -> Optional[str]:
        """``free``, ``filler``, ``data``, ``node`` or ``None`` (not ORAM-managed)"""
        if address in self.fbm:
            return "free"
        if address in self.filler:
            return "filler"
        owner = self.owners.get(address)
        return owner[0] if owner is not None else None

    def mapped_location(self, logical_id: int) -> Location:
        leaf, offset = self._leaf_of(logical_id)
        return leaf.entries[offset]

    # --- root pointer ---

    def _write_root(self) -> None:
        root = self.root
        self.root_region.write(0, _ROOT.pack(ROOT_MAGIC, root.address, root.slot, self.depth))

    @staticmethod
    def _decode_root(payload: bytes, shape: TreeShape) -> Location:
        magic, address, slot, depth = _ROOT.unpack_from(payload)
        if magic != ROOT_MAGIC or depth != shape.depth:
            raise CorruptDeviceError("Root pointer failed validation", structure="root_pointer")
        return address, slot

    def _encode(self, level: int, index: int) -> bytes:
        return encode_node(self.levels[level][index], self.shape, self.geometry.block_size)

    # --- reads ---

    def check_id(self, logical_id: int) -> None:
        if not 0 <= logical_id < self.logical_capacity:
            raise ValidationError(
                f"Logical id {logical_id} outside [0, {self.logical_capacity})",
                field_errors={"logical_id": str(logical_id)},
            )

    def _leaf_of(self, logical_id: int) -> Tuple[TreeNode, int]:
        leaf = self.levels[-1][logical_id // self.shape.leaf_fanout]
        return leaf, logical_id % self.shape.leaf_fanout

    def read_oram(self, logical_id: int) -> bytes:
        """Stash first; otherwise root pointer, path nodes and data block from disk"""
        self.check_id(logical_id)
        cached = self.stash.get(logical_id)
        if cached is not None:
            return cached
        address, _ = self._decode_root(self.root_region.read(0), self.shape)
        path = self.shape.path(logical_id)
        for level, index in path:
            entries = decode_node(self.data.read(address, self.key), self.shape, level, index)
            if level < self.shape.leaf_level:
                child = path[level + 1][1]
                address = entries[child - index * self.shape.internal_fanout][0]
            else:
                address = entries[logical_id - index * self.shape.leaf_fanout][0]
        if address == NULL_ADDRESS:
            raise UnmappedBlockError(logical_id)
        return self.data.read(address, self.key)

    # --- writes ---

    def write_oram(self, logical_id: int, data: bytes) -> None:
        """Queue ``data`` in the stash and run one full write cycle"""
        self.check_id(logical_id)
        if len(data) != self.geometry.block_size:
            raise ValidationError(
                f"Hidden blocks are {self.geometry.block_size} bytes, got {len(data)}"
            )
        if self.stash.full and logical_id not in self.stash:
            raise StashOverflowError(len(self.stash) + 1, self.stash.capacity)
        self.stash.put(logical_id, data)
        self._write_cycle()

    def flush_stash(self) -> int:
        """Write cycle with no new item; returns how many entries left the stash"""
        before = len(self.stash)
        self._write_cycle()
        return before - len(self.stash)

    def simulate_write(self) -> None:
        simulate_rounds(self.surface, self.sampler, self.rounds_per_write, self.rng)

    def select_free_blocks(self, runs: int = 1) -> SelectionPlan:
        """Draw ``runs`` selection runs and their N-FBM slots without writing anything.

        Receipts stay outstanding until the plan is executed or released.
        """
        plan = self.protocol.draw(self.rng, runs)
        self.protocol.draw_slots(plan, self.rng)
        return plan

    def release_plan(self, plan: SelectionPlan) -> None:
        self.protocol.release(plan)

    def _write_cycle(self) -> None:
        plan = self.select_free_blocks(self.runs)
        acquired = plan.acquired()
        placed, dirty = self._choose(len(acquired))
        items: List[Owner] = [("data", e.logical_id) for e in placed]
        items += [("node", level, index) for level, index in sorted(dirty, reverse=True)]
        for pick, item in zip(acquired, items):
            pick.item = item
        self._remap(plan)
        self._execute(plan)
        for entry in placed:
            self.stash.remove(entry.logical_id)
        self.writes += 1
        logger.debug(
            "Hidden write cycle",
            extra={
                "operation": "write_oram",
                "acquired": len(acquired),
                "placed": len(placed),
                "stash": len(self.stash),
            },
        )

    def _choose(self, budget: int) -> Tuple[List[StashEntry], Set[NodeId]]:
        """FIFO stash entries whose blocks plus new path nodes fit ``budget``"""
        placed: List[StashEntry] = []
        dirty: Set[NodeId] = set()
        used = 0
        for entry in self.stash.entries():
            if used >= budget:
                break
            fresh = [n for n in self.shape.path(entry.logical_id) if n not in dirty]
            cost = 1 + len(fresh)
            if used + cost <= budget:
                placed.append(entry)
                dirty.update(fresh)
                used += cost
        return placed, dirty

    def _remap(self, plan: SelectionPlan) -> None:
        """Point the tree at every new location before anything is written"""
        for pick in plan.picks:
            if pick.item is None:
                continue
            new = (pick.address, pick.nfbm_slot)
            if pick.item[0] == "data":
                logical_id = pick.item[1]
                leaf, offset = self._leaf_of(logical_id)
                old = leaf.entries[offset]
                if self.stash.entry(logical_id).stale or old == NULL_LOCATION:
                    old = None
                leaf.entries[offset] = new
            else:
                _, level, index = pick.item
                node = self.levels[level][index]
                old = node.location
                node.address, node.slot = new
                if level > 0:
                    parent = self.levels[level - 1][index // self.shape.internal_fanout]
                    parent.entries[index % self.shape.internal_fanout] = new
            pick.old = old
            if old is not None:
                self.owners.pop(old[0], None)
            self.owners[pick.address] = pick.item

    def _payload(self, pick: Pick) -> bytes:
        if pick.item[0] == "data":
            return self.stash.get(pick.item[1])
        return self._encode(pick.item[1], pick.item[2])

    def _execute(self, plan: SelectionPlan) -> None:
        for pick in plan.picks:
            if pick.tag is PickTag.FREE and pick.item is not None:
                self.data.write(pick.address, self.key, self._payload(pick))
                if pick.old is not None:
                    self.fbm.replace_in_place(pick.receipt, pick.old[0])
                else:
                    self.fbm.invalidate_with_compaction(pick.receipt)
                self.nfbm.claim(pick.nfbm_slot, pick.address)
                if pick.old is not None:
                    self.nfbm.mark_free(pick.old[1])
                self.surface.touch_bitmap(pick.nfbm_slot)
            elif pick.tag is PickTag.FREE:
                self.data.reencrypt(pick.address, self.key)
                self.fbm.return_receipt(pick.receipt)
                self.nfbm.touch_slot(pick.nfbm_slot)
                self.surface.touch_bitmap(pick.nfbm_slot)
            else:
                self._dummy_round(pick.address)
        for receipt in plan.leftovers:
            self.fbm.release(receipt)
        self._write_root()

    def _dummy_round(self, address: int) -> None:
        self.surface.touch_data(address)
        self.surface.touch_fbm()
        self.surface.touch_bitmap(self.surface.touch_nfbm())

    # --- public placement ---

    def place_public(self, write_public: Callable[[int], None], reserve: int = 0) -> int:
        """Run one k-round selection and hand a block to the public volume.

        ``write_public(address)`` is called exactly once, inside the round that
        takes the block. Returns the address given away. ``reserve`` stash
        entries are held for queued hidden writes; a data block is evicted
        only when the stash has room beyond them.
        """
        plan = self.protocol.draw(self.rng, 1)
        target = next((i for i, p in enumerate(plan.picks) if p.tag is PickTag.FREE), None)
        victim: Optional[Tuple[int, int]] = None
        if target is None:
            victim = self._choose_victim(plan, evict_data=self.stash_room(reserve) > 0)
        given = None
        for i, pick in enumerate(plan.picks):
            if i == target:
                write_public(pick.address)
                self.fbm.invalidate_with_compaction(pick.receipt)
                self.surface.touch_bitmap(self.surface.touch_nfbm())
                given = pick.address
            elif victim is not None and i == victim[0]:
                given = victim[1]
                self._take_victim(given, write_public)
            elif pick.tag is PickTag.FREE:
                self.data.reencrypt(pick.address, self.key)
                self.fbm.return_receipt(pick.receipt)
                self.surface.touch_bitmap(self.surface.touch_nfbm())
            else:
                self._dummy_round(pick.address)
        for receipt in plan.leftovers:
            self.fbm.release(receipt)
        self.owners.pop(given, None)
        return given

    def stash_room(self, reserve: int = 0) -> int:
        return self.stash.capacity - len(self.stash) - reserve

    def _choose_victim(self, plan: SelectionPlan, evict_data: bool = True) -> Tuple[int, int]:
        """Round index and address of the block a public insert takes over"""
        preference = {"free": 0, "filler": 1}
        if evict_data:
            preference["data"] = 2
        best = None
        for i, pick in enumerate(plan.picks):
            rank = preference.get(self.kind_of(pick.address))
            if rank is not None and (best is None or rank < best[0]):
                best = (rank, i, pick.address)
        if best is not None:
            return best[1], best[2]
        logger.warning(
            "Public insert picked no evictable block; sampling an extra victim",
            extra={"operation": "place_public", "stash": len(self.stash)},
        )
        if not evict_data:
            return 0, self._spare_victim(plan)
        picked = {p.address for p in plan.picks}
        for _ in range(_VICTIM_SAMPLES):
            _, address = self.nfbm.sample_occupied(self.rng, 1)[0]
            if address not in picked and self.kind_of(address) in ("filler", "data"):
                return 0, address
        raise InvariantViolationError("public_victim_available")

    def _spare_victim(self, plan: SelectionPlan) -> int:
        """Filler, else a free block: neither needs stash room"""
        if len(self.filler):
            return self.filler.choice(self.rng)
        held = {r.address for r in plan.leftovers}
        free = [a for a in self.fbm.valid_addresses() if a not in held]
        if free:
            return free[self.rng.below(len(free))]
        raise InvariantViolationError("public_victim_available")

    def _take_victim(self, address: int, write_public: Callable[[int], None]) -> None:
        if address in self.fbm:
            receipt = self.fbm.receipt_for(address)
            write_public(address)
            self.fbm.invalidate_with_compaction(receipt)
            slot = self.nfbm.touch_random(self.rng)
        else:
            slot = self.evict(address)
            write_public(address)
            self.fbm.touch_random(self.rng)
            self.nfbm.touch_slot(slot)
        self.surface.touch_bitmap(slot)

    def evict(self, address: int) -> int:
        """Release an occupied block to the public volume; returns its N-FBM slot.

        Filler is dropped. A data block moves to the stash flagged stale, so its
        old location is never handed back to the FBM.
        """
        slot = self.nfbm.slot_of(address)
        if slot is None:
            raise InvariantViolationError("evict_occupied", {"address": address})
        if address in self.filler:
            self.filler.remove(address)
        else:
            owner = self.owners.get(address)
            if owner is None or owner[0] != "data":
                raise InvariantViolationError("evict_kind", {"address": address})
            logical_id = owner[1]
            if logical_id in self.stash:
                self.stash.mark_stale(logical_id)
            elif self.stash.full:
                raise StashOverflowError(len(self.stash) + 1, self.stash.capacity)
            else:
                self.stash.put(logical_id, self.data.read(address, self.key), stale=True)
            del self.owners[address]
        self.nfbm.mark_free(slot)
        return slot

    # --- balance ---

    @property
    def imbalance(self) -> int:
        """Occupied (plus stale) minus free"""
        return self.nfbm.occupied_count + self.stash.stale_count - self.fbm.valid_count

    def rebalance(self) -> None:
        """One round-shaped slot that nudges free and occupied counts together"""
        delta = self.imbalance
        if delta >= 2 and len(self.filler) > 0:
            address = self.filler.choice(self.rng)
            slot = self.nfbm.slot_of(address)
            self.filler.remove(address)
            self.nfbm.mark_free(slot)
            self.fbm.push(address)
            self.nfbm.touch_slot(slot)
        elif delta <= -2:
            receipt = self.fbm.select_random(self.rng)
            self.fbm.invalidate_with_compaction(receipt)
            slot = self.nfbm.add_with_retry(receipt.address, self.rng)
            self.filler.add(receipt.address)
        else:
            if delta >= 2:
                logger.warning(
                    "No filler left to rebalance",
                    extra={"operation": "rebalance", "imbalance": delta},
                )
            self.fbm.touch_random(self.rng)
            slot = self.nfbm.touch_random(self.rng)
        self.surface.touch_bitmap(slot)

    # --- persistence ---

    def bitmap_positions(self) -> List[int]:
        return list(self.bitmap.positions)

    def flush_bitmap(self) -> None:
        self.bitmap.flush_all()
