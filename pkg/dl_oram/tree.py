"""
Position-map tree shape and node codec.

The tree is a dense, fixed-shape B+ tree: leaf ``j`` always maps logical ids
``[j * leaf_fanout, (j + 1) * leaf_fanout)``. Nodes live in the data region
like any other hidden block. An internal entry holds the child's address and
the child's N-FBM slot; the root's pair is kept in the root pointer.
"""

import math
import struct
from dataclasses import dataclass, field
from typing import List, Tuple

from exceptions import CorruptDeviceError
from freemaps import NULL_ADDRESS, NULL_SLOT
from models.device import DeviceGeometry

NODE_MAGIC = 0x444C4E44
KIND_LEAF = 1
KIND_INTERNAL = 2

_HEADER = struct.Struct("<BBHI")
_LEAF = struct.Struct("<QQI")
_INTERNAL = struct.Struct("<QI")

Location = Tuple[int, int]  # (address, nfbm slot)
NodeId = Tuple[int, int]  # (level, index); level 0 is the root
NULL_LOCATION: Location = (NULL_ADDRESS, NULL_SLOT)


@dataclass(frozen=True)
class TreeShape:
    logical_capacity: int
    leaf_fanout: int
    internal_fanout: int
    level_sizes: Tuple[int, ...]

    @classmethod
    def for_capacity(
        cls, capacity: int, leaf_fanout: int, internal_fanout: int
    ) -> "TreeShape":
        sizes = [max(1, math.ceil(capacity / leaf_fanout))]
        while sizes[-1] > 1:
            sizes.append(math.ceil(sizes[-1] / internal_fanout))
        return cls(capacity, leaf_fanout, internal_fanout, tuple(reversed(sizes)))

    @classmethod
    def for_geometry(cls, geometry: DeviceGeometry, capacity: int) -> "TreeShape":
        return cls.for_capacity(capacity, geometry.leaf_fanout, geometry.internal_fanout)

    @property
    def depth(self) -> int:
        return len(self.level_sizes)

    @property
    def leaf_level(self) -> int:
        return self.depth - 1

    @property
    def node_count(self) -> int:
        return sum(self.level_sizes)

    def path(self, logical_id: int) -> List[NodeId]:
        """Nodes from root to the leaf that maps ``logical_id``"""
        index = logical_id // self.leaf_fanout
        nodes = []
        for level in range(self.leaf_level, -1, -1):
            nodes.append((level, index))
            index //= self.internal_fanout
        nodes.reverse()
        return nodes

    def child_range(self, level: int, index: int) -> range:
        first = index * self.internal_fanout
        return range(first, min(first + self.internal_fanout, self.level_sizes[level + 1]))

    def leaf_ids(self, index: int) -> range:
        first = index * self.leaf_fanout
        return range(first, min(first + self.leaf_fanout, self.logical_capacity))

    def entry_count(self, level: int, index: int) -> int:
        if level == self.leaf_level:
            return len(self.leaf_ids(index))
        return len(self.child_range(level, index))


def nodes_for(capacity: int, leaf_fanout: int, internal_fanout: int) -> int:
    return TreeShape.for_capacity(capacity, leaf_fanout, internal_fanout).node_count


def max_logical_capacity(occupancy: int, leaf_fanout: int, internal_fanout: int) -> int:
    """Largest L whose data plus tree nodes fit in ``occupancy`` blocks"""
    low, high = 0, occupancy
    while low < high:
        mid = (low + high + 1) // 2
        if mid + nodes_for(mid, leaf_fanout, internal_fanout) <= occupancy:
            low = mid
        else:
            high = mid - 1
    return low


def default_capacity(geometry: DeviceGeometry) -> int:
    return max_logical_capacity(
        geometry.oram_occupancy, geometry.leaf_fanout, geometry.internal_fanout
    )


def hidden_volume_capacity(geometry: DeviceGeometry) -> int:
    """Hidden volume size of a formatted device"""
    return min(geometry.default_hidden_blocks, default_capacity(geometry))


@dataclass
class TreeNode:
    level: int
    index: int
    address: int = NULL_ADDRESS
    slot: int = NULL_SLOT
    entries: List[Location] = field(default_factory=list)

    @property
    def location(self) -> Location:
        return (self.address, self.slot)


def encode_node(node: TreeNode, shape: TreeShape, block_size: int) -> bytes:
    leaf = node.level == shape.leaf_level
    parts = [
        _HEADER.pack(
            KIND_LEAF if leaf else KIND_INTERNAL, node.level, len(node.entries), NODE_MAGIC
        )
    ]
    if leaf:
        first = node.index * shape.leaf_fanout
        for offset, (address, slot) in enumerate(node.entries):
            logical = first + offset if address != NULL_ADDRESS else NULL_ADDRESS
            parts.append(_LEAF.pack(address, logical, slot))
    else:
        for address, slot in node.entries:
            parts.append(_INTERNAL.pack(address, slot))
    raw = b"".join(parts)
    return raw + b"\x00" * (block_size - len(raw))


def decode_node(raw: bytes, shape: TreeShape, level: int, index: int) -> List[Location]:
    kind, stored_level, count, magic = _HEADER.unpack_from(raw)
    leaf = level == shape.leaf_level
    if (
        magic != NODE_MAGIC
        or stored_level != level
        or kind != (KIND_LEAF if leaf else KIND_INTERNAL)
        or count != shape.entry_count(level, index)
    ):
        raise CorruptDeviceError(
            "Position-map node failed validation",
            structure="position_map",
            details={"level": level, "index": index},
        )
    entries = []
    offset = _HEADER.size
    if leaf:
        for _ in range(count):
            address, _logical, slot = _LEAF.unpack_from(raw, offset)
            entries.append((address, slot))
            offset += _LEAF.size
    else:
        for _ in range(count):
            entries.append(_INTERNAL.unpack_from(raw, offset))
            offset += _INTERNAL.size
    return entries
