"""
DL-ORAM: position-map tree, stash, selection protocol and the ORAM itself
"""

from .oram import DlOram, hidden_write_shape, hidden_write_trace_size
from .selection import (
    BlockSampler,
    Pick,
    PickTag,
    SelectionPlan,
    SelectionProtocol,
    UniformSampler,
)
from .stash import Stash, StashEntry, StashRegion, StashState
from .surface import ChaffSurface, HiddenSurface, LiveSurface, simulate_rounds
from .tree import (
    TreeNode,
    TreeShape,
    decode_node,
    default_capacity,
    encode_node,
    hidden_volume_capacity,
    max_logical_capacity,
    nodes_for,
)

__all__ = [
    "BlockSampler",
    "ChaffSurface",
    "DlOram",
    "HiddenSurface",
    "LiveSurface",
    "Pick",
    "PickTag",
    "SelectionPlan",
    "SelectionProtocol",
    "Stash",
    "StashEntry",
    "StashRegion",
    "StashState",
    "TreeNode",
    "TreeShape",
    "UniformSampler",
    "decode_node",
    "default_capacity",
    "encode_node",
    "hidden_volume_capacity",
    "hidden_write_shape",
    "hidden_write_trace_size",
    "max_logical_capacity",
    "nodes_for",
    "simulate_rounds",
]
