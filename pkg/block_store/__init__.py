"""
Block device layer: file-backed storage, traces, snapshots and sealed regions
"""

from .sealed import NULL_INDEX, DataRegion, SealedRegion
from .store import BlockStore, IoCounters
from .superblock import Superblock
from .trace import Snapshot, TraceEntry, WriteTrace

__all__ = [
    "NULL_INDEX",
    "BlockStore",
    "DataRegion",
    "IoCounters",
    "SealedRegion",
    "Snapshot",
    "Superblock",
    "TraceEntry",
    "WriteTrace",
]
