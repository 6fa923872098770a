"""
Write traces and device snapshots
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Set, Tuple

from models.device import Region


@dataclass(frozen=True)
class TraceEntry:
    index: int
    region: Region


@dataclass
class WriteTrace:
    """Ordered physical writes (and reads) issued between begin/end_trace."""

    label: str
    entries: List[TraceEntry] = field(default_factory=list)
    reads: List[TraceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def indices(self) -> List[int]:
        return [entry.index for entry in self.entries]

    def changed(self) -> Set[int]:
        return {entry.index for entry in self.entries}

    def shape(self) -> Dict[Region, int]:
        """Write count per region"""
        return dict(Counter(entry.region for entry in self.entries))

    def read_shape(self) -> Dict[Region, int]:
        return dict(Counter(entry.region for entry in self.reads))

    def in_region(self, region: Region) -> List[int]:
        return [entry.index for entry in self.entries if entry.region == region]


@dataclass(frozen=True)
class Snapshot:
    """Per-block content digests of the whole device"""

    digests: Tuple[bytes, ...]
    data_start: int = 0

    def __len__(self) -> int:
        return len(self.digests)

    def changed_since(self, earlier: "Snapshot") -> FrozenSet[int]:
        if len(earlier) != len(self):
            raise ValueError("Snapshots cover different devices")
        return frozenset(
            i for i, (a, b) in enumerate(zip(earlier.digests, self.digests)) if a != b
        )
