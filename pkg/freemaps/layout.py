"""
Matrix geometry shared by the FBM and the N-FBM
"""

import struct
from dataclasses import dataclass
from typing import List, NamedTuple

from models.device import DeviceGeometry

NULL_ADDRESS = 0xFFFF_FFFF_FFFF_FFFF
NULL_SLOT = 0xFFFF_FFFF


class NfbmCoord(NamedTuple):
    row: int
    column: int


@dataclass(frozen=True)
class MatrixLayout:
    """
    ``n_slots`` entries laid out row-major over ``columns`` disk blocks.

    Column block ``c`` holds the entries of every row at column ``c``, so
    slot ``s`` lives in block ``s % columns`` at position ``s // columns``.
    """

    n_slots: int
    columns: int

    @classmethod
    def for_geometry(cls, geometry: DeviceGeometry) -> "MatrixLayout":
        return cls(n_slots=geometry.n_blocks, columns=geometry.columns)

    @property
    def rows(self) -> int:
        return -(-self.n_slots // self.columns)

    def coord(self, slot: int) -> NfbmCoord:
        return NfbmCoord(slot // self.columns, slot % self.columns)

    def slot(self, coord: NfbmCoord) -> int:
        return coord.row * self.columns + coord.column

    def column_of(self, slot: int) -> int:
        return slot % self.columns

    def row_of(self, slot: int) -> int:
        return slot // self.columns

    def column_slots(self, column: int) -> range:
        return range(column, self.n_slots, self.columns)

    def row_length(self, row: int) -> int:
        start = row * self.columns
        return max(0, min(self.columns, self.n_slots - start))

    def encode_column(self, slots: List[int], column: int) -> bytes:
        values = [slots[s] for s in self.column_slots(column)]
        return struct.pack(f"<{len(values)}Q", *values)

    def decode_column(self, payload: bytes, column: int, into: List[int]) -> None:
        members = self.column_slots(column)
        values = struct.unpack_from(f"<{len(members)}Q", payload)
        for slot, value in zip(members, values):
            into[slot] = value
