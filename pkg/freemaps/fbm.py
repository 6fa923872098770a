"""
Free-block matrix (FBM).

Addresses of every free data block, scattered over the column blocks at
random coordinates. A one-block header of per-row counters tracks how many
valid entries each row holds. Invalid entries always come first in row-major
order, so the valid entries are exactly the slots from ``boundary`` on and the
i-th valid entry is slot ``boundary + i``.

The matrix is mirrored in memory and written through when ``columns`` and
``header`` regions are attached; without them it is a pure in-memory model.
"""

import logging
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from block_store import IoCounters, SealedRegion
from crypto_env import RandomSource
from exceptions import EmptyMatrixError, InvariantViolationError, StaleReceiptError
from .layout import NULL_ADDRESS, MatrixLayout, NfbmCoord

logger = logging.getLogger(__name__)


@dataclass
class FbmReceipt:
    """Outstanding selection; resolved exactly once."""

    slot: int
    address: int
    index: int

    def coord(self, layout: MatrixLayout) -> NfbmCoord:
        return layout.coord(self.slot)


class Fbm:
    def __init__(
        self,
        layout: MatrixLayout,
        slots: List[int],
        boundary: int,
        columns: Optional[SealedRegion] = None,
        header: Optional[SealedRegion] = None,
    ):
        self.layout = layout
        self.slots = slots
        self.columns = columns
        self.header = header
        self.stats = IoCounters()
        self._boundary = boundary
        self.counts = self._counts_for(boundary)
        self._where: Dict[int, int] = {
            slots[s]: s for s in range(boundary, layout.n_slots)
        }
        self._outstanding: Dict[int, FbmReceipt] = {}

    # --- construction ---

    @classmethod
    def init_full(
        cls,
        layout: MatrixLayout,
        rng: RandomSource,
        addresses: Optional[Sequence[int]] = None,
        columns: Optional[SealedRegion] = None,
        header: Optional[SealedRegion] = None,
    ) -> "Fbm":
        """Every given address (default: all N) at a random coordinate."""
        addresses = list(range(layout.n_slots) if addresses is None else addresses)
        rng.shuffle(addresses)
        boundary = layout.n_slots - len(addresses)
        slots = [NULL_ADDRESS] * boundary + addresses
        return cls(layout, slots, boundary, columns, header)

    @classmethod
    def load(
        cls, layout: MatrixLayout, columns: SealedRegion, header: SealedRegion
    ) -> "Fbm":
        counts = struct.unpack_from(f"<{layout.rows}I", header.read(0))
        slots = [NULL_ADDRESS] * layout.n_slots
        for column in range(layout.columns):
            layout.decode_column(columns.read(column), column, slots)
        boundary = layout.n_slots - sum(counts)
        fbm = cls(layout, slots, boundary, columns, header)
        fbm.counts = list(counts)
        return fbm

    @classmethod
    def from_rows(cls, rows: List[List[Optional[int]]]) -> "Fbm":
        """In-memory matrix from explicit rows; ``None`` marks an invalid entry."""
        width = len(rows[0])
        flat = [NULL_ADDRESS if v is None else v for row in rows for v in row]
        layout = MatrixLayout(n_slots=len(flat), columns=width)
        boundary = next(
            (i for i, v in enumerate(flat) if v != NULL_ADDRESS), len(flat)
        )
        if any(v == NULL_ADDRESS for v in flat[boundary:]):
            raise InvariantViolationError("fbm_compactness")
        return cls(layout, flat, boundary)

    def _counts_for(self, boundary: int) -> List[int]:
        counts = []
        for row in range(self.layout.rows):
            start = row * self.layout.columns
            stop = start + self.layout.row_length(row)
            counts.append(max(0, stop - max(start, boundary)))
        return counts

    # --- state ---

    @property
    def valid_count(self) -> int:
        return self.layout.n_slots - self._boundary

    @property
    def boundary(self) -> int:
        return self._boundary

    def __len__(self) -> int:
        return self.valid_count

    def __contains__(self, address: int) -> bool:
        return address in self._where

    def valid_addresses(self) -> List[int]:
        return self.slots[self._boundary:]

    def slot_of(self, address: int) -> Optional[int]:
        return self._where.get(address)

    def is_outstanding(self, slot: int) -> bool:
        return slot in self._outstanding

    @property
    def outstanding_count(self) -> int:
        return len(self._outstanding)

    def is_compact(self) -> bool:
        """Header counters describe a single run of valid entries ending at the last slot"""
        return self.counts == self._counts_for(self.layout.n_slots - sum(self.counts))

    # --- selection ---

    def select_index(self, index: int) -> FbmReceipt:
        """Receipt for the index-th valid entry (0-based, row-major)"""
        if self.valid_count == 0:
            raise EmptyMatrixError("fbm")
        if not 0 <= index < self.valid_count:
            raise IndexError(index)
        # header + one column, both served from the mirror
        self.stats.reads += 2
        slot = self._boundary + index
        if slot in self._outstanding:
            raise InvariantViolationError("fbm_receipt_unique", {"slot": slot})
        receipt = FbmReceipt(slot=slot, address=self.slots[slot], index=index)
        self._outstanding[slot] = receipt
        return receipt

    def select_random(self, rng: RandomSource) -> FbmReceipt:
        if self.valid_count == 0:
            raise EmptyMatrixError("fbm")
        return self.select_index(rng.below(self.valid_count))

    def select_many(self, rng: RandomSource, count: int) -> List[FbmReceipt]:
        """``count`` distinct entries, each uniform among the valid ones"""
        if count > self.valid_count:
            raise EmptyMatrixError("fbm")
        return [self.select_index(i) for i in rng.sample(self.valid_count, count)]

    def receipt_for(self, address: int) -> FbmReceipt:
        slot = self._where[address]
        receipt = FbmReceipt(slot=slot, address=address, index=slot - self._boundary)
        self._outstanding[slot] = receipt
        return receipt

    def _resolve(self, receipt: FbmReceipt) -> None:
        if self._outstanding.get(receipt.slot) is not receipt:
            raise StaleReceiptError(receipt.slot)
        del self._outstanding[receipt.slot]

    # --- mutation ---

    def invalidate_with_compaction(self, receipt: FbmReceipt) -> None:
        """Drop the selected entry; the first valid entry moves into its slot."""
        self._resolve(receipt)
        victim, donor = receipt.slot, self._boundary
        donor_address = self.slots[donor]
        del self._where[self.slots[victim]]
        if victim != donor:
            self.slots[victim] = donor_address
            self._where[donor_address] = victim
            moved = self._outstanding.pop(donor, None)
            if moved is not None:
                moved.slot = victim
                self._outstanding[victim] = moved
        self.counts[self.layout.row_of(donor)] -= 1
        self._boundary += 1
        self._write_column(victim)
        self._write_header()

    def replace_in_place(self, receipt: FbmReceipt, new_address: int) -> None:
        """Selected entry becomes ``new_address``; counters unchanged."""
        self._resolve(receipt)
        del self._where[self.slots[receipt.slot]]
        self.slots[receipt.slot] = new_address
        self._where[new_address] = receipt.slot
        self._write_column(receipt.slot)
        self._write_header()

    def return_receipt(self, receipt: FbmReceipt) -> None:
        """Entry stays where it is; its column and the header are reencrypted."""
        self._resolve(receipt)
        self._write_column(receipt.slot)
        self._write_header()

    def release(self, receipt: FbmReceipt) -> None:
        """Forget an unused selection without touching the disk."""
        self._resolve(receipt)

    def push(self, address: int) -> None:
        """Add a free address just before the valid run."""
        if self._boundary == 0:
            raise InvariantViolationError("fbm_capacity")
        self._boundary -= 1
        slot = self._boundary
        self.slots[slot] = address
        self._where[address] = slot
        self.counts[self.layout.row_of(slot)] += 1
        self._write_column(slot)
        self._write_header()

    def touch_random(self, rng: RandomSource) -> None:
        """Reencrypt one random column and the header."""
        self._write_column(rng.below(self.layout.n_slots))
        self._write_header()

    # --- persistence ---

    def _write_column(self, slot: int) -> None:
        if self.columns is None:
            return
        column = self.layout.column_of(slot)
        self.columns.write(column, self.layout.encode_column(self.slots, column))
        self.stats.writes += 1

    def _write_header(self) -> None:
        if self.header is None:
            return
        self.header.write(0, struct.pack(f"<{len(self.counts)}I", *self.counts))
        self.stats.writes += 1

    def attach(self, columns: SealedRegion, header: SealedRegion) -> None:
        self.columns = columns
        self.header = header

    def flush_all(self) -> None:
        if self.columns is None:
            return
        for column in range(self.layout.columns):
            self.columns.write(column, self.layout.encode_column(self.slots, column))
        self._write_header()

    def inject_header_fault(self, row: int, delta: int) -> None:
        """Test hook: persist a header whose counters no longer match the matrix"""
        self.counts[row] += delta
        self._write_header()
