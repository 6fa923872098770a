"""
Free-block selection protocol.

A run draws k free candidates from the FBM and k occupied candidates from the
N-FBM, shuffles the 2k of them into a combined set and keeps k picks. Each
kept pick becomes one round. Draws are read-only: the caller decides which
picks get used and only then touches the disk.

The legacy protocol replaces the occupied set with k blocks drawn from all
non-public blocks, resolving collisions with the free set by a coin flip.
It is kept to reproduce the free-block bias it is known for.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Protocol, Sequence

from crypto_env import RandomSource
from exceptions import EmptyMatrixError, ValidationError
from freemaps import Fbm, FbmReceipt, Nfbm

logger = logging.getLogger(__name__)


class PickTag(str, Enum):
    FREE = "free"
    OCCUPIED = "occupied"
    RANDOM = "random"


@dataclass
class Pick:
    tag: PickTag
    address: int
    receipt: Optional[FbmReceipt] = None
    slot: Optional[int] = None
    nfbm_slot: Optional[int] = None
    acquired: bool = False
    # filled in by the ORAM when the pick gets a block to hold
    item: Optional[Any] = None
    old: Optional[Any] = None


@dataclass
class SelectionPlan:
    picks: List[Pick]
    leftovers: List[FbmReceipt] = field(default_factory=list)
    rounds_per_run: int = 0

    @property
    def rounds(self) -> int:
        return len(self.picks)

    def free_picks(self) -> List[Pick]:
        return [p for p in self.picks if p.tag is PickTag.FREE]

    def acquired(self) -> List[Pick]:
        return [p for p in self.picks if p.acquired]

    def runs(self) -> List[List[Pick]]:
        k = self.rounds_per_run
        return [self.picks[i:i + k] for i in range(0, len(self.picks), k)]


class BlockSampler(Protocol):
    """Source of uniformly random non-public data addresses"""

    def __len__(self) -> int: ...

    def sample(self, rng: RandomSource, count: int) -> List[int]: ...

    def addresses(self) -> List[int]: ...


class UniformSampler:
    """Sampler over a fixed address list"""

    def __init__(self, addresses: Sequence[int]):
        self._addresses = list(addresses)

    def __len__(self) -> int:
        return len(self._addresses)

    def sample(self, rng: RandomSource, count: int) -> List[int]:
        return [self._addresses[i] for i in rng.sample(len(self._addresses), count)]

    def addresses(self) -> List[int]:
        return list(self._addresses)


class SelectionProtocol:
    def __init__(
        self,
        fbm: Fbm,
        nfbm: Nfbm,
        rounds: int,
        sampler: BlockSampler,
        legacy: bool = False,
    ):
        if rounds < 1:
            raise ValidationError("Selection needs at least one round")
        self.fbm = fbm
        self.nfbm = nfbm
        self.k = rounds
        self.sampler = sampler
        self.legacy = legacy

    def draw(self, rng: RandomSource, runs: int = 1) -> SelectionPlan:
        """Draw ``runs`` runs of k picks; receipts stay outstanding"""
        k = self.k
        receipts = self.fbm.select_many(rng, k * runs)
        if self.legacy:
            return self._draw_legacy(rng, receipts, runs)
        occupied = self.nfbm.sample_occupied(rng, k * runs)
        picks: List[Pick] = []
        leftovers: List[FbmReceipt] = []
        for run in range(runs):
            combined = [
                Pick(PickTag.FREE, r.address, receipt=r)
                for r in receipts[run * k:(run + 1) * k]
            ] + [
                Pick(PickTag.OCCUPIED, address, slot=slot)
                for slot, address in occupied[run * k:(run + 1) * k]
            ]
            rng.shuffle(combined)
            picks.extend(combined[:k])
            leftovers.extend(p.receipt for p in combined[k:] if p.receipt is not None)
        return SelectionPlan(picks=picks, leftovers=leftovers, rounds_per_run=k)

    def _draw_legacy(
        self, rng: RandomSource, receipts: List[FbmReceipt], runs: int
    ) -> SelectionPlan:
        k = self.k
        picks: List[Pick] = []
        leftovers: List[FbmReceipt] = []
        for run in range(runs):
            free = receipts[run * k:(run + 1) * k]
            chosen: List[int] = []
            while len(chosen) < k:
                address = self.sampler.sample(rng, 1)[0]
                if address in chosen:
                    continue
                clash = next((i for i, r in enumerate(free) if r.address == address), None)
                if clash is not None:
                    if rng.coin():
                        continue
                    self.fbm.release(free[clash])
                    free[clash] = self._fresh_receipt(rng, address)
                chosen.append(address)
            combined = [Pick(PickTag.FREE, r.address, receipt=r) for r in free] + [
                Pick(PickTag.RANDOM, a, slot=self.nfbm.slot_of(a)) for a in chosen
            ]
            rng.shuffle(combined)
            picks.extend(combined[:k])
            leftovers.extend(p.receipt for p in combined[k:] if p.receipt is not None)
        return SelectionPlan(picks=picks, leftovers=leftovers, rounds_per_run=k)

    def _fresh_receipt(self, rng: RandomSource, exclude: int) -> FbmReceipt:
        """Redraw a free item that no receipt holds and that is not ``exclude``"""
        if self.fbm.valid_count - self.fbm.outstanding_count < 2:
            raise EmptyMatrixError("fbm")
        while True:
            index = rng.below(self.fbm.valid_count)
            slot = self.fbm.boundary + index
            if self.fbm.is_outstanding(slot) or self.fbm.slots[slot] == exclude:
                continue
            return self.fbm.select_index(index)

    def draw_slots(self, plan: SelectionPlan, rng: RandomSource) -> None:
        """One N-FBM slot draw per free pick; distinct free slots are acquired"""
        claimed = set()
        for pick in plan.free_picks():
            slot, free = self.nfbm.draw_slot(rng)
            pick.nfbm_slot = slot
            if free and slot not in claimed:
                pick.acquired = True
                claimed.add(slot)

    def release(self, plan: SelectionPlan) -> None:
        """Forget every outstanding receipt of an unexecuted plan"""
        for pick in plan.free_picks():
            self.fbm.release(pick.receipt)
        for receipt in plan.leftovers:
            self.fbm.release(receipt)
