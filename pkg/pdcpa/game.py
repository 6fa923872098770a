"""
PD-CPA game.

Each round the challenger flips a coin, runs one of two access patterns on the
device and hands the adversary a fresh snapshot. The adversary sees only the
history of snapshot diffs and must name the pattern.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Protocol, Sequence, Tuple

from block_store import Snapshot
from crypto_env import RandomSource
from datalair import DataLairDevice
from exceptions import GeometryMismatchError, IllegalPatternError, ValidationError
from models.device import DeviceGeometry, Region
from models.reports import GameResult
from .stats import binomial_ci, binomial_p_value

logger = logging.getLogger(__name__)


class OpKind(str, Enum):
    PUB_WRITE = "pub_write"
    PUB_READ = "pub_read"
    HID_WRITE = "hid_write"
    HID_READ = "hid_read"


@dataclass(frozen=True)
class Op:
    kind: OpKind
    target: int
    data: Optional[bytes] = None

    @property
    def public(self) -> bool:
        return self.kind in (OpKind.PUB_WRITE, OpKind.PUB_READ)


@dataclass
class AccessPattern:
    """Ordered block operations on the two volumes"""

    ops: List[Op] = field(default_factory=list)

    def pub_write(self, target: int, data: bytes) -> "AccessPattern":
        self.ops.append(Op(OpKind.PUB_WRITE, target, data))
        return self

    def pub_read(self, target: int) -> "AccessPattern":
        self.ops.append(Op(OpKind.PUB_READ, target))
        return self

    def hid_write(self, target: int, data: bytes) -> "AccessPattern":
        self.ops.append(Op(OpKind.HID_WRITE, target, data))
        return self

    def hid_read(self, target: int) -> "AccessPattern":
        self.ops.append(Op(OpKind.HID_READ, target))
        return self

    def public_writes(self) -> List[Op]:
        return [op for op in self.ops if op.kind is OpKind.PUB_WRITE]

    def hidden_writes(self) -> List[Op]:
        return [op for op in self.ops if op.kind is OpKind.HID_WRITE]

    def __len__(self) -> int:
        return len(self.ops)


def paired_patterns(
    device: DataLairDevice, rng: RandomSource, public_writes: int = 4
) -> Tuple[AccessPattern, AccessPattern]:
    """O0 interleaves one hidden write per public write; O1 has the public writes only"""
    block_size = device.geometry.block_size
    with_hidden, public_only = AccessPattern(), AccessPattern()
    for public_id in range(min(public_writes, device.public_blocks)):
        block = rng.bytes(block_size)
        with_hidden.pub_write(public_id, block)
        public_only.pub_write(public_id, block)
        with_hidden.hid_write(rng.below(device.hidden_capacity), rng.bytes(block_size))
    return with_hidden, public_only


def check_legal(first: AccessPattern, second: AccessPattern, phi: int) -> None:
    """Both patterns carry the same public writes and at most φ hidden
    writes per public write"""
    if first.public_writes() != second.public_writes():
        raise IllegalPatternError("Patterns must contain the same public writes")
    for name, pattern in (("O0", first), ("O1", second)):
        allowed = phi * len(pattern.public_writes())
        if len(pattern.hidden_writes()) > allowed:
            raise IllegalPatternError(
                f"{name} has more hidden writes than phi allows",
                details={"hidden_writes": len(pattern.hidden_writes()), "allowed": allowed},
            )


def execute(device: DataLairDevice, pattern: AccessPattern) -> None:
    for op in pattern.ops:
        if op.kind is OpKind.PUB_WRITE:
            device.public_write(op.target, op.data)
        elif op.kind is OpKind.PUB_READ:
            device.public_read(op.target)
        elif op.kind is OpKind.HID_WRITE:
            device.hidden_write(op.target, op.data)
        else:
            device.hidden_read(op.target)


def diff(before: Snapshot, after: Snapshot) -> FrozenSet[int]:
    """Indices of blocks whose content changed"""
    if len(before) != len(after) or before.data_start != after.data_start:
        raise GeometryMismatchError("Snapshots come from different geometries")
    return after.changed_since(before)


@dataclass(frozen=True)
class Observation:
    """What the adversary learns from one snapshot diff"""

    changed: FrozenSet[int]
    regions: Dict[Region, int]

    @classmethod
    def from_diff(cls, changed: FrozenSet[int], geometry: DeviceGeometry) -> "Observation":
        return cls(changed, dict(Counter(geometry.region_of(i) for i in changed)))


class Distinguisher(Protocol):
    name: str

    def reset(self, geometry: DeviceGeometry) -> None: ...

    def guess(self, history: Sequence[Observation]) -> int:
        """Guess b for the newest round; ``history[-1]`` belongs to it"""
        ...


def run_game(
    device: DataLairDevice,
    first: AccessPattern,
    second: AccessPattern,
    rounds: int,
    distinguisher: Distinguisher,
    rng: RandomSource,
    granularity: str = "round",
    confidence: float = 0.99,
) -> GameResult:
    """Play ``rounds`` rounds on a mounted device and score the adversary"""
    if granularity not in ("round", "operation"):
        raise ValidationError("granularity must be 'round' or 'operation'")
    if rounds < 1:
        raise ValidationError("A game needs at least one round")
    check_legal(first, second, device.config.phi)

    geometry = device.geometry
    distinguisher.reset(geometry)
    history: List[Observation] = []
    wins = 0
    changed_total = 0
    snapshot = device.store.snapshot()
    for _ in range(rounds):
        b = int(rng.coin())
        pattern = second if b else first
        if granularity == "round":
            execute(device, pattern)
            after = device.store.snapshot()
            changed = diff(snapshot, after)
            history.append(Observation.from_diff(changed, geometry))
            changed_total += len(changed)
            snapshot = after
        else:
            for op in pattern.ops:
                execute(device, AccessPattern([op]))
                after = device.store.snapshot()
                changed = diff(snapshot, after)
                history.append(Observation.from_diff(changed, geometry))
                changed_total += len(changed)
                snapshot = after
        if distinguisher.guess(history) == b:
            wins += 1

    low, high = binomial_ci(wins, rounds, confidence)
    result = GameResult(
        rounds=rounds,
        wins=wins,
        win_rate=wins / rounds,
        ci_low=low,
        ci_high=high,
        p_value=binomial_p_value(wins, rounds),
        distinguisher=distinguisher.name,
        granularity=granularity,
        mean_changed_blocks=changed_total / rounds,
    )
    logger.info(
        f"Game finished: {distinguisher.name} won {wins}/{rounds}",
        extra={"operation": "game", "event_type": "game_result"},
    )
    return result
