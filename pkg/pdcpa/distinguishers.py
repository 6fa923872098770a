"""
Built-in adversaries for the PD-CPA game.

None of them knows the coin of earlier rounds; each compares the newest
observation with statistics of the ones before it.
"""

from collections import Counter
from statistics import median
from typing import Dict, List, Sequence

from exceptions import ValidationError
from models.device import DeviceGeometry, Region
from .game import Distinguisher, Observation


class ConstantDistinguisher:
    name = "constant"

    def __init__(self, answer: int = 0):
        self.answer = answer

    def reset(self, geometry: DeviceGeometry) -> None:
        pass

    def guess(self, history: Sequence[Observation]) -> int:
        return self.answer


class CardinalityDistinguisher:
    """Guesses 0 when the newest diff is larger than the running median"""

    name = "cardinality"

    def reset(self, geometry: DeviceGeometry) -> None:
        self._sizes: List[int] = []

    def guess(self, history: Sequence[Observation]) -> int:
        size = len(history[-1].changed)
        previous = self._sizes[:]
        self._sizes.append(size)
        if not previous:
            return 0
        return 0 if size > median(previous) else 1


class FrequencyDistinguisher:
    """Scores a diff by how often its data blocks changed before.

    Hidden writes would keep returning to the same hidden-occupied blocks; a
    diff concentrated on frequently changed blocks is guessed to be O0.
    """

    name = "frequency"

    def reset(self, geometry: DeviceGeometry) -> None:
        self.data_start = geometry.region_start(Region.DATA)
        self._counts: Counter = Counter()
        self._scores: List[float] = []

    def guess(self, history: Sequence[Observation]) -> int:
        data = [i for i in history[-1].changed if i >= self.data_start]
        score = sum(self._counts[i] for i in data) / len(data) if data else 0.0
        previous = self._scores[:]
        self._scores.append(score)
        self._counts.update(data)
        if not previous:
            return 0
        return 0 if score > median(previous) else 1


class RegionHistogramDistinguisher:
    """Guesses 0 when the newest per-region histogram is far from the mean"""

    name = "region_histogram"

    def reset(self, geometry: DeviceGeometry) -> None:
        self._totals: Dict[Region, int] = Counter()
        self._rounds = 0
        self._distances: List[float] = []

    def guess(self, history: Sequence[Observation]) -> int:
        current = history[-1].regions
        if self._rounds:
            distance = sum(
                abs(current.get(r, 0) - self._totals[r] / self._rounds)
                for r in set(current) | set(self._totals)
            )
        else:
            distance = 0.0
        previous = self._distances[:]
        self._distances.append(distance)
        self._totals.update(current)
        self._rounds += 1
        if not previous:
            return 0
        return 0 if distance > median(previous) else 1


DISTINGUISHERS = {
    ConstantDistinguisher.name: ConstantDistinguisher,
    CardinalityDistinguisher.name: CardinalityDistinguisher,
    FrequencyDistinguisher.name: FrequencyDistinguisher,
    RegionHistogramDistinguisher.name: RegionHistogramDistinguisher,
}


def get_distinguisher(name: str) -> Distinguisher:
    try:
        return DISTINGUISHERS[name]()
    except KeyError:
        raise ValidationError(
            f"Unknown distinguisher '{name}'",
            field_errors={"distinguisher": f"one of {', '.join(sorted(DISTINGUISHERS))}"},
        )
