"""
Set with O(1) add, remove and uniform random access.
"""

from typing import Dict, Generic, Iterable, Iterator, List, TypeVar

from crypto_env import RandomSource

T = TypeVar("T")


class IndexedSet(Generic[T]):
    """Dense list of members plus a member -> position index.

    Removal swaps the last member into the hole, so the list never has gaps.
    """

    def __init__(self, items: Iterable[T] = ()):
        self._items: List[T] = []
        self._pos: Dict[T, int] = {}
        for item in items:
            self.add(item)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: object) -> bool:
        return item in self._pos

    def __iter__(self) -> Iterator[T]:
        return iter(list(self._items))

    def add(self, item: T) -> None:
        if item in self._pos:
            return
        self._pos[item] = len(self._items)
        self._items.append(item)

    def remove(self, item: T) -> None:
        index = self._pos.pop(item)
        last = self._items.pop()
        if index < len(self._items):
            self._items[index] = last
            self._pos[last] = index

    def discard(self, item: T) -> None:
        if item in self._pos:
            self.remove(item)

    def at(self, index: int) -> T:
        return self._items[index]

    def choice(self, rng: RandomSource) -> T:
        return self._items[rng.below(len(self._items))]

    def sample(self, rng: RandomSource, count: int) -> List[T]:
        """``count`` distinct members chosen uniformly"""
        return [self._items[i] for i in rng.sample(len(self._items), count)]
