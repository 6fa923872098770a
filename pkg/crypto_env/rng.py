"""
Cryptographically strong randomness.

``RandomSource`` draws bytes from the OS, or, when seeded, from an AES-256-CTR
keystream so test runs are reproducible. Integer helpers use rejection
sampling so every bound is exactly uniform.
"""

import hashlib
import os
from typing import List, MutableSequence, Optional, Sequence, TypeVar

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from exceptions import ValidationError

T = TypeVar("T")

_CHUNK = 1 << 16


class RandomSource:
    """Byte stream plus uniform integer helpers"""

    def __init__(self, seed: Optional[int] = None):
        self.seed = seed
        self._buffer = b""
        self._offset = 0
        self._encryptor = None
        if seed is not None:
            key = hashlib.sha256(b"dlr-rng:" + str(seed).encode()).digest()
            self._encryptor = Cipher(algorithms.AES(key), modes.CTR(b"\x00" * 16)).encryptor()

    @property
    def deterministic(self) -> bool:
        return self._encryptor is not None

    def _refill(self, minimum: int) -> None:
        size = max(_CHUNK, minimum)
        if self._encryptor is not None:
            fresh = self._encryptor.update(b"\x00" * size)
        else:
            fresh = os.urandom(size)
        self._buffer = self._buffer[self._offset:] + fresh
        self._offset = 0

    def bytes(self, count: int) -> bytes:
        if count < 0:
            raise ValidationError("Byte count must be non-negative")
        if len(self._buffer) - self._offset < count:
            self._refill(count)
        out = self._buffer[self._offset:self._offset + count]
        self._offset += count
        return out

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound)"""
        if bound < 1:
            raise ValidationError("Bound must be at least 1", field_errors={"bound": str(bound)})
        nbits = (bound - 1).bit_length()
        nbytes = (nbits + 7) // 8
        mask = (1 << nbits) - 1
        while True:
            value = int.from_bytes(self.bytes(nbytes), "little") & mask
            if value < bound:
                return value

    def coin(self) -> bool:
        return self.below(2) == 1

    def choice(self, items: Sequence[T]) -> T:
        if not items:
            raise ValidationError("Cannot choose from an empty sequence")
        return items[self.below(len(items))]

    def shuffle(self, items: MutableSequence) -> None:
        """In-place Fisher-Yates shuffle"""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: int, count: int) -> List[int]:
        """``count`` distinct integers from [0, population), in draw order"""
        if count > population:
            raise ValidationError(
                f"Cannot draw {count} distinct values from {population}"
            )
        if count * 3 > population:
            pool = list(range(population))
            for i in range(count):
                j = i + self.below(population - i)
                pool[i], pool[j] = pool[j], pool[i]
            return pool[:count]
        seen = set()
        out = []
        while len(out) < count:
            value = self.below(population)
            if value not in seen:
                seen.add(value)
                out.append(value)
        return out

    def fork(self, label: str) -> "RandomSource":
        """Independent child stream; deterministic when this source is"""
        if self.seed is None:
            return RandomSource()
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        return RandomSource(int.from_bytes(digest[:8], "little"))


def random_below(rng: RandomSource, bound: int) -> int:
    """Uniform integer in [0, bound) drawn from rng"""
    return rng.below(bound)
