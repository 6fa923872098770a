"""
AES-256-CTR sealing with a fresh random IV per write
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from exceptions import ValidationError
from .rng import RandomSource

IV_SIZE = 16
KEY_SIZE = 32


class KeyRole(str, Enum):
    PUBLIC = "public"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class VolumeKey:
    role: KeyRole
    material: bytes

    def __post_init__(self):
        if len(self.material) != KEY_SIZE:
            raise ValidationError("Volume keys are 32 bytes")

    def __repr__(self) -> str:
        return f"VolumeKey(role={self.role.value})"

    @classmethod
    def generate(cls, role: KeyRole, rng: RandomSource) -> "VolumeKey":
        return cls(role=role, material=rng.bytes(KEY_SIZE))


@dataclass(frozen=True)
class SealedBlock:
    iv: bytes
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        """Inline layout: IV followed by ciphertext"""
        return self.iv + self.ciphertext

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SealedBlock":
        return cls(iv=raw[:IV_SIZE], ciphertext=raw[IV_SIZE:])


def _apply(key: VolumeKey, iv: bytes, data: bytes) -> bytes:
    ctx = Cipher(algorithms.AES(key.material), modes.CTR(iv)).encryptor()
    return ctx.update(data) + ctx.finalize()


def seal(
    key: VolumeKey, plaintext: bytes, rng: RandomSource, size: Optional[int] = None
) -> SealedBlock:
    if size is not None and len(plaintext) != size:
        raise ValidationError(
            f"Plaintext must be {size} bytes, got {len(plaintext)}"
        )
    iv = rng.bytes(IV_SIZE)
    return SealedBlock(iv=iv, ciphertext=_apply(key, iv, plaintext))


def unseal(key: VolumeKey, sealed: SealedBlock) -> bytes:
    # CTR has no integrity check; callers verify magic values where it matters
    return _apply(key, sealed.iv, sealed.ciphertext)


def reencrypt(key: VolumeKey, sealed: SealedBlock, rng: RandomSource) -> SealedBlock:
    """Same plaintext under a fresh IV"""
    return seal(key, unseal(key, sealed), rng)
