"""
Encryption environment: volume keys, block sealing and randomness
"""

from .cipher import (
    IV_SIZE,
    KEY_SIZE,
    KeyRole,
    SealedBlock,
    VolumeKey,
    reencrypt,
    seal,
    unseal,
)
from .keys import SALT_SIZE, derive_volume_key
from .rng import RandomSource, random_below

__all__ = [
    "IV_SIZE",
    "KEY_SIZE",
    "SALT_SIZE",
    "KeyRole",
    "RandomSource",
    "SealedBlock",
    "VolumeKey",
    "derive_volume_key",
    "reencrypt",
    "seal",
    "random_below",
    "unseal",
]
