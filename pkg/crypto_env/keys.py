"""
Password-based volume key derivation (argon2id)
"""

import logging

from argon2.low_level import Type, hash_secret_raw

from exceptions import ValidationError
from models.device import KdfParams
from .cipher import KEY_SIZE, KeyRole, VolumeKey

logger = logging.getLogger(__name__)

SALT_SIZE = 16


def derive_volume_key(
    password: str, salt: bytes, role: KeyRole, params: KdfParams
) -> VolumeKey:
    """Derive a 256-bit volume key. Both volumes share the salt, so their
    passwords must differ."""
    if not password:
        raise ValidationError("Password must not be empty")
    if len(salt) != SALT_SIZE:
        raise ValidationError(f"Salt must be {SALT_SIZE} bytes")
    material = hash_secret_raw(
        secret=password.encode("utf-8"),
        salt=salt,
        time_cost=params.time_cost,
        memory_cost=params.memory_cost,
        parallelism=params.parallelism,
        hash_len=KEY_SIZE,
        type=Type.ID,
    )
    logger.debug("Derived volume key", extra={"event_type": "key_derivation"})
    return VolumeKey(role=role, material=material)
