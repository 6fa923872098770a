"""
Shared fixtures: a small geometry, seeded randomness, cheap key derivation
and formatted devices in both modes
"""

import pytest

from block_store import BlockStore
from crypto_env import KeyRole, RandomSource, VolumeKey
from datalair import DataLairDevice
from models.device import DeviceGeometry, KdfParams

N_BLOCKS = 256
BLOCK_SIZE = 512
PUBLIC_PASSWORD = "correct horse"
HIDDEN_PASSWORD = "battery staple"


@pytest.fixture
def fast_kdf():
    """argon2id at its cheapest legal setting"""
    return KdfParams(time_cost=1, memory_cost=8, parallelism=1)


@pytest.fixture
def rng():
    return RandomSource(seed=1234)


@pytest.fixture
def geometry():
    """N=256, B=512: 5 matrix columns, 62 addresses per block"""
    return DeviceGeometry(n_blocks=N_BLOCKS, block_size=BLOCK_SIZE)


@pytest.fixture
def store(tmp_path, geometry):
    with BlockStore.open_or_create(tmp_path / "store.img", geometry) as opened:
        yield opened


@pytest.fixture
def hidden_key(rng):
    return VolumeKey.generate(KeyRole.HIDDEN, rng.fork("hidden-key"))


@pytest.fixture
def public_key(rng):
    return VolumeKey.generate(KeyRole.PUBLIC, rng.fork("public-key"))


@pytest.fixture
def make_block():
    """Block of ``BLOCK_SIZE`` bytes filled with one value"""

    def _make(value: int, size: int = BLOCK_SIZE) -> bytes:
        return bytes([value % 256]) * size

    return _make


@pytest.fixture
def device_path(tmp_path):
    return tmp_path / "device.img"


@pytest.fixture
def hidden_device(device_path, fast_kdf, rng):
    """Formatted PUB_HID device"""
    device = DataLairDevice.format(
        device_path,
        N_BLOCKS,
        PUBLIC_PASSWORD,
        HIDDEN_PASSWORD,
        block_size=BLOCK_SIZE,
        kdf=fast_kdf,
        rng=rng.fork("hidden-device"),
    )
    yield device
    device.unmount()


@pytest.fixture
def public_device(device_path, fast_kdf, rng):
    """Formatted ONLY_PUB device"""
    device = DataLairDevice.format(
        device_path,
        N_BLOCKS,
        PUBLIC_PASSWORD,
        block_size=BLOCK_SIZE,
        kdf=fast_kdf,
        rng=rng.fork("public-device"),
    )
    yield device
    device.unmount()
