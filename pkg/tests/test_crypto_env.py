"""
Unit tests for randomness, block sealing and key derivation
"""

import pytest

from crypto_env import (
    IV_SIZE,
    KeyRole,
    RandomSource,
    SealedBlock,
    VolumeKey,
    derive_volume_key,
    random_below,
    reencrypt,
    seal,
    unseal,
)
from exceptions import ValidationError


@pytest.mark.unit
class TestRandomSource:
    """Test seeded and OS-backed randomness"""

    def test_seeded_streams_repeat(self):
        """Same seed gives the same bytes"""
        assert RandomSource(7).bytes(64) == RandomSource(7).bytes(64)

    def test_different_seeds_differ(self):
        """Different seeds give different bytes"""
        assert RandomSource(7).bytes(64) != RandomSource(8).bytes(64)

    def test_unseeded_is_not_deterministic(self):
        """Unseeded sources draw from the OS"""
        source = RandomSource()
        assert not source.deterministic
        assert source.bytes(32) != source.bytes(32)

    def test_below_stays_in_range(self, rng):
        """below(n) never reaches n"""
        values = [rng.below(5) for _ in range(500)]
        assert min(values) == 0
        assert max(values) == 4

    def test_below_rejects_empty_range(self, rng):
        """A bound below 1 is rejected"""
        with pytest.raises(ValidationError):
            rng.below(0)

    def test_random_below_matches_method(self):
        """The free function draws from the same stream as below"""
        assert [random_below(RandomSource(3), 97) for _ in range(3)] == [RandomSource(3).below(97)] * 3

    def test_negative_byte_count_rejected(self, rng):
        with pytest.raises(ValidationError):
            rng.bytes(-1)

    def test_large_reads_cross_refills(self, rng):
        """Reads bigger than the internal buffer still return the full count"""
        assert len(rng.bytes(200_000)) == 200_000

    @pytest.mark.parametrize("population,count", [(10, 10), (10, 2), (1000, 5)])
    def test_sample_is_distinct(self, rng, population, count):
        """sample draws distinct values from the population"""
        drawn = rng.sample(population, count)
        assert len(drawn) == count
        assert len(set(drawn)) == count
        assert all(0 <= value < population for value in drawn)

    def test_sample_larger_than_population_rejected(self, rng):
        with pytest.raises(ValidationError):
            rng.sample(3, 4)

    def test_shuffle_is_permutation(self, rng):
        """Shuffle keeps every element"""
        items = list(range(50))
        rng.shuffle(items)
        assert sorted(items) == list(range(50))

    def test_choice_from_empty_rejected(self, rng):
        with pytest.raises(ValidationError):
            rng.choice([])

    def test_fork_is_deterministic_per_label(self):
        """Forks of a seeded source depend only on the seed and label"""
        assert RandomSource(3).fork("a").bytes(16) == RandomSource(3).fork("a").bytes(16)
        assert RandomSource(3).fork("a").bytes(16) != RandomSource(3).fork("b").bytes(16)

    def test_fork_of_unseeded_is_unseeded(self):
        assert not RandomSource().fork("x").deterministic


@pytest.mark.unit
class TestSealing:
    """Test AES-256-CTR sealing"""

    def test_round_trip(self, rng, hidden_key):
        """unseal(seal(p)) == p"""
        plaintext = rng.bytes(512)
        assert unseal(hidden_key, seal(hidden_key, plaintext, rng)) == plaintext

    def test_fresh_iv_per_seal(self, rng, hidden_key):
        """Sealing the same plaintext twice gives different ciphertexts"""
        plaintext = b"\x00" * 512
        first = seal(hidden_key, plaintext, rng)
        second = seal(hidden_key, plaintext, rng)
        assert first.iv != second.iv
        assert first.ciphertext != second.ciphertext

    def test_reencrypt_keeps_plaintext(self, rng, hidden_key):
        """Reencryption changes the bytes but not the content"""
        plaintext = rng.bytes(512)
        sealed = seal(hidden_key, plaintext, rng)
        again = reencrypt(hidden_key, sealed, rng)
        assert again.to_bytes() != sealed.to_bytes()
        assert unseal(hidden_key, again) == plaintext

    def test_size_is_enforced(self, rng, hidden_key):
        with pytest.raises(ValidationError):
            seal(hidden_key, b"short", rng, size=512)

    def test_inline_layout(self, rng, hidden_key):
        """IV first, ciphertext after"""
        sealed = seal(hidden_key, b"x" * 100, rng)
        raw = sealed.to_bytes()
        assert len(raw) == IV_SIZE + 100
        assert SealedBlock.from_bytes(raw) == sealed

    def test_wrong_key_does_not_recover(self, rng, hidden_key, public_key):
        plaintext = rng.bytes(64)
        assert unseal(public_key, seal(hidden_key, plaintext, rng)) != plaintext


@pytest.mark.unit
class TestVolumeKeys:
    """Test key objects and derivation"""

    def test_key_length_enforced(self):
        with pytest.raises(ValidationError):
            VolumeKey(role=KeyRole.PUBLIC, material=b"\x00" * 16)

    def test_repr_hides_material(self, hidden_key):
        """Key material never shows up in logs"""
        assert hidden_key.material.hex() not in repr(hidden_key)
        assert "hidden" in repr(hidden_key)

    def test_derivation_is_deterministic(self, fast_kdf):
        salt = b"\x01" * 16
        first = derive_volume_key("pw", salt, KeyRole.PUBLIC, fast_kdf)
        second = derive_volume_key("pw", salt, KeyRole.PUBLIC, fast_kdf)
        assert first.material == second.material

    def test_passwords_give_different_keys(self, fast_kdf):
        salt = b"\x01" * 16
        first = derive_volume_key("one", salt, KeyRole.PUBLIC, fast_kdf)
        second = derive_volume_key("two", salt, KeyRole.HIDDEN, fast_kdf)
        assert first.material != second.material

    def test_empty_password_rejected(self, fast_kdf):
        with pytest.raises(ValidationError):
            derive_volume_key("", b"\x01" * 16, KeyRole.PUBLIC, fast_kdf)

    def test_salt_length_enforced(self, fast_kdf):
        with pytest.raises(ValidationError):
            derive_volume_key("pw", b"\x01" * 8, KeyRole.PUBLIC, fast_kdf)
