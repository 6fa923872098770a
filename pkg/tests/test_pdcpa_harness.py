"""
Tests for the PD-CPA harness: statistics, patterns, the game, adversaries,
the bias attack and record output
"""

import io
import json

import pytest

from block_store import DataRegion, Snapshot
from dl_oram import DlOram, UniformSampler
from exceptions import (
    GeometryMismatchError,
    IllegalPatternError,
    InsufficientSamplesError,
    ValidationError,
)
from models.device import ModeConfig, Region
from models.reports import TestRecord
from pdcpa import (
    AccessPattern,
    CardinalityDistinguisher,
    ConstantDistinguisher,
    Observation,
    bias_attack,
    binomial_ci,
    binomial_p_value,
    bonferroni,
    check_legal,
    diff,
    emit_records,
    get_distinguisher,
    merge_bins,
    paired_patterns,
    run_battery,
    run_game,
    summarize,
    two_sample_test,
    uniformity_test,
)


@pytest.mark.unit
class TestStatistics:
    """Test the chi-square and binomial helpers"""

    def test_merge_bins(self):
        observed, expected = merge_bins([1, 1, 1, 10], [2, 2, 2, 10])
        assert observed.tolist() == [3, 10]
        assert expected.tolist() == [6, 10]

    def test_merge_bins_folds_short_tail(self):
        observed, expected = merge_bins([5, 5, 1], [5, 5, 1])
        assert expected.tolist() == [5, 6]
        assert observed.tolist() == [5, 6]

    def test_uniform_samples_pass(self):
        _, p = uniformity_test([i % 16 for i in range(1600)], 16)
        assert p == pytest.approx(1.0)

    def test_skewed_samples_fail(self):
        samples = [0] * 400 + [i % 16 for i in range(400)]
        _, p = uniformity_test(samples, 16)
        assert p < 1e-9

    def test_sparse_domain_is_merged(self):
        """Fewer samples than bins still gives a valid test"""
        _, p = uniformity_test([i % 200 for i in range(100)], 200)
        assert 0.0 <= p <= 1.0

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamplesError):
            uniformity_test([0, 1], 16)

    def test_samples_outside_domain(self):
        with pytest.raises(ValidationError):
            uniformity_test([i % 20 for i in range(200)], 16)

    def test_domain_too_small(self):
        with pytest.raises(ValidationError):
            uniformity_test([0] * 20, 1)

    def test_same_distribution(self):
        first = [i % 16 for i in range(1600)]
        _, p = two_sample_test(first, list(first), 16)
        assert p > 0.99

    def test_different_distributions(self):
        first = [i % 16 for i in range(1600)]
        second = [i % 4 for i in range(1600)]
        _, p = two_sample_test(first, second, 16)
        assert p < 1e-9

    def test_two_sample_too_few(self):
        with pytest.raises(InsufficientSamplesError):
            two_sample_test([1, 2], [1, 2, 3], 16)

    def test_binomial_interval(self):
        low, high = binomial_ci(50, 100)
        assert low < 0.5 < high
        assert binomial_p_value(50, 100) == pytest.approx(1.0)
        assert binomial_p_value(95, 100) < 1e-9

    def test_binomial_needs_trials(self):
        with pytest.raises(InsufficientSamplesError):
            binomial_ci(0, 0)

    def test_bonferroni(self):
        assert bonferroni(0.01, 10) == pytest.approx(0.001)
        assert bonferroni(0.01, 0) == 0.01


@pytest.mark.unit
class TestPatterns:
    """Test access patterns and the legality rules"""

    def test_builder(self, make_block):
        pattern = AccessPattern().pub_write(0, make_block(0)).hid_write(1, make_block(1)).pub_read(0)
        assert len(pattern) == 3
        assert len(pattern.public_writes()) == 1
        assert len(pattern.hidden_writes()) == 1

    def test_public_writes_must_match(self, make_block):
        first = AccessPattern().pub_write(0, make_block(0))
        second = AccessPattern().pub_write(0, make_block(1))
        with pytest.raises(IllegalPatternError):
            check_legal(first, second, phi=1)

    def test_hidden_writes_bounded_by_phi(self, make_block):
        first = AccessPattern().pub_write(0, make_block(0))
        first.hid_write(0, make_block(1)).hid_write(1, make_block(1))
        second = AccessPattern().pub_write(0, make_block(0))
        with pytest.raises(IllegalPatternError):
            check_legal(first, second, phi=1)
        check_legal(first, second, phi=2)

    def test_paired_patterns_are_legal(self, hidden_device, rng):
        with_hidden, public_only = paired_patterns(hidden_device, rng, public_writes=3)
        check_legal(with_hidden, public_only, hidden_device.config.phi)
        assert len(with_hidden.hidden_writes()) == 3
        assert public_only.hidden_writes() == []

    def test_diff_rejects_other_geometry(self):
        with pytest.raises(GeometryMismatchError):
            diff(Snapshot(digests=(b"a",)), Snapshot(digests=(b"a", b"b")))

    def test_observation_regions(self, geometry):
        data = geometry.region_start(Region.DATA)
        root = geometry.region_start(Region.ROOT_POINTER)
        observation = Observation.from_diff(frozenset({data, data + 1, root}), geometry)
        assert observation.regions == {Region.DATA: 2, Region.ROOT_POINTER: 1}


@pytest.mark.unit
class TestDistinguishers:
    """Test the built-in adversaries"""

    def test_lookup(self):
        assert get_distinguisher("frequency").name == "frequency"
        assert isinstance(get_distinguisher("constant"), ConstantDistinguisher)

    def test_unknown_name(self):
        with pytest.raises(ValidationError):
            get_distinguisher("oracle")

    def test_cardinality_compares_with_median(self, geometry):
        adversary = CardinalityDistinguisher()
        adversary.reset(geometry)
        history = []

        def observe(size):
            history.append(Observation(frozenset(range(size)), {}))
            return adversary.guess(history)

        assert observe(10) == 0
        assert observe(12) == 0
        assert observe(3) == 1


@pytest.mark.integration
class TestGame:
    """Test the game loop"""

    def test_constant_adversary(self, hidden_device, rng):
        first, second = paired_patterns(hidden_device, rng, public_writes=2)
        result = run_game(hidden_device, first, second, 12, ConstantDistinguisher(), rng)
        assert result.rounds == 12
        assert result.granularity == "round"
        assert result.ci_low <= result.win_rate <= result.ci_high
        assert result.mean_changed_blocks > 0

    def test_operation_granularity(self, hidden_device, rng):
        first, second = paired_patterns(hidden_device, rng, public_writes=2)
        result = run_game(
            hidden_device, first, second, 4, get_distinguisher("region_histogram"), rng,
            granularity="operation",
        )
        assert result.rounds == 4

    def test_bad_granularity(self, hidden_device, rng):
        first, second = paired_patterns(hidden_device, rng)
        with pytest.raises(ValidationError):
            run_game(hidden_device, first, second, 4, ConstantDistinguisher(), rng, "block")

    def test_needs_a_round(self, hidden_device, rng):
        first, second = paired_patterns(hidden_device, rng)
        with pytest.raises(ValidationError):
            run_game(hidden_device, first, second, 0, ConstantDistinguisher(), rng)

    def test_illegal_patterns_rejected(self, hidden_device, rng, make_block):
        first = AccessPattern().pub_write(0, make_block(0))
        second = AccessPattern().pub_write(1, make_block(0))
        with pytest.raises(IllegalPatternError):
            run_game(hidden_device, first, second, 4, ConstantDistinguisher(), rng)


@pytest.mark.statistical
class TestBiasAttack:
    """Test the free-block bias measurement"""

    def _oram(self, store, rng, public_key, hidden_key, legacy):
        return DlOram.oram_init(
            store,
            DataRegion(store, rng, public_key),
            hidden_key,
            rng,
            UniformSampler(range(store.geometry.n_blocks)),
            ModeConfig(legacy_selection=legacy),
        )

    def test_fixed_protocol_is_unbiased(self, store, rng, public_key, hidden_key):
        oram = self._oram(store, rng, public_key, hidden_key, legacy=False)
        report = bias_attack(oram, 60, rng)
        assert not report.legacy
        assert abs(report.z_score) < 4

    def test_legacy_protocol_favours_free_blocks(self, store, rng, public_key, hidden_key):
        oram = self._oram(store, rng, public_key, hidden_key, legacy=True)
        report = bias_attack(oram, 60, rng)
        assert report.legacy
        assert report.p_touch_free > report.p_touch_occupied
        assert report.z_score > 3
        assert report.classifier_accuracy > 0.5


@pytest.mark.unit
class TestRecords:
    """Test record output"""

    def test_emit_json_lines(self):
        records = [
            TestRecord(name="a", statistic=1.0, p_value=0.5, alpha=0.01, passed=True),
            TestRecord(name="b", statistic=2.0, alpha=0.01, passed=False),
        ]
        stream = io.StringIO()
        emit_records(records, stream)
        lines = stream.getvalue().splitlines()
        assert [json.loads(line)["name"] for line in lines] == ["a", "b"]
        summary = summarize(records)
        assert "FAIL" in summary
        assert summary.endswith("1/2 passed")

    def test_unknown_battery_scale(self):
        with pytest.raises(ValidationError):
            run_battery("huge")
