"""
Unit tests for Pydantic models
"""

from datetime import datetime

import pytest
from pydantic import ValidationError

from models import (
    AuditCheck,
    AuditReport,
    BenchSpec,
    CommandRecord,
    DeviceGeometry,
    ErrorRecord,
    GameResult,
    KdfParams,
    Layout,
    ModeConfig,
    OpCost,
    PhiPolicy,
    Region,
    TestRecord,
)


@pytest.mark.unit
class TestDeviceGeometry:
    """Test DeviceGeometry derivations"""

    def test_small_geometry(self):
        """Test the N=256, B=512 sizes every other test relies on"""
        g = DeviceGeometry(n_blocks=256, block_size=512)
        assert g.payload_size == 496
        assert g.beta == 62
        assert (g.columns, g.matrix_rows) == (5, 52)
        assert g.bitmap_blocks == 1
        assert g.rma_records_per_block == 20
        assert g.ppm_blocks == 2
        assert g.stash_header_blocks == 3
        assert (g.leaf_fanout, g.internal_fanout) == (25, 42)

    def test_full_layout_defaults(self):
        g = DeviceGeometry(n_blocks=256, block_size=512)
        assert g.layout is Layout.FULL
        assert g.public_blocks == 64
        assert g.preallocated_public == 0
        assert g.oram_occupancy == 128
        assert g.default_hidden_blocks == 64

    def test_lite_layout_defaults(self):
        g = DeviceGeometry(n_blocks=256, block_size=512, layout=Layout.LITE)
        assert g.public_blocks == 128
        assert g.preallocated_public == 128
        assert g.oram_occupancy == 64
        assert g.default_hidden_blocks == 64

    def test_lite_public_size_fixed(self):
        with pytest.raises(ValidationError):
            DeviceGeometry(n_blocks=256, block_size=512, layout=Layout.LITE, public_blocks=10)

    @pytest.mark.parametrize("public_blocks", [0, 129])
    def test_public_size_bounds(self, public_blocks):
        with pytest.raises(ValidationError):
            DeviceGeometry(n_blocks=256, block_size=512, public_blocks=public_blocks)

    @pytest.mark.parametrize("block_size", [256, 1000])
    def test_block_size_power_of_two(self, block_size):
        with pytest.raises(ValidationError):
            DeviceGeometry(n_blocks=256, block_size=block_size)

    def test_minimum_blocks(self):
        with pytest.raises(ValidationError):
            DeviceGeometry(n_blocks=32, block_size=512)

    def test_stash_region_must_fit(self):
        """Test the stash region holds header plus capacity"""
        with pytest.raises(ValidationError):
            DeviceGeometry(n_blocks=256, block_size=512, stash_region_blocks=20)

    @pytest.mark.parametrize(
        "n_blocks, block_size", [(256, 512), (2**14, 4096), (2**19, 4096)]
    )
    def test_fbm_header_fits(self, n_blocks, block_size):
        assert DeviceGeometry(n_blocks=n_blocks, block_size=block_size).fbm_header_fits

    def test_fbm_header_overflow(self):
        """Test a row counter wider than one header block allows"""
        with pytest.raises(ValidationError, match="FBM header"):
            DeviceGeometry(n_blocks=2**80, block_size=512)

    def test_regions_are_contiguous(self):
        """Test regions tile the device in on-disk order"""
        g = DeviceGeometry(n_blocks=256, block_size=512)
        spans = g.regions
        assert [s.region for s in spans] == list(Region)
        for before, after in zip(spans, spans[1:]):
            assert before.stop == after.start
        assert g.total_blocks == spans[-1].stop
        assert g.region_of(g.region_start(Region.DATA)) is Region.DATA
        assert g.region_of(0) is Region.SUPERBLOCK
        assert g.data_block(3) == g.region_start(Region.DATA) + 3

    def test_geometry_is_frozen(self):
        g = DeviceGeometry(n_blocks=256, block_size=512)
        with pytest.raises(ValidationError):
            g.n_blocks = 512

    def test_signature_equality(self):
        first = DeviceGeometry(n_blocks=256, block_size=512)
        second = DeviceGeometry(n_blocks=256, block_size=512, public_blocks=64)
        assert first.signature() == second.signature()


@pytest.mark.unit
class TestModeModels:
    """Test ModeConfig and KdfParams"""

    def test_mode_defaults(self):
        config = ModeConfig()
        assert config.selection_rounds == 5
        assert config.phi == 1
        assert config.phi_policy is PhiPolicy.EVERY_WRITE
        assert config.bitmap_on_disk
        assert not config.legacy_selection

    def test_selection_rounds_positive(self):
        with pytest.raises(ValidationError):
            ModeConfig(selection_rounds=0)

    def test_kdf_minimums(self):
        with pytest.raises(ValidationError):
            KdfParams(time_cost=0)
        with pytest.raises(ValidationError):
            KdfParams(memory_cost=4)


@pytest.mark.unit
class TestRecords:
    """Test emitted record models"""

    def test_error_record(self):
        """Test valid ErrorRecord creation"""
        record = ErrorRecord(error_code="TEST_ERROR", message="Test error message")
        assert record.details is None
        assert isinstance(record.timestamp, datetime)
        assert '"timestamp":"' in record.model_dump_json()

    def test_error_record_missing_fields(self):
        """Test ErrorRecord with missing required fields"""
        with pytest.raises(ValidationError):
            ErrorRecord()
        with pytest.raises(ValidationError):
            ErrorRecord(error_code="TEST")

    def test_command_record_defaults(self):
        assert CommandRecord(command="init").status == "ok"

    def test_test_record_bounds(self):
        with pytest.raises(ValidationError):
            TestRecord(name="x", statistic=0.0, p_value=1.5, alpha=0.01, passed=True)
        with pytest.raises(ValidationError):
            TestRecord(name="", statistic=0.0, alpha=0.01, passed=True)

    def test_game_result_advantage(self):
        result = GameResult(
            rounds=100, wins=60, win_rate=0.6, ci_low=0.45, ci_high=0.73,
            p_value=0.05, distinguisher="constant",
        )
        assert result.advantage == pytest.approx(0.1)

    def test_audit_report(self):
        report = AuditReport(
            checks=[AuditCheck(name="a", passed=True), AuditCheck(name="b", passed=False)]
        )
        assert not report.passed
        assert [c.name for c in report.failed()] == ["b"]
        assert AuditReport().passed

    def test_op_cost_rates(self):
        cost = OpCost(count=4, reads=8, writes=20)
        assert cost.reads_per_op == 2
        assert cost.writes_per_op == 5
        assert OpCost().writes_per_op == 0.0


@pytest.mark.unit
class TestBenchSpec:
    """Test BenchSpec validation"""

    def test_workload_normalised(self):
        assert BenchSpec(workload="Zipfian").workload == "zipfian"

    def test_unknown_workload(self):
        with pytest.raises(ValidationError):
            BenchSpec(workload="bursty")

    def test_read_fraction_is_the_rest(self):
        spec = BenchSpec(public_write_fraction=0.5, hidden_write_fraction=0.2, hidden_read_fraction=0.1)
        assert spec.public_read_fraction == pytest.approx(0.2)

    def test_read_fraction_never_negative(self):
        spec = BenchSpec(public_write_fraction=0.9, hidden_write_fraction=0.9)
        assert spec.public_read_fraction == 0.0

    def test_fraction_bounds(self):
        with pytest.raises(ValidationError):
            BenchSpec(public_write_fraction=1.5)
