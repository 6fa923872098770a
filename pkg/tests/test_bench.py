"""
Tests for benchmark workloads, the runner and the ratio sweep
"""

import itertools

import numpy as np
import pytest

from bench import BenchOp, block_ids, hidden_write_cost, op_mix, run_bench, sweep, zipf_probabilities
from datalair import DataLairDevice
from exceptions import ValidationError
from models.device import PhiPolicy
from models.reports import BenchSpec
from tests.conftest import BLOCK_SIZE, HIDDEN_PASSWORD, N_BLOCKS, PUBLIC_PASSWORD


@pytest.mark.unit
class TestWorkloads:
    """Test id streams and operation mixes"""

    def test_sequential_wraps(self):
        ids = block_ids("sequential", 4, 10, np.random.default_rng(0))
        assert ids.tolist() == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]

    @pytest.mark.parametrize("workload", ["random", "zipfian"])
    def test_ids_stay_in_domain(self, workload):
        ids = block_ids(workload, 64, 500, np.random.default_rng(1))
        assert len(ids) == 500
        assert ids.min() >= 0
        assert ids.max() < 64

    def test_zipfian_has_a_hot_id(self):
        ids = block_ids("zipfian", 64, 2000, np.random.default_rng(2), exponent=1.2)
        counts = np.bincount(ids, minlength=64)
        assert counts.max() > 5 * 2000 / 64

    def test_zipf_probabilities(self):
        p = zipf_probabilities(10, 1.0)
        assert p.sum() == pytest.approx(1.0)
        assert np.all(np.diff(p) < 0)

    def test_unknown_workload(self):
        with pytest.raises(ValidationError):
            block_ids("bursty", 4, 4, np.random.default_rng(0))

    def test_empty_domain(self):
        with pytest.raises(ValidationError):
            block_ids("random", 0, 4, np.random.default_rng(0))

    def test_write_only_mix(self):
        spec = BenchSpec(operations=50, public_write_fraction=1.0)
        assert set(op_mix(spec, np.random.default_rng(0))) == {BenchOp.PUBLIC_WRITE}

    def test_mix_length(self):
        spec = BenchSpec(operations=30, hidden_write_fraction=0.2, hidden_read_fraction=0.1)
        assert len(op_mix(spec, np.random.default_rng(0))) == 30


@pytest.mark.unit
class TestCostModel:
    def test_hidden_write_cost(self, geometry):
        assert hidden_write_cost(geometry, 5) == 106
        assert hidden_write_cost(geometry, 5, bitmap_on_disk=False) == 76

    def test_cost_grows_with_rounds(self, geometry):
        assert hidden_write_cost(geometry, 6) > hidden_write_cost(geometry, 5)


@pytest.mark.integration
class TestRunner:
    """Test measured runs on formatted devices"""

    def test_mixed_run(self, hidden_device):
        spec = BenchSpec(
            operations=40,
            public_write_fraction=0.5,
            hidden_write_fraction=0.3,
            hidden_read_fraction=0.1,
            seed=7,
        )
        report = run_bench(hidden_device, spec)
        assert report.operations == 40
        assert sum(cost.count for name, cost in report.costs.items() if name != "hidden_flush") == 40
        assert report.hidden_step_writes == report.expected_hidden_step_writes == 106

        writes = report.costs[BenchOp.PUBLIC_WRITE.value]
        # every public write carries at least one hidden step
        assert writes.writes_per_op >= 2 + 106
        queued = report.costs.get(BenchOp.HIDDEN_WRITE.value)
        if queued is not None:
            assert queued.writes == 0

    def test_public_device_run(self, public_device):
        """Hidden operations on a public device count as misses"""
        spec = BenchSpec(operations=20, public_write_fraction=0.5, hidden_read_fraction=0.3, seed=3)
        report = run_bench(public_device, spec)
        assert report.stash_high_water == 0
        assert report.hidden_step_writes == 106

    def test_ratio_sweep(self, tmp_path, fast_kdf, rng):
        counter = itertools.count()

        def factory() -> DataLairDevice:
            index = next(counter)
            return DataLairDevice.format(
                tmp_path / f"sweep-{index}.img",
                N_BLOCKS,
                PUBLIC_PASSWORD,
                HIDDEN_PASSWORD,
                block_size=BLOCK_SIZE,
                kdf=fast_kdf,
                rng=rng.fork(f"sweep-{index}"),
            )

        spec = BenchSpec(operations=10, public_write_fraction=1.0, seed=3)
        reports = sweep(factory, spec, ratios=[1, 2], policies=[PhiPolicy.EVERY_N])
        assert [r.spec.ratio for r in reports] == [1, 2]
        every_write, every_other = (r.costs[BenchOp.PUBLIC_WRITE.value].writes for r in reports)
        assert every_other < every_write
