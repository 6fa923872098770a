"""
Acceptance checks: a correctness oracle against shadow maps, exact I/O
counts, the ratio sweep and the statistical battery
"""

import itertools

import numpy as np
import pytest

from bench import BenchOp, block_ids, hidden_write_cost, sweep
from datalair import DataLairDevice, run_audit
from dl_oram import TreeShape, hidden_volume_capacity
from models.device import DeviceGeometry, PhiPolicy
from models.reports import BenchSpec
from pdcpa import run_battery
from pdcpa.battery import RECORD_COUNT, SCALES
from tests.conftest import BLOCK_SIZE, HIDDEN_PASSWORD, PUBLIC_PASSWORD


def format_at(path, n_blocks, fast_kdf, rng, block_size=BLOCK_SIZE) -> DataLairDevice:
    return DataLairDevice.format(
        path,
        n_blocks,
        PUBLIC_PASSWORD,
        HIDDEN_PASSWORD,
        block_size=block_size,
        kdf=fast_kdf,
        rng=rng,
    )


def check_against_shadow(device, public_shadow, hidden_shadow):
    for public_id, block in public_shadow.items():
        assert device.public_read(public_id) == block
    for logical_id, block in hidden_shadow.items():
        assert device.hidden_read(logical_id) == block


@pytest.mark.integration
class TestCorrectnessOracle:
    """Every read matches an in-memory shadow of both volumes"""

    def test_mixed_zipfian_workload(self, hidden_device):
        generator = np.random.default_rng(11)
        operations = 400
        kinds = generator.choice(4, size=operations, p=[0.4, 0.2, 0.3, 0.1])
        public_ids = block_ids("zipfian", hidden_device.public_blocks, operations, generator)
        hidden_ids = block_ids("zipfian", hidden_device.oram.logical_capacity, operations, generator)
        public_shadow, hidden_shadow = {}, {}

        for kind, public_id, hidden_id in zip(kinds, public_ids.tolist(), hidden_ids.tolist()):
            if kind == 0:
                public_shadow[public_id] = generator.bytes(BLOCK_SIZE)
                hidden_device.public_write(public_id, public_shadow[public_id])
            elif kind == 1 and public_id in public_shadow:
                assert hidden_device.public_read(public_id) == public_shadow[public_id]
            elif kind == 2:
                hidden_shadow[hidden_id] = generator.bytes(BLOCK_SIZE)
                hidden_device.hidden_write(hidden_id, hidden_shadow[hidden_id])
            elif kind == 3 and hidden_id in hidden_shadow:
                # served from the queue, the stash or the tree
                assert hidden_device.hidden_read(hidden_id) == hidden_shadow[hidden_id]

        check_against_shadow(hidden_device, public_shadow, hidden_shadow)
        report = run_audit(hidden_device)
        assert report.passed, report.failed()

        path = hidden_device.store.path
        hidden_device.unmount()
        with DataLairDevice.mount(path, PUBLIC_PASSWORD, HIDDEN_PASSWORD) as mounted:
            check_against_shadow(mounted, public_shadow, hidden_shadow)


class TestIoCounts:
    """Measured block I/O equals the closed-form cost"""

    @pytest.mark.parametrize(
        "n_blocks",
        [
            pytest.param(1024, marks=pytest.mark.integration),
            pytest.param(2**14, marks=pytest.mark.slow),
        ],
    )
    def test_hidden_write_cost(self, tmp_path, fast_kdf, rng, n_blocks):
        device = format_at(tmp_path / f"n{n_blocks}.img", n_blocks, fast_kdf, rng)
        try:
            device.public_write(0, b"\x01" * BLOCK_SIZE)
            expected = hidden_write_cost(device.geometry, device.config.selection_rounds)
            assert device.expected_hidden_step_writes() == expected
            for logical_id in range(5):
                device.hidden_write(logical_id, b"\x02" * BLOCK_SIZE)
                with device.capture("step") as captured:
                    device.hidden_step()
                assert len(captured.trace) == expected

            reads = device.store.stats.reads
            device.public_read(0)
            assert device.store.stats.reads - reads == 2
        finally:
            device.unmount()

    @pytest.mark.slow
    def test_full_scale_sizes(self, tmp_path, fast_kdf, rng):
        """4 KB blocks at every full-battery size, depth 2, 2 then 3"""
        depths = []
        for n_blocks in (2**10, 2**14, 2**19):
            path = tmp_path / f"full-{n_blocks}.img"
            device = format_at(path, n_blocks, fast_kdf, rng.fork(str(n_blocks)), block_size=4096)
            try:
                device.public_write(0, b"\x01" * 4096)
                device.hidden_write(0, b"\x02" * 4096)
                with device.capture("step") as captured:
                    device.hidden_step()
                assert len(captured.trace) == hidden_write_cost(device.geometry, 5)
                reads = device.store.stats.reads
                device.public_read(0)
                assert device.store.stats.reads - reads == 2
                depths.append(device.shape.depth)
            finally:
                device.unmount()
                path.unlink()
        assert depths == [2, 2, 3]

    @pytest.mark.unit
    def test_depth_at_full_scale_block_size(self):
        geometries = [DeviceGeometry(n_blocks=n, block_size=4096) for n in (2**10, 2**14, 2**19)]
        depths = [TreeShape.for_geometry(g, hidden_volume_capacity(g)).depth for g in geometries]
        assert depths == [2, 2, 3]

    @pytest.mark.unit
    def test_depth_grows_with_the_device(self):
        small = DeviceGeometry(n_blocks=256, block_size=BLOCK_SIZE)
        large = DeviceGeometry(n_blocks=8192, block_size=BLOCK_SIZE)
        depths = [TreeShape.for_geometry(g, hidden_volume_capacity(g)).depth for g in (small, large)]
        assert depths == [2, 3]
        assert hidden_write_cost(small, 5) < hidden_write_cost(large, 5)


@pytest.mark.integration
def test_public_write_cost_falls_with_ratio(tmp_path, fast_kdf, rng):
    """Fewer hidden steps per public write as the public:hidden ratio grows"""
    counter = itertools.count()

    def factory() -> DataLairDevice:
        index = next(counter)
        return format_at(tmp_path / f"ratio-{index}.img", 256, fast_kdf, rng.fork(f"ratio-{index}"))

    spec = BenchSpec(workload="sequential", operations=20, public_write_fraction=1.0, seed=9)
    reports = sweep(factory, spec, ratios=[1, 2, 5, 10], policies=[PhiPolicy.EVERY_N])
    writes = [r.costs[BenchOp.PUBLIC_WRITE.value].writes_per_op for r in reports]
    assert writes == sorted(writes, reverse=True)
    assert writes[0] >= 2 * writes[-1]


@pytest.mark.integration
def test_updates_only_beats_every_write(tmp_path, fast_kdf, rng):
    """Update-heavy load: I/O throughput rises with the ratio and updates-only
    public writes cost at least 3x less than one hidden step per write"""
    counter = itertools.count()

    def factory() -> DataLairDevice:
        index = next(counter)
        return format_at(tmp_path / f"upd-{index}.img", 256, fast_kdf, rng.fork(f"upd-{index}"))

    # 64 inserts fill the public volume, the other 128 writes are in-place updates
    spec = BenchSpec(workload="sequential", operations=192, public_write_fraction=1.0, seed=4)
    (baseline,) = sweep(factory, spec, ratios=[1], policies=[PhiPolicy.EVERY_WRITE])
    updates_only = sweep(factory, spec, ratios=[1, 2, 5, 10], policies=[PhiPolicy.UPDATES_ONLY])

    throughput = [r.ops_per_block_write for r in updates_only]
    assert throughput == sorted(throughput)
    assert baseline.ops_per_block_write <= throughput[0]

    def cost(report) -> float:
        return report.costs[BenchOp.PUBLIC_WRITE.value].writes_per_op

    assert cost(baseline) >= 3 * cost(updates_only[-1])


@pytest.mark.slow
@pytest.mark.statistical
def test_quick_battery(tmp_path):
    records = run_battery("quick", seed=2026, workdir=tmp_path)
    assert len(records) == RECORD_COUNT
    assert {r.name for r in records} >= {
        "correctness_oracle",
        "hidden_write_io_counts",
        "free_block_touch_probability",
        "trace_shape_determinism",
        "pat_shape_equality",
        "stash_bound",
        "bias_legacy",
        "bias_fixed",
    }
    failed = [r.name for r in records if not r.passed]
    assert not failed, failed


@pytest.mark.unit
def test_full_scale_budgets():
    """The full battery runs every check at its acceptance budget"""
    full = SCALES["full"]
    assert full.block_size == 4096
    assert (full.oracle_blocks, full.oracle_operations) == (2**14, 100_000)
    assert (full.touch_blocks, full.touch_writes) == (1024, 100_000)
    assert full.stash_writes == 100_000
    assert full.io_sizes == (2**10, 2**14, 2**19)
    assert full.bias_observations == 1_000_000
    quick = SCALES["quick"]
    assert all(getattr(quick, f) <= getattr(full, f) for f in ("oracle_operations", "touch_writes", "stash_writes"))
