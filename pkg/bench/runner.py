"""
Benchmark runner.

Physical I/O counts per logical operation are the primary metric; wall-clock
ops/sec is reported alongside but depends on the host.
"""

import logging
import time
from typing import Callable, Dict, Iterable, List, Sequence

import numpy as np

from datalair import DataLairDevice
from dl_oram import TreeShape, hidden_volume_capacity, hidden_write_trace_size
from exceptions import UnmappedBlockError
from models.device import DeviceGeometry, PhiPolicy
from models.reports import BenchReport, BenchSpec, OpCost
from .workloads import BenchOp, block_ids, op_mix

logger = logging.getLogger(__name__)

SWEEP_RATIOS = range(1, 11)
SWEEP_POLICIES = (PhiPolicy.EVERY_N, PhiPolicy.UPDATES_ONLY)


def hidden_write_cost(geometry: DeviceGeometry, selection_rounds: int, bitmap_on_disk: bool = True) -> int:
    """Closed-form block writes of one hidden write on ``geometry``"""
    shape = TreeShape.for_geometry(geometry, hidden_volume_capacity(geometry))
    return hidden_write_trace_size(selection_rounds, shape.depth, bitmap_on_disk)


class _Meter:
    def __init__(self, device: DataLairDevice):
        self.stats = device.store.stats
        self.costs: Dict[str, OpCost] = {}

    def run(self, name: str, action: Callable[[], object]) -> None:
        reads, writes = self.stats.reads, self.stats.writes
        try:
            action()
        except UnmappedBlockError:
            # a read miss still pays for its lookup
            pass
        cost = self.costs.setdefault(name, OpCost())
        cost.count += 1
        cost.reads += self.stats.reads - reads
        cost.writes += self.stats.writes - writes


def run_bench(device: DataLairDevice, spec: BenchSpec) -> BenchReport:
    """Run ``spec`` on a mounted device"""
    device.config = device.config.model_copy(
        update={"phi_policy": spec.phi_policy, "phi_every": spec.ratio}
    )
    rng = np.random.default_rng(spec.seed)
    kinds = op_mix(spec, rng)
    public_ids = block_ids(spec.workload, device.public_blocks, spec.operations, rng, spec.zipf_exponent)
    hidden_domain = device.oram.logical_capacity if device.oram is not None else device.hidden_capacity
    hidden_ids = block_ids(spec.workload, hidden_domain, spec.operations, rng, spec.zipf_exponent)
    block_size = device.geometry.block_size
    meter = _Meter(device)

    started = time.perf_counter()
    for kind, public_id, hidden_id in zip(kinds, public_ids.tolist(), hidden_ids.tolist()):
        if kind is BenchOp.PUBLIC_WRITE:
            payload = rng.bytes(block_size)
            meter.run(kind.value, lambda: device.public_write(public_id, payload))
        elif kind is BenchOp.PUBLIC_READ:
            meter.run(kind.value, lambda: device.public_read(public_id))
        elif kind is BenchOp.HIDDEN_WRITE:
            if device.oram is not None and device.hidden_queue_room() == 0:
                meter.run("hidden_flush", device.flush_hidden)
            payload = rng.bytes(block_size)
            meter.run(kind.value, lambda: device.hidden_write(hidden_id, payload))
        else:
            meter.run(kind.value, lambda: device.hidden_read(hidden_id))
    seconds = time.perf_counter() - started

    with device.capture("bench_hidden_step") as captured:
        device.hidden_step()

    report = BenchReport(
        spec=spec,
        operations=spec.operations,
        seconds=seconds,
        ops_per_sec=spec.operations / seconds if seconds > 0 else 0.0,
        costs=meter.costs,
        stash_high_water=device.oram.stash.high_water if device.oram is not None else 0,
        hidden_step_writes=len(captured.trace),
        expected_hidden_step_writes=device.expected_hidden_step_writes(),
    )
    logger.info(
        f"Bench {spec.workload}: {spec.operations} ops in {seconds:.2f}s",
        extra={"operation": "bench", "event_type": "bench_finished", "duration": seconds},
    )
    return report


def sweep(
    device_factory: Callable[[], DataLairDevice],
    spec: BenchSpec,
    ratios: Iterable[int] = SWEEP_RATIOS,
    policies: Sequence[PhiPolicy] = SWEEP_POLICIES,
) -> List[BenchReport]:
    """Public-write cost as the public:hidden ratio grows, one fresh device per point"""
    reports = []
    for policy in policies:
        for ratio in ratios:
            device = device_factory()
            try:
                point = spec.model_copy(update={"phi_policy": policy, "ratio": ratio})
                reports.append(run_bench(device, point))
            finally:
                device.unmount()
    return reports
