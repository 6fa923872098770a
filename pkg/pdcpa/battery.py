"""
Test battery: every indistinguishability and bound check as a TestRecord.

``quick`` runs in seconds on tiny devices; ``full`` uses the acceptance
budgets. α is Bonferroni-corrected over the number of records emitted.
"""

import logging
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import stats

from bench import block_ids
from crypto_env import RandomSource
from datalair import DataLairDevice, run_audit
from exceptions import HiddenQueueFullError, StashOverflowError, ValidationError
from models.device import KdfParams, ModeConfig, Region
from models.reports import TestRecord
from .bias import bias_attack
from .distinguishers import FrequencyDistinguisher
from .game import paired_patterns, run_game
from .stats import binomial_ci, binomial_p_value, bonferroni, two_sample_test, uniformity_test

logger = logging.getLogger(__name__)

# key derivation is not under test here
FAST_KDF = KdfParams(time_cost=1, memory_cost=8, parallelism=1)
PUBLIC_PASSWORD = "battery-public"
HIDDEN_PASSWORD = "battery-hidden"

# records emitted per battery run (used for the Bonferroni correction)
RECORD_COUNT = 13


@dataclass(frozen=True)
class BatteryScale:
    """Device sizes and operation budgets, one pair per check"""

    name: str
    n_blocks: int
    block_size: int
    operations: int
    oracle_blocks: int
    oracle_operations: int
    pat_operations: int
    hwa_blocks: int
    hwa_writes: int
    touch_blocks: int
    touch_writes: int
    stash_blocks: int
    stash_writes: int
    io_sizes: Tuple[int, ...]
    game_rounds: int
    bias_blocks: int
    # (block, write) pairs scored by the attack
    bias_observations: int


SCALES: Dict[str, BatteryScale] = {
    "quick": BatteryScale(
        name="quick",
        n_blocks=256,
        block_size=512,
        operations=200,
        oracle_blocks=256,
        oracle_operations=400,
        pat_operations=200,
        hwa_blocks=256,
        hwa_writes=200,
        touch_blocks=256,
        touch_writes=2000,
        stash_blocks=256,
        stash_writes=200,
        io_sizes=(256, 1024),
        game_rounds=200,
        bias_blocks=256,
        bias_observations=40_000,
    ),
    "full": BatteryScale(
        name="full",
        n_blocks=2**14,
        block_size=4096,
        operations=10_000,
        oracle_blocks=2**14,
        oracle_operations=100_000,
        pat_operations=2000,
        hwa_blocks=2**12,
        hwa_writes=10_000,
        touch_blocks=1024,
        touch_writes=100_000,
        stash_blocks=2**12,
        stash_writes=100_000,
        io_sizes=(2**10, 2**14, 2**19),
        game_rounds=2000,
        bias_blocks=256,
        bias_observations=1_000_000,
    ),
}


@dataclass
class BatteryContext:
    scale: BatteryScale
    workdir: Path
    rng: RandomSource
    alpha: float
    config: ModeConfig

    def device(
        self,
        name: str,
        hidden: bool = True,
        n_blocks: Optional[int] = None,
        block_size: Optional[int] = None,
        config: Optional[ModeConfig] = None,
    ) -> DataLairDevice:
        return DataLairDevice.format(
            self.workdir / f"{name}.img",
            n_blocks or self.scale.n_blocks,
            PUBLIC_PASSWORD,
            HIDDEN_PASSWORD if hidden else None,
            block_size=block_size or self.scale.block_size,
            kdf=FAST_KDF,
            config=config or self.config,
            rng=self.rng.fork(name),
        )


def _data_indices(device: DataLairDevice, trace) -> List[int]:
    start = device.geometry.region_start(Region.DATA)
    return [i - start for i in trace.in_region(Region.DATA)]


def _trace_shape_determinism(ctx: BatteryContext) -> List[TestRecord]:
    device = ctx.device("shape")
    try:
        oram = device.oram
        expected = oram.expected_shape()
        mismatches = 0
        for i in range(ctx.scale.operations):
            with device.capture("hidden_step") as captured:
                if i % 4 == 3:
                    oram.simulate_write()
                else:
                    oram.write_oram(
                        ctx.rng.below(oram.logical_capacity),
                        ctx.rng.bytes(device.geometry.block_size),
                    )
            mismatches += captured.trace.shape() != expected
    finally:
        device.unmount()
    return [
        TestRecord(
            name="trace_shape_determinism",
            statistic=mismatches,
            alpha=ctx.alpha,
            passed=mismatches == 0,
            details={"operations": ctx.scale.operations, "expected_writes": sum(expected.values())},
        )
    ]


def _public_access_patterns(ctx: BatteryContext) -> List[TestRecord]:
    """Same public workload with and without concurrent hidden writes"""
    public_only = ctx.device("pat_only_pub", hidden=False)
    with_hidden = ctx.device("pat_pub_hid", hidden=True)
    workload = ctx.rng.fork("pat-workload")
    mismatches = 0
    touched_only, touched_hidden = [], []
    try:
        for _ in range(ctx.scale.pat_operations):
            public_id = workload.below(public_only.public_blocks)
            block = workload.bytes(public_only.geometry.block_size)
            if len(with_hidden.queue) < 4:
                with_hidden.hidden_write(
                    workload.below(with_hidden.hidden_capacity),
                    workload.bytes(with_hidden.geometry.block_size),
                )
            with public_only.capture("public_write") as a:
                public_only.public_write(public_id, block)
            with with_hidden.capture("public_write") as b:
                with_hidden.public_write(public_id, block)
            mismatches += a.trace.shape() != b.trace.shape()
            touched_only.extend(_data_indices(public_only, a.trace))
            touched_hidden.extend(_data_indices(with_hidden, b.trace))
    finally:
        public_only.unmount()
        with_hidden.unmount()
    chi2, p = two_sample_test(touched_only, touched_hidden, ctx.scale.n_blocks)
    return [
        TestRecord(
            name="pat_shape_equality",
            statistic=mismatches,
            alpha=ctx.alpha,
            passed=mismatches == 0,
            details={"operations": ctx.scale.pat_operations},
        ),
        TestRecord(
            name="pat_location_two_sample",
            statistic=chi2,
            p_value=p,
            alpha=ctx.alpha,
            passed=p >= ctx.alpha,
        ),
    ]


def _hidden_write_uniformity(ctx: BatteryContext) -> List[TestRecord]:
    device = ctx.device("hwa", n_blocks=ctx.scale.hwa_blocks)
    real, simulated = [], []
    try:
        oram = device.oram
        for _ in range(ctx.scale.hwa_writes):
            with device.capture("hidden_write") as captured:
                oram.write_oram(
                    ctx.rng.below(oram.logical_capacity),
                    ctx.rng.bytes(device.geometry.block_size),
                )
            real.extend(_data_indices(device, captured.trace))
            with device.capture("simulated_write") as captured:
                oram.simulate_write()
            simulated.extend(_data_indices(device, captured.trace))
    finally:
        device.unmount()
    n = ctx.scale.hwa_blocks
    records = []
    for name, samples in (("hwa_uniformity_real", real), ("hwa_uniformity_simulated", simulated)):
        chi2, p = uniformity_test(samples, n)
        records.append(
            TestRecord(name=name, statistic=chi2, p_value=p, alpha=ctx.alpha, passed=p >= ctx.alpha)
        )
    chi2, p = two_sample_test(real, simulated, n)
    records.append(
        TestRecord(
            name="hwa_real_vs_simulated",
            statistic=chi2,
            p_value=p,
            alpha=ctx.alpha,
            passed=p >= ctx.alpha,
        )
    )
    return records


def _correctness_oracle(ctx: BatteryContext) -> List[TestRecord]:
    """Zipfian mixed workload checked read by read against in-memory shadows"""
    device = ctx.device("oracle", n_blocks=ctx.scale.oracle_blocks)
    generator = np.random.default_rng(ctx.rng.below(2**32))
    operations = ctx.scale.oracle_operations
    block_size = device.geometry.block_size
    kinds = generator.choice(4, size=operations, p=[0.4, 0.2, 0.3, 0.1])
    public_ids = block_ids("zipfian", device.public_blocks, operations, generator)
    hidden_ids = block_ids("zipfian", device.hidden_capacity, operations, generator)
    public_shadow: Dict[int, bytes] = {}
    hidden_shadow: Dict[int, bytes] = {}
    reads = mismatches = 0
    try:
        for kind, public_id, hidden_id in zip(kinds, public_ids.tolist(), hidden_ids.tolist()):
            if kind == 0:
                public_shadow[public_id] = generator.bytes(block_size)
                device.public_write(public_id, public_shadow[public_id])
            elif kind == 1 and public_id in public_shadow:
                reads += 1
                mismatches += device.public_read(public_id) != public_shadow[public_id]
            elif kind == 2:
                block = generator.bytes(block_size)
                try:
                    device.hidden_write(hidden_id, block)
                except HiddenQueueFullError:
                    if not device.ppm.mapped_count:
                        continue
                    device.flush_hidden()
                    device.hidden_write(hidden_id, block)
                hidden_shadow[hidden_id] = block
            elif kind == 3 and hidden_id in hidden_shadow:
                reads += 1
                mismatches += device.hidden_read(hidden_id) != hidden_shadow[hidden_id]
        for public_id, block in public_shadow.items():
            reads += 1
            mismatches += device.public_read(public_id) != block
        for hidden_id, block in hidden_shadow.items():
            reads += 1
            mismatches += device.hidden_read(hidden_id) != block
        audit = run_audit(device)
    finally:
        device.unmount()
    return [
        TestRecord(
            name="correctness_oracle",
            statistic=mismatches,
            alpha=ctx.alpha,
            passed=mismatches == 0 and audit.passed,
            details={
                "operations": operations,
                "reads": reads,
                "n_blocks": ctx.scale.oracle_blocks,
                "audit_failures": [c.name for c in audit.failed()],
            },
        )
    ]


def _free_block_touch_probability(ctx: BatteryContext) -> List[TestRecord]:
    """A given free block is picked in one selection run with probability k/N"""
    device = ctx.device("touch", n_blocks=ctx.scale.touch_blocks)
    try:
        oram = device.oram
        writes = ctx.scale.touch_writes
        picks = 0
        for _ in range(writes):
            plan = oram.select_free_blocks(oram.runs)
            picks += len(plan.free_picks())
            oram.release_plan(plan)
        trials = writes * oram.runs * oram.fbm.valid_count
        target = oram.k / device.geometry.n_blocks
    finally:
        device.unmount()
    low, high = binomial_ci(picks, trials, 1 - ctx.alpha)
    return [
        TestRecord(
            name="free_block_touch_probability",
            statistic=picks / trials,
            p_value=binomial_p_value(picks, trials, target),
            alpha=ctx.alpha,
            passed=low <= target <= high,
            details={
                "expected": target,
                "ci": [low, high],
                "writes": writes,
                "n_blocks": ctx.scale.touch_blocks,
            },
        )
    ]


def _stash_bound(ctx: BatteryContext) -> List[TestRecord]:
    device = ctx.device("stash", n_blocks=ctx.scale.stash_blocks)
    overflow = False
    try:
        oram = device.oram
        try:
            for _ in range(ctx.scale.stash_writes):
                oram.write_oram(
                    ctx.rng.below(oram.logical_capacity),
                    ctx.rng.bytes(device.geometry.block_size),
                )
        except StashOverflowError:
            overflow = True
        high_water = oram.stash.high_water
        capacity = oram.stash.capacity
    finally:
        device.unmount()
    return [
        TestRecord(
            name="stash_bound",
            statistic=high_water,
            alpha=ctx.alpha,
            passed=not overflow and high_water <= capacity,
            details={"capacity": capacity, "writes": ctx.scale.stash_writes},
        )
    ]


def _io_counts(ctx: BatteryContext) -> List[TestRecord]:
    """Hidden steps write exactly the closed-form count; public reads cost 2"""
    results = []
    for n_blocks in ctx.scale.io_sizes:
        device = ctx.device(f"io_{n_blocks}", n_blocks=n_blocks)
        try:
            block_size = device.geometry.block_size
            device.public_write(0, ctx.rng.bytes(block_size))
            expected = device.expected_hidden_step_writes()
            measured = set()
            for logical_id in range(3):
                device.hidden_write(logical_id, ctx.rng.bytes(block_size))
                with device.capture("hidden_step") as captured:
                    device.hidden_step()
                measured.add(len(captured.trace))
            reads = device.store.stats.reads
            device.public_read(0)
            public_reads = device.store.stats.reads - reads
            results.append(
                {
                    "n_blocks": n_blocks,
                    "depth": device.shape.depth,
                    "expected": expected,
                    "measured": sorted(measured),
                    "public_reads": public_reads,
                }
            )
        finally:
            device.unmount()
            device.store.path.unlink(missing_ok=True)
    exact = all(r["measured"] == [r["expected"]] and r["public_reads"] == 2 for r in results)
    depths = [r["depth"] for r in results]
    return [
        TestRecord(
            name="hidden_write_io_counts",
            statistic=sum(len(r["measured"]) != 1 for r in results),
            alpha=ctx.alpha,
            passed=exact and depths == sorted(depths),
            details={"sizes": results},
        )
    ]


def _bias(ctx: BatteryContext) -> List[TestRecord]:
    records = []
    for legacy in (True, False):
        name = "legacy" if legacy else "fixed"
        config = ctx.config.model_copy(update={"legacy_selection": legacy})
        device = ctx.device(f"bias_{name}", n_blocks=ctx.scale.bias_blocks, block_size=512, config=config)
        try:
            oram = device.oram
            # every free or occupied block is scored once per write
            per_write = oram.fbm.valid_count + oram.nfbm.occupied_count
            writes = math.ceil(ctx.scale.bias_observations / per_write)
            report = bias_attack(oram, writes, ctx.rng.fork(f"bias-{name}"))
        finally:
            device.unmount()
        if legacy:
            p = float(stats.norm.sf(report.z_score))
        else:
            p = float(2 * stats.norm.sf(abs(report.z_score)))
        records.append(
            TestRecord(
                name=f"bias_{name}",
                statistic=report.z_score,
                p_value=p,
                alpha=ctx.alpha,
                # the legacy protocol must show the bias, the fixed one must not
                passed=(p < ctx.alpha) if legacy else (p >= ctx.alpha),
                details=report.model_dump(),
            )
        )
    return records


def _game(ctx: BatteryContext) -> List[TestRecord]:
    device = ctx.device("game")
    with_hidden, public_only = paired_patterns(device, ctx.rng.fork("game-patterns"))
    try:
        result = run_game(
            device,
            with_hidden,
            public_only,
            ctx.scale.game_rounds,
            FrequencyDistinguisher(),
            ctx.rng.fork("game-coins"),
        )
    finally:
        device.unmount()
    return [
        TestRecord(
            name="pdcpa_game_frequency",
            statistic=result.win_rate,
            p_value=result.p_value,
            alpha=ctx.alpha,
            passed=result.p_value >= ctx.alpha,
            details=result.model_dump(),
        )
    ]


BATTERY: List[Callable[[BatteryContext], List[TestRecord]]] = [
    _correctness_oracle,
    _trace_shape_determinism,
    _public_access_patterns,
    _hidden_write_uniformity,
    _free_block_touch_probability,
    _stash_bound,
    _io_counts,
    _bias,
    _game,
]


def run_battery(
    scale: str = "quick",
    seed: Optional[int] = None,
    alpha: float = 0.01,
    config: Optional[ModeConfig] = None,
    workdir: Optional[Path] = None,
) -> List[TestRecord]:
    if scale not in SCALES:
        raise ValidationError(f"Unknown battery scale '{scale}'", field_errors={"scale": scale})
    corrected = bonferroni(alpha, RECORD_COUNT)
    records: List[TestRecord] = []
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        ctx = BatteryContext(
            scale=SCALES[scale],
            workdir=Path(tmp),
            rng=RandomSource(seed),
            alpha=corrected,
            config=config or ModeConfig(),
        )
        for test in BATTERY:
            logger.info(f"Battery: {test.__name__.lstrip('_')}", extra={"operation": "battery"})
            records.extend(test(ctx))
    return records
