"""
Free-block bias attack.

Before each hidden write the free and occupied sets are recorded (ground truth
the attacker would be estimating); after it the touched data blocks are read
off the write trace. An unbiased protocol touches a free block exactly as
often as an occupied one.
"""

import logging
import math

from crypto_env import RandomSource
from dl_oram import DlOram
from models.device import Region
from models.reports import BiasReport

logger = logging.getLogger(__name__)


def bias_attack(oram: DlOram, writes: int, rng: RandomSource) -> BiasReport:
    store = oram.store
    data_start = oram.geometry.region_start(Region.DATA)
    block_size = oram.geometry.block_size
    free_trials = occupied_trials = 0
    free_hits = occupied_hits = 0

    for _ in range(writes):
        free = set(oram.fbm.valid_addresses())
        occupied = set(oram.nfbm.occupied_addresses())
        store.begin_trace("bias_attack")
        try:
            oram.write_oram(rng.below(oram.logical_capacity), rng.bytes(block_size))
        finally:
            trace = store.end_trace()
        touched = {i - data_start for i in trace.in_region(Region.DATA)}
        free_hits += len(touched & free)
        occupied_hits += len(touched & occupied)
        free_trials += len(free)
        occupied_trials += len(occupied)

    p_free = free_hits / free_trials
    p_occupied = occupied_hits / occupied_trials
    advantage = p_free - p_occupied
    se = math.sqrt(
        p_free * (1 - p_free) / free_trials + p_occupied * (1 - p_occupied) / occupied_trials
    )
    touched_total = free_hits + occupied_hits
    report = BiasReport(
        writes=writes,
        observations=free_trials + occupied_trials,
        n_blocks=oram.geometry.n_blocks,
        rounds_per_write=oram.rounds_per_write,
        legacy=oram.mode.legacy_selection,
        p_touch_free=p_free,
        p_touch_occupied=p_occupied,
        advantage=advantage,
        standard_error=se,
        z_score=advantage / se if se > 0 else 0.0,
        normalised_advantage=advantage * oram.geometry.n_blocks / oram.runs,
        classifier_accuracy=free_hits / touched_total if touched_total else 0.5,
    )
    logger.info(
        f"Bias attack over {writes} writes: advantage {advantage:.5f} (z={report.z_score:.2f})",
        extra={"operation": "bias_attack", "event_type": "bias_attack"},
    )
    return report
