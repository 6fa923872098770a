"""
PD-CPA harness: the game, adversaries, statistics, attacks and the battery
"""

from .battery import SCALES, BatteryScale, run_battery
from .bias import bias_attack
from .distinguishers import (
    DISTINGUISHERS,
    CardinalityDistinguisher,
    ConstantDistinguisher,
    FrequencyDistinguisher,
    RegionHistogramDistinguisher,
    get_distinguisher,
)
from .game import (
    AccessPattern,
    Distinguisher,
    Observation,
    Op,
    OpKind,
    check_legal,
    diff,
    execute,
    paired_patterns,
    run_game,
)
from .report import emit_records, summarize
from .stats import (
    binomial_ci,
    binomial_p_value,
    bonferroni,
    merge_bins,
    two_sample_test,
    uniformity_test,
)

__all__ = [
    "AccessPattern",
    "BatteryScale",
    "CardinalityDistinguisher",
    "ConstantDistinguisher",
    "DISTINGUISHERS",
    "Distinguisher",
    "FrequencyDistinguisher",
    "Observation",
    "Op",
    "OpKind",
    "RegionHistogramDistinguisher",
    "SCALES",
    "binomial_ci",
    "binomial_p_value",
    "bias_attack",
    "bonferroni",
    "check_legal",
    "diff",
    "emit_records",
    "execute",
    "get_distinguisher",
    "merge_bins",
    "paired_patterns",
    "run_battery",
    "run_game",
    "summarize",
    "two_sample_test",
    "uniformity_test",
]
