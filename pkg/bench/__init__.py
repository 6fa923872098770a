"""
Benchmark workloads and runner
"""

from .runner import SWEEP_POLICIES, SWEEP_RATIOS, hidden_write_cost, run_bench, sweep
from .workloads import BenchOp, block_ids, op_mix, zipf_probabilities

__all__ = [
    "BenchOp",
    "SWEEP_POLICIES",
    "SWEEP_RATIOS",
    "block_ids",
    "hidden_write_cost",
    "op_mix",
    "run_bench",
    "sweep",
    "zipf_probabilities",
]
