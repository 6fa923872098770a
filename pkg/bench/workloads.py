"""
Block id streams and operation mixes for benchmarks
"""

from enum import Enum
from typing import List

import numpy as np

from exceptions import ValidationError
from models.reports import BenchSpec


class BenchOp(str, Enum):
    PUBLIC_WRITE = "public_write"
    PUBLIC_READ = "public_read"
    HIDDEN_WRITE = "hidden_write"
    HIDDEN_READ = "hidden_read"


def zipf_probabilities(domain: int, exponent: float) -> np.ndarray:
    """Bounded zipf: rank r is drawn with probability proportional to r^-s"""
    ranks = np.arange(1, domain + 1, dtype=np.float64)
    weights = ranks ** -exponent
    return weights / weights.sum()


def block_ids(
    workload: str,
    domain: int,
    count: int,
    rng: np.random.Generator,
    exponent: float = 1.0,
) -> np.ndarray:
    if domain < 1:
        raise ValidationError("A workload needs a non-empty id domain")
    if workload == "sequential":
        return np.arange(count, dtype=np.int64) % domain
    if workload == "random":
        return rng.integers(0, domain, size=count, dtype=np.int64)
    if workload == "zipfian":
        # hot ids are scattered over the domain, not clustered at 0
        ranked = rng.permutation(domain)
        picks = rng.choice(domain, size=count, p=zipf_probabilities(domain, exponent))
        return ranked[picks]
    raise ValidationError(f"Unknown workload '{workload}'", field_errors={"workload": workload})


def op_mix(spec: BenchSpec, rng: np.random.Generator) -> List[BenchOp]:
    weights = np.array(
        [
            spec.public_write_fraction,
            spec.public_read_fraction,
            spec.hidden_write_fraction,
            spec.hidden_read_fraction,
        ],
        dtype=np.float64,
    )
    if weights.sum() <= 0:
        raise ValidationError("The operation mix is empty")
    kinds = list(BenchOp)
    drawn = rng.choice(len(kinds), size=spec.operations, p=weights / weights.sum())
    return [kinds[i] for i in drawn]
