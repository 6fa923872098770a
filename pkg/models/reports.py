"""
Pydantic models for records emitted by the CLI, audit, harness and bench
"""

from datetime import datetime, timezone

UTC = timezone.utc
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator

from .device import PhiPolicy


class ErrorRecord(BaseModel):
    """Error record written to stderr by the CLI"""

    error_code: str = Field(..., description="Error code identifier")
    message: str = Field(..., description="Human-readable error message")
    details: Optional[dict] = Field(None, description="Additional error details")
    timestamp: datetime = Field(
        default_factory=lambda: datetime.now(UTC), description="Error timestamp"
    )

    @field_serializer("timestamp")
    def serialize_timestamp(self, value: datetime) -> str:
        return value.isoformat()

    model_config = ConfigDict()


class CommandRecord(BaseModel):
    """Successful command outcome"""

    command: str
    status: str = "ok"
    details: Dict[str, Any] = Field(default_factory=dict)


class TestRecord(BaseModel):
    """One statistical test result"""

    __test__ = False  # not a pytest test class

    name: str = Field(..., min_length=1)
    statistic: float
    p_value: Optional[float] = Field(None, ge=0.0, le=1.0)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)


class GameResult(BaseModel):
    """Outcome of a PD-CPA game run"""

    rounds: int = Field(..., ge=1)
    wins: int = Field(..., ge=0)
    win_rate: float = Field(..., ge=0.0, le=1.0)
    ci_low: float = Field(..., ge=0.0, le=1.0)
    ci_high: float = Field(..., ge=0.0, le=1.0)
    p_value: float = Field(..., ge=0.0, le=1.0)
    distinguisher: str
    granularity: str = "round"
    mean_changed_blocks: float = 0.0

    @property
    def advantage(self) -> float:
        return abs(self.win_rate - 0.5)


class BiasReport(BaseModel):
    """Touch-rate comparison of free and occupied data blocks"""

    writes: int = Field(..., ge=1)
    observations: int = Field(..., description="(block, write) pairs scored")
    n_blocks: int
    rounds_per_write: int
    legacy: bool
    p_touch_free: float
    p_touch_occupied: float
    advantage: float
    standard_error: float
    z_score: float
    normalised_advantage: float = Field(
        ..., description="advantage * N / runs per write; flat when the bias scales as 1/N"
    )
    classifier_accuracy: float = Field(
        ..., description="Share of touched blocks that were free before the write"
    )


class AuditCheck(BaseModel):
    """Result of one structural check"""

    name: str
    passed: bool
    detail: str = ""


class AuditReport(BaseModel):
    """All structural checks of one device"""

    checks: List[AuditCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[AuditCheck]:
        return [check for check in self.checks if not check.passed]


class BenchSpec(BaseModel):
    """Benchmark workload description"""

    workload: str = Field(default="random", description="sequential, random or zipfian")
    operations: int = Field(default=1000, ge=1)
    public_write_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    hidden_write_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    hidden_read_fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    phi_policy: PhiPolicy = Field(default=PhiPolicy.EVERY_WRITE)
    ratio: int = Field(default=1, ge=1, description="Public writes per hidden step")
    zipf_exponent: float = Field(default=1.0, gt=0.0)
    seed: Optional[int] = None

    @field_validator("workload")
    @classmethod
    def validate_workload(cls, v):
        v = v.lower()
        if v not in {"sequential", "random", "zipfian"}:
            raise ValueError("workload must be sequential, random or zipfian")
        return v

    @property
    def public_read_fraction(self) -> float:
        rest = 1.0 - (
            self.public_write_fraction
            + self.hidden_write_fraction
            + self.hidden_read_fraction
        )
        return max(rest, 0.0)


class OpCost(BaseModel):
    """Per-operation-type I/O accounting"""

    count: int = 0
    reads: int = 0
    writes: int = 0

    @property
    def reads_per_op(self) -> float:
        return self.reads / self.count if self.count else 0.0

    @property
    def writes_per_op(self) -> float:
        return self.writes / self.count if self.count else 0.0


class BenchReport(BaseModel):
    """Benchmark outcome"""

    spec: BenchSpec
    operations: int
    seconds: float
    ops_per_sec: float
    costs: Dict[str, OpCost] = Field(default_factory=dict)
    stash_high_water: int = 0
    hidden_step_writes: Optional[int] = None
    expected_hidden_step_writes: Optional[int] = None

    @property
    def ops_per_block_write(self) -> float:
        """Host-independent throughput: logical operations per physical block write"""
        writes = sum(cost.writes for cost in self.costs.values())
        return self.operations / writes if writes else float(self.operations)
