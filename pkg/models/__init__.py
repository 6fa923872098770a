"""
Pydantic models for device geometry, modes and emitted records
"""

from .device import (
    DeviceGeometry,
    DeviceMode,
    KdfParams,
    Layout,
    ModeConfig,
    OpLabel,
    PhiPolicy,
    Region,
    RegionSpan,
)

from .reports import (
    AuditCheck,
    AuditReport,
    BenchReport,
    BenchSpec,
    BiasReport,
    CommandRecord,
    ErrorRecord,
    GameResult,
    OpCost,
    TestRecord,
)

__all__ = [
    # Device models
    "DeviceGeometry",
    "DeviceMode",
    "KdfParams",
    "Layout",
    "ModeConfig",
    "OpLabel",
    "PhiPolicy",
    "Region",
    "RegionSpan",
    # Records
    "AuditCheck",
    "AuditReport",
    "BenchReport",
    "BenchSpec",
    "BiasReport",
    "CommandRecord",
    "ErrorRecord",
    "GameResult",
    "OpCost",
    "TestRecord",
]
