"""
Consistency audit of a mounted device.

Checks that can only be made with the hidden key are reported as passed with
a "skipped" detail when the device is mounted public-only.
"""

import logging
from typing import Callable, List, Tuple

from block_store import NULL_INDEX, SealedRegion
from freemaps import NULL_ADDRESS, Fbm, MatrixLayout
from models.device import Layout, Region
from models.reports import AuditCheck, AuditReport
from .device import DataLairDevice

logger = logging.getLogger(__name__)


def _check(name: str, passed: bool, detail: str = "") -> AuditCheck:
    return AuditCheck(name=name, passed=bool(passed), detail="" if passed else detail)


def _fbm_compact(device: DataLairDevice) -> AuditCheck:
    oram = device.oram
    layout = MatrixLayout.for_geometry(device.geometry)
    stored = Fbm.load(
        layout,
        SealedRegion(device.store, Region.FBM_COLUMNS, device.hid_key, device.rng),
        SealedRegion(device.store, Region.FBM_HEADER, device.hid_key, device.rng),
    )
    valid = stored.valid_addresses()
    ok = (
        stored.is_compact()
        and NULL_ADDRESS not in valid
        and sorted(valid) == sorted(oram.fbm.valid_addresses())
    )
    return _check("fbm_compact", ok, "on-disk FBM header or columns disagree with the free set")


def _fbm_nfbm_disjoint(device: DataLairDevice) -> AuditCheck:
    oram = device.oram
    overlap = set(oram.fbm.valid_addresses()) & set(oram.nfbm.occupied_addresses())
    return _check("fbm_nfbm_disjoint", not overlap, f"{len(overlap)} addresses in both maps")


def _bitmap_consistent(device: DataLairDevice) -> AuditCheck:
    nfbm = device.oram.nfbm
    bad = [
        s for s in range(nfbm.layout.n_slots)
        if nfbm.bitmap.is_free(s) == (s in nfbm.occupied)
    ]
    return _check("bitmap_consistent", not bad, f"{len(bad)} slots disagree with the bitmap")


def _pfl_bijection(device: DataLairDevice) -> AuditCheck:
    data, fma = device.data, device.pfl.fma
    forward = all(data.fma_index[a] == i for i, a in enumerate(fma))
    backward = sum(1 for index in data.fma_index if index != NULL_INDEX) == len(fma)
    return _check("pfl_bijection", forward and backward, "FMA and RMA records disagree")


def _ppm_fma_disjoint(device: DataLairDevice) -> AuditCheck:
    clash = [a for a in device.ppm.mapped_addresses() if a in device.pfl]
    return _check("ppm_fma_disjoint", not clash, f"{len(clash)} public blocks still on the free list")


def _occupancy_cap(device: DataLairDevice) -> AuditCheck:
    g = device.geometry
    ok = device.ppm.mapped_count <= g.public_blocks
    if g.layout == Layout.FULL:
        ok = ok and device.hidden_capacity + g.public_blocks <= g.n_blocks // 2
    else:
        ok = ok and device.hidden_capacity <= g.oram_occupancy
    return _check("occupancy_cap", ok, "public plus hidden logical space exceeds the cap")


def _accounting(device: DataLairDevice) -> AuditCheck:
    oram = device.oram
    total = oram.fbm.valid_count + oram.nfbm.occupied_count + device.ppm.mapped_count
    return _check(
        "accounting_identity",
        total == device.geometry.n_blocks,
        f"free + occupied + public = {total}, expected {device.geometry.n_blocks}",
    )


def _balance(device: DataLairDevice) -> AuditCheck:
    oram = device.oram
    bound = 2 + device.geometry.stash_capacity
    return _check(
        "free_occupied_balance",
        abs(oram.imbalance) <= bound,
        f"imbalance {oram.imbalance} outside +/-{bound}",
    )


_PUBLIC_CHECKS: List[Callable[[DataLairDevice], AuditCheck]] = [
    _pfl_bijection,
    _ppm_fma_disjoint,
    _occupancy_cap,
]
_HIDDEN_CHECKS: List[Tuple[str, Callable[[DataLairDevice], AuditCheck]]] = [
    ("fbm_compact", _fbm_compact),
    ("fbm_nfbm_disjoint", _fbm_nfbm_disjoint),
    ("bitmap_consistent", _bitmap_consistent),
    ("accounting_identity", _accounting),
    ("free_occupied_balance", _balance),
]


def run_audit(device: DataLairDevice) -> AuditReport:
    checks = [check(device) for check in _PUBLIC_CHECKS]
    for name, check in _HIDDEN_CHECKS:
        if device.oram is None:
            checks.append(AuditCheck(name=name, passed=True, detail="skipped"))
        else:
            checks.append(check(device))
    report = AuditReport(checks=checks)
    if report.passed:
        logger.info("Audit passed", extra={"operation": "audit", "event_type": "audit"})
    else:
        logger.warning(
            f"Audit failed: {', '.join(c.name for c in report.failed())}",
            extra={"operation": "audit", "event_type": "audit"},
        )
    return report
