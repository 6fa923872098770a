"""
Line-delimited JSON records plus a short human summary
"""

import sys
from typing import Iterable, List, Optional, TextIO

from pydantic import BaseModel

from models.reports import TestRecord


def emit_records(records: Iterable[BaseModel], stream: Optional[TextIO] = None) -> None:
    stream = stream or sys.stdout
    for record in records:
        stream.write(record.model_dump_json() + "\n")
    stream.flush()


def summarize(records: List[TestRecord]) -> str:
    lines = []
    for record in records:
        status = "PASS" if record.passed else "FAIL"
        p = f"p={record.p_value:.4g}" if record.p_value is not None else "p=-"
        lines.append(
            f"{status}  {record.name:<32} stat={record.statistic:.4g}  {p}  alpha={record.alpha:.3g}"
        )
    failed = sum(1 for r in records if not r.passed)
    lines.append(f"{len(records) - failed}/{len(records)} passed")
    return "\n".join(lines)
