"""
DataLair device mapper: public volume, hidden volume and lifecycle
"""

from .audit import run_audit
from .device import DataLairDevice, TraceCapture
from .header import PUBLIC_MAGIC, PublicHeader
from .pfl import Pfl
from .ppm import Ppm

__all__ = [
    "PUBLIC_MAGIC",
    "DataLairDevice",
    "Pfl",
    "Ppm",
    "PublicHeader",
    "TraceCapture",
    "run_audit",
]
