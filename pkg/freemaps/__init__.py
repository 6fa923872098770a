"""
Free-block bookkeeping: FBM, N-FBM and the N-FBM bitmap
"""

from .bitmap import SlotBitmap
from .fbm import Fbm, FbmReceipt
from .indexed_set import IndexedSet
from .layout import NULL_ADDRESS, NULL_SLOT, MatrixLayout, NfbmCoord
from .nfbm import Nfbm

__all__ = [
    "NULL_ADDRESS",
    "NULL_SLOT",
    "Fbm",
    "FbmReceipt",
    "IndexedSet",
    "MatrixLayout",
    "Nfbm",
    "NfbmCoord",
    "SlotBitmap",
]
