"""Propagation backends.

The compiled Cython kernel is preferred and picked up at import time; the
pure-numpy kernel is the fallback and the reference for cross-checking.
Set ``CRITPULSE_ENGINE=python`` (or ``cython``) to force a backend.
"""

from __future__ import annotations

import math
import os

from . import pykernel
from .bands import BandedModel, apply_bands, banded_model, bands_from_dense, dense_from_bands

_FORCED = os.environ.get("CRITPULSE_ENGINE", "").strip().lower()

_cykernel = None
if _FORCED in ("", "cython", "cy"):
    try:
        from . import _cykernel  # type: ignore[no-redef]
    except ImportError:
        _cykernel = None
        if _FORCED:
            raise

if _cykernel is not None:
    propagate = _cykernel.propagate
    BACKEND = "cython"
else:
    propagate = pykernel.propagate
    BACKEND = "python"


def backend_name() -> str:
    return BACKEND


def available_backends() -> dict:
    out = {"python": pykernel.propagate}
    if _cykernel is not None:
        out["cython"] = _cykernel.propagate
    return out
