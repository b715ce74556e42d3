"""Numeric kernel dispatch.

The compiled ``_core`` extension is preferred; the numpy twin in
``_fallback`` is used when the extension is missing or when the
environment variable ``ASD_PURE_PYTHON`` is set to a non-empty value
other than ``0``.
"""
import os

from . import _fallback

BACKEND = "python"

if os.environ.get("ASD_PURE_PYTHON", "0") in ("", "0"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

reflect_index = _impl.reflect_index
bilinear_resize = _impl.bilinear_resize
gather_patches = _impl.gather_patches
mahalanobis_batch = _impl.mahalanobis_batch
roc_counts = _impl.roc_counts

__all__ = [
    "BACKEND",
    "reflect_index",
    "bilinear_resize",
    "gather_patches",
    "mahalanobis_batch",
    "roc_counts",
]
