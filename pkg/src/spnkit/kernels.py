"""Kernel backend selection.

The compiled Cython extension is preferred when importable; the numpy
fallback is selected otherwise, or when SPNKIT_PURE_PYTHON=1 is set.
Both expose the same functions with bit-identical results.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("SPNKIT_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND_NAME

popcount_packed = _impl.popcount_packed
hamming_packed = _impl.hamming_packed
packed_counts = _impl.packed_counts
sc_decode = _impl.sc_decode


def backends() -> dict:
    """All importable backends keyed by name (used by the kernel benchmark)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        found["compiled"] = _kernels
    except ImportError:
        pass
    return found
