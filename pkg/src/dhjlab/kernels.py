"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Both implementations satisfy identical contracts (documented in
``_kernels_py``); external behavior does not depend on which one is active.
Set ``DHJLAB_FORCE_PY=1`` to force the pure-Python kernels.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("DHJLAB_FORCE_PY") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

scan_lines = _impl.scan_lines
class_counts = _impl.class_counts
bb_max_independent = _impl.bb_max_independent
IMPLEMENTATION: str = _impl.IMPLEMENTATION

__all__ = ["scan_lines", "class_counts", "bb_max_independent", "IMPLEMENTATION"]
