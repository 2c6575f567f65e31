"""Backend selection for the hot traversal kernel.

The compiled extension is used when it imports; setting ``MMOT_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _traverse_py

try:
    if os.environ.get("MMOT_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python backend requested")
    from . import _traverse as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _traverse_py.traverse_rays}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.traverse_rays

BACKEND = "compiled" if _compiled is not None else "python"
traverse_rays = BACKENDS[BACKEND]

__all__ = ["BACKEND", "BACKENDS", "traverse_rays"]
