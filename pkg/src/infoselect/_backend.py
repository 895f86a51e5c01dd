"""Pick the compiled core when it is importable.

Set ``INFOSELECT_PURE=1`` to force the numpy fallback.
"""

import os

from . import _fallback

if os.environ.get("INFOSELECT_PURE"):
    _core = None
else:
    try:
        from . import _core
    except ImportError:
        _core = None

impl = _core if _core is not None else _fallback
BACKEND = "cython" if _core is not None else "numpy"

facility_scores = impl.facility_scores
nearest_selected = impl.nearest_selected
