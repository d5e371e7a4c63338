"""Selects the training-loop backend at import time.

The compiled extension is preferred; the pure-Python twin is used when the
extension is unavailable or when SPECGAME_FORCE_PY is set. Both walk the
same random stream, so results are bit-identical either way.
"""

from __future__ import annotations

import os

if os.environ.get("SPECGAME_FORCE_PY"):
    from . import _qkernel_py as _impl
else:
    try:
        from . import _qkernel as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _qkernel_py as _impl

train = _impl.train
BACKEND: str = _impl.BACKEND
