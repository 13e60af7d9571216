"""Backend selection for the hot loops.

The compiled extension is used when it imports; set
``FRACSPARSE_BACKEND=python`` to force the numpy fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("FRACSPARSE_BACKEND", "").lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()

toeplitz_apply = _impl.toeplitz_apply
commutator_apply = _impl.commutator_apply
window_apply = _impl.window_apply
truncated_max = _impl.truncated_max


def backends() -> dict[str, ModuleType]:
    """All importable backends, keyed by name."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
