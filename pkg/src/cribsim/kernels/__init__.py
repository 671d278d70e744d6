"""Kernel backend selection.

The compiled extension (`_core_c`, Cython) is preferred; the numpy
fallback (`_core_py`) is used when the extension is missing or when
CRIBSIM_PURE_PYTHON=1 is set. Both expose the same functions; per-build
determinism holds within a backend (float op order differs between them).
"""

from __future__ import annotations

import os

if os.environ.get("CRIBSIM_PURE_PYTHON") == "1":
    from . import _core_py as _impl
else:
    try:
        from . import _core_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _core_py as _impl

BACKEND = _impl.BACKEND
raycast_batch = _impl.raycast_batch
integrate_joints = _impl.integrate_joints
fk_chain = _impl.fk_chain
touch_bits = _impl.touch_bits


def available_backends() -> list[str]:
    names = []
    try:
        from . import _core_c  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    names.append("python")
    return names
