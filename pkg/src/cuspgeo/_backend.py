"""Selects the integrator core: compiled extension if built, else pure Python.

Override with ``CUSPGEO_BACKEND=python`` or ``CUSPGEO_BACKEND=compiled``.
"""

from __future__ import annotations

import os

_requested = os.environ.get("CUSPGEO_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _rk45_py as core

    BACKEND = "python"
elif _requested == "compiled":
    from . import _rk45 as core  # type: ignore[no-redef]

    BACKEND = "compiled"
elif _requested == "":
    try:
        from . import _rk45 as core  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _rk45_py as core

        BACKEND = "python"
else:
    raise RuntimeError(
        f"CUSPGEO_BACKEND={_requested!r} not understood; use 'python' or 'compiled'"
    )


def backend_name() -> str:
    """Name of the stepper core in use ('compiled' or 'python')."""
    return BACKEND
