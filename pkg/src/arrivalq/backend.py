"""Kernel selection: compiled extension when available, numpy fallback
otherwise.  Set ARRIVALQ_BACKEND=pure or =compiled to force a choice."""

import os

from . import _march_py

_requested = os.environ.get("ARRIVALQ_BACKEND", "").strip().lower()

if _requested == "pure":
    _impl = _march_py
elif _requested == "compiled":
    from . import _march as _impl  # raises if the extension was not built
else:
    try:
        from . import _march as _impl
    except ImportError:
        _impl = _march_py

BACKEND = _impl.BACKEND_NAME
STATUS_THARD = _impl.STATUS_THARD
STATUS_MASS = _impl.STATUS_MASS
STATUS_FZERO = _impl.STATUS_FZERO

march = _impl.march
march_pure = _march_py.march


def backends():
    """Names of the importable kernel implementations."""
    names = ["pure"]
    try:
        from . import _march  # noqa: F401

        names.insert(0, "compiled")
    except ImportError:
        pass
    return names
