"""Kernel backend selection.

The numerical hot loops exist twice: compiled in the _core extension and in
pure Python in _purepy. The compiled set is used when the extension imports
and exports every required symbol; otherwise the pure set is used. Setting
the environment variable PORESTREAM_PURE to a non-empty value forces the
pure backend regardless of the extension's availability.
"""

from __future__ import annotations

import os

from . import _purepy

_REQUIRED = (
    "riemann_fan",
    "ft_evolve",
    "trace_cells",
)


def _select():
    if os.environ.get("PORESTREAM_PURE"):
        return _purepy
    try:
        from . import _core
    except ImportError:
        return _purepy
    if all(hasattr(_core, name) for name in _REQUIRED):
        return _core
    return _purepy


impl = _select()
BACKEND = impl.BACKEND
