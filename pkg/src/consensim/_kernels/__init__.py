"""Kernel backend selection.

The compiled extension is preferred when importable; the pure numpy
kernel is the fallback.  Set ``CONSENSIM_BACKEND=python`` or ``=cython``
to force one explicitly (forcing the compiled backend raises if the
extension is missing).
"""

from __future__ import annotations

import os

from . import em_py

_forced = os.environ.get("CONSENSIM_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = em_py
    BACKEND = "python"
elif _forced == "cython":
    from . import _em_cy as _impl  # noqa: F401

    BACKEND = "cython"
else:
    try:
        from . import _em_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = em_py
        BACKEND = "python"

integrate_path = _impl.integrate_path
STATUS_OK = em_py.STATUS_OK
STATUS_BLOWUP = em_py.STATUS_BLOWUP
