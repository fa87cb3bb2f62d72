"""Backend switch for the hot loops.

Kernels are compiled with numba unless ``PREAVG_DISABLE_NUMBA=1`` is set in the
environment (read once at import) or numba is not importable.  Every kernel has
a pure-numpy twin so the two paths can be compared in tests and benchmarks.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("PREAVG_DISABLE_NUMBA", "0").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError("disabled by PREAVG_DISABLE_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError as exc:  # pragma: no cover - exercised only without numba
    logger.info("numba unavailable (%s); using numpy kernels", exc)
    _njit = None
    HAS_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True, nogil=True`` defaults, or a no-op."""
    if _njit is None:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    return _njit(*args, **kwargs)


def backend() -> str:
    return "numba" if HAS_NUMBA else "numpy"


def thread_cap() -> int:
    """Worker cap from ``PREAVG_THREADS`` (defaults to the CPU count)."""
    raw = os.environ.get("PREAVG_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning("ignoring malformed PREAVG_THREADS=%r", raw)
    return max(1, os.cpu_count() or 1)
