"""Switch between numba-compiled kernels and pure-numpy fallbacks.

Numba is optional. The compiled path is used when numba imports cleanly and
neither ``D3OFDM_DISABLE_NUMBA`` nor ``NUMBA_DISABLE_JIT`` is set to a truthy
value. Kernels are written twice: an explicit-loop version decorated with
:func:`njit` and a vectorised numpy version. :func:`pick` returns whichever
one the current process should use.
"""

from __future__ import annotations

import os


def _flag(name: str) -> bool:
    return os.environ.get(name, "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _flag("D3OFDM_DISABLE_NUMBA") or _flag("NUMBA_DISABLE_JIT"):
        raise ImportError("numba disabled by environment")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(func):
    """Compile ``func`` with numba when available, otherwise return it unchanged."""
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func


def pick(compiled, fallback):
    """Return the kernel this process should run."""
    return compiled if HAVE_NUMBA else fallback


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
