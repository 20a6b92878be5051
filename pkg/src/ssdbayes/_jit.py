"""JIT dispatch for the hot numerical kernels.

Kernels in :mod:`ssdbayes._kernels` are written against plain ndarrays,
scalar math and an explicit ``np.random.Generator``, so the same source runs
either compiled by numba or as ordinary Python.  Set the environment variable
``SSDBAYES_DISABLE_JIT=1`` before import to force the pure-Python fallback
(useful for debugging, coverage, or machines without a working numba).  Both
paths consume identical random streams and agree numerically.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}


def _jit_disabled() -> bool:
    return os.environ.get("SSDBAYES_DISABLE_JIT", "").strip().lower() in _TRUTHY


if _jit_disabled():
    JIT_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        JIT_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dep, belt and braces
        JIT_ENABLED = False

if JIT_ENABLED:
    from numba import njit as _njit

    def jit(fn):
        return _njit(cache=True)(fn)

else:

    def jit(fn):
        return fn
