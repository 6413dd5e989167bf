"""Acceleration toggle for the hot kernels.

The coverage-count and sweep kernels in :mod:`grainconc._cover` compile with
numba unless the environment variable ``GRAINCONC_NO_NUMBA`` is set to a
truthy value ("1", "true", "yes", "on") or numba is not importable, in which
case a pure-numpy implementation is used.  Both paths are always importable
by name so that ``benchmarks/bench_kernels.py`` can time them side by side.
"""

import os

ENV_FLAG = "GRAINCONC_NO_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

NUMBA_ACTIVE = HAVE_NUMBA and numba_requested()
