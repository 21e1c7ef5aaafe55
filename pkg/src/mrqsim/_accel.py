"""Backend selection for the numeric kernels.

Kernels are written once as plain Python loops and compiled with numba when
it is importable and ``MRQSIM_DISABLE_NUMBA`` is unset (or ``0``). Every
kernel also has a vectorised numpy twin; ``USE_NUMBA`` decides which one the
public functions dispatch to.

Usage::

    MRQSIM_DISABLE_NUMBA=1 pytest      # pure-numpy path
"""

import os

# the TBB layer is often missing; workqueue ships with numba and is enough here
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

_flag = os.environ.get("MRQSIM_DISABLE_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by MRQSIM_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:
    numba = None
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    def prange(*args):
        return range(*args)


USE_NUMBA = NUMBA_AVAILABLE


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_threads(n):
    """Limit numba's worker pool to ``n`` threads (no-op on the numpy path).

    numba caps the pool at ``NUMBA_NUM_THREADS`` fixed at import time, so the
    CLI exports that variable before anything imports numba.
    """
    if n is None or not USE_NUMBA:
        return
    n = int(n)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def get_threads():
    if not USE_NUMBA:
        return 1
    return numba.get_num_threads()
