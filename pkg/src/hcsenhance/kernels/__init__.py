"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen once at import time. Set ``HCSENHANCE_NO_NUMBA=1``
(or any of ``true``/``yes``) to force the numpy path, e.g. on machines
where numba is unavailable or while debugging. ``benchmarks/bench_kernels.py``
times the two backends against each other.
"""

import os

from . import _numpy_impl

_FLAG = os.environ.get("HCSENHANCE_NO_NUMBA", "").strip().lower()
_numba_disabled = _FLAG in ("1", "true", "yes")

if _numba_disabled:
    _impl = _numpy_impl
else:
    try:
        from . import _numba_impl as _impl
    except ImportError:  # numba missing from the environment
        _impl = _numpy_impl

USING_NUMBA = _impl is not _numpy_impl

separable_convolve = _impl.separable_convolve
sobel_magnitude = _impl.sobel_magnitude
bilinear_resize = _impl.bilinear_resize
within_distance = _impl.within_distance


def backend() -> str:
    """Name of the active kernel backend, ``numba`` or ``numpy``."""
    return "numba" if USING_NUMBA else "numpy"
