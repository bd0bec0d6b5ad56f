"""Hot numeric kernels with two interchangeable backends.

The numba backend is used when importable; set ``BVQ_KERNELS=numpy`` to force
the pure-numpy fallback (or ``BVQ_KERNELS=numba`` to fail loudly if numba is
missing). ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

_requested = os.environ.get("BVQ_KERNELS", "").strip().lower()

if _requested not in ("", "numpy", "numba"):
    raise RuntimeError(f"BVQ_KERNELS must be 'numpy' or 'numba', got {_requested!r}")

if _requested == "numpy":
    from . import _numpy as _impl
else:
    try:
        from . import _numba as _impl
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl

BACKEND = _impl.BACKEND
conv2d_fwd = _impl.conv2d_fwd
conv2d_bwd_x = _impl.conv2d_bwd_x
conv2d_bwd_w = _impl.conv2d_bwd_w
swe_lxf_step = _impl.swe_lxf_step
advdiff_step = _impl.advdiff_step
