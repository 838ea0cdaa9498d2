"""BLAS thread pinning.

The dense solves are many small factorizations; multi-threaded BLAS pools
thrash badly on few-core machines (observed 30x slowdowns), and parallelism
in this package comes from worker processes instead.  Imported before any
heavy numerics to force single-threaded kernels.
"""

import os

for _var in (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
):
    os.environ.setdefault(_var, "1")

_limiter = None
try:  # also covers the case where numpy was imported before this package
    from threadpoolctl import threadpool_limits

    _limiter = threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is optional
    pass
