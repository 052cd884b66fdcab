"""Honor REGIONFILL_THREADS before numpy binds its BLAS thread pool.

Imported first by the package __init__ so the setting takes effect for
every entry point. Explicitly-set BLAS variables win over ours.
"""

import os

_REQUESTED = os.environ.get("REGIONFILL_THREADS")
if _REQUESTED:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, _REQUESTED)
