"""Shared test configuration.

BLAS threading is pinned before numpy loads: the suite parallelizes over
sweep points with process workers, and single-threaded BLAS keeps results
reproducible and avoids oversubscription.
"""

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
