"""Backend dispatch for the numeric hot loops.

Two interchangeable implementations exist:

* kernels_numba: @njit-compiled loops, the default.
* kernels_numpy: pure-numpy reference, selected with SOSPDIFF_BACKEND=numpy
  or used automatically when numba is not importable.

Both expose the same functions; benchmarks/bench_kernels.py compares them.
"""

from __future__ import annotations

import os

_requested = os.environ.get("SOSPDIFF_BACKEND", "").strip().lower()

if _requested == "numpy":
    from . import kernels_numpy as _impl

    BACKEND = "numpy"
elif _requested in ("", "numba"):
    try:
        from . import kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import kernels_numpy as _impl

        BACKEND = "numpy"
else:
    raise ValueError(
        f"SOSPDIFF_BACKEND={_requested!r} not recognized (use 'numba' or 'numpy')"
    )

eval_poly = _impl.eval_poly
eval_poly_min = _impl.eval_poly_min
soundness_scan = _impl.soundness_scan
schur_block = _impl.schur_block
apply_constraints = _impl.apply_constraints
adjoint_constraints = _impl.adjoint_constraints
