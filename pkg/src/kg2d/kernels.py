"""Backend selection for the hot inner loops.

The compiled extension is used when it imports; otherwise the numpy fallback
is used. Setting ``KG2D_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("KG2D_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # extension was not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "compiled"

cubic_kick = _impl.cubic_kick
cubic_power = _impl.cubic_power


def nonuniform_eval(f, x, y, p1, p2, sign, compiled: bool = False):
    """Evaluate ``sum_jk f[j,k] exp(sign*i*(p1*x[j] + p2*y[k]))`` at each point.

    ``y`` must be evenly spaced and ascending when ``compiled=True``: the
    compiled loop builds the exponentials along that axis by recurrence. The
    numpy path is the default because its BLAS matrix products outrun the
    compiled loop (see ``benchmarks/bench_kernels.py``).
    """
    import numpy as np

    p1 = np.ascontiguousarray(p1, dtype=np.float64)
    p2 = np.ascontiguousarray(p2, dtype=np.float64)
    f = np.ascontiguousarray(f, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    impl = _impl if compiled else _kernels_py
    return impl.nonuniform_eval(f, x, y, p1, p2, float(sign))
