"""Backend selection for the sequential inner loops.

The compiled extension is used when it imports; setting ``SEQMON_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

if os.environ.get("SEQMON_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import bspline_basis, greedy_run, reservoir_offer, stream_update

    BACKEND = "python"
else:
    try:
        from ._kernels import bspline_basis, greedy_run, reservoir_offer, stream_update

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._kernels_py import bspline_basis, greedy_run, reservoir_offer, stream_update

        BACKEND = "python"

__all__ = ["BACKEND", "bspline_basis", "greedy_run", "reservoir_offer", "stream_update"]
