"""Pick the compiled flow kernels when available, else the Python ones.

Set ``RKHSROBUST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _flowpy

if os.environ.get("RKHSROBUST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _flowpy
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _flowpy

BACKEND = "python" if _impl is _flowpy else "cython"
FLOW_TOL = _flowpy.FLOW_TOL
bipartite_max_flow = _impl.bipartite_max_flow
interval_flow_1d = _impl.interval_flow_1d
