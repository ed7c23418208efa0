"""Hot-loop kernels, compiled when possible.

The Cython extension ``_ckernels`` is preferred; the numpy module
``_pykernels`` is the fallback.  Set ``DATAMARKET_PURE_PYTHON=1`` to force
the fallback.  ``BACKEND`` names the module in use.
"""

import os

from . import _pykernels

if os.environ.get("DATAMARKET_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

cosine_topk = _impl.cosine_topk
approx_xmin_scan = _impl.approx_xmin_scan
acf_lag1 = _impl.acf_lag1

__all__ = ["BACKEND", "cosine_topk", "approx_xmin_scan", "acf_lag1"]
