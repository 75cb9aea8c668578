"""Backend selection for the fused graph-network kernels.

``QBRANCH_PURE_PYTHON=1`` forces the numpy fallback, as for the solver kernel.
"""
import os

from . import _gnn_ops_py

try:
    if os.environ.get("QBRANCH_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend requested")
    from . import _gnn_ext as _impl
except ImportError:
    _impl = _gnn_ops_py

BACKEND = _impl.backend
bias_relu = _impl.bias_relu
bias_relu_ln = _impl.bias_relu_ln
ln_relu_bwd = _impl.ln_relu_bwd
