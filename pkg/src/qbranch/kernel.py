"""Backend selection for the CDCL kernel.

The compiled extension is used when it imports; set ``QBRANCH_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _kernel_py

PythonKernel = _kernel_py.Kernel

try:
    if os.environ.get("QBRANCH_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend requested")
    from ._kernel_ext import Kernel as CompiledKernel
except ImportError:
    CompiledKernel = None

Kernel = CompiledKernel if CompiledKernel is not None else PythonKernel
BACKEND = Kernel.backend


def get_kernel_class(backend: str | None = None):
    """Kernel class for ``"python"``, ``"cython"`` or ``None`` (the default)."""
    if backend is None:
        return Kernel
    if backend == "python":
        return PythonKernel
    if backend == "cython":
        if CompiledKernel is None:
            raise ImportError("compiled kernel is not built")
        return CompiledKernel
    raise ValueError(f"unknown kernel backend {backend!r}")
