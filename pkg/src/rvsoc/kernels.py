"""Execution-kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; setting
``RVSOC_PURE_PYTHON=1`` forces the pure-Python twin.
"""
import os

if os.environ.get("RVSOC_PURE_PYTHON"):
    from ._kernels_py import BACKEND, OP, OPS, alu, branch, load_extend
else:
    try:
        from ._kernels import BACKEND, OP, OPS, alu, branch, load_extend
    except ImportError:
        from ._kernels_py import BACKEND, OP, OPS, alu, branch, load_extend

__all__ = ["BACKEND", "OP", "OPS", "alu", "branch", "load_extend"]
