"""Selects the simulator implementation at import time.

The compiled modules in ``rvsoc._fast`` are built by Cython from the very
same ``.py`` sources as the pure-Python package.  They are used unless
``RVSOC_PURE_PYTHON`` is set, they failed to build, or a source file is
newer than its compiled module (a stale build falls back rather than
silently running old code).
"""
import importlib
import os
from pathlib import Path

_COMPILED = ("arch_state", "isa_decode", "mmu_sv32", "mem_hier", "oracle_iss",
             "timing_core", "io_devices", "harness")
_HERE = Path(__file__).parent


def _fresh() -> bool:
    for name in _COMPILED:
        built = list((_HERE / "_fast").glob(f"{name}.*.so")) + list((_HERE / "_fast").glob(f"{name}.*.pyd"))
        if not built:
            return False
        if (_HERE / f"{name}.py").stat().st_mtime > built[0].stat().st_mtime:
            return False
    return True


def _load():
    if not os.environ.get("RVSOC_PURE_PYTHON") and _fresh():
        try:
            return importlib.import_module("rvsoc._fast.harness"), "cython"
        except ImportError:
            pass
    return importlib.import_module("rvsoc.harness"), "python"


harness, NAME = _load()
Machine = harness.Machine
Config = harness.Config
