"""Cython-compiled builds of the simulator modules (same source as the parent package)."""
