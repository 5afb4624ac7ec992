"""Cycle-level simulator of a small RV32IMAC system-on-chip.

The timing core runs a twelve-step multi-cycle state machine over an Sv32
MMU, a write-through cache, a fetch buffer, MMIO devices and an RV32I I/O
microcontroller, and is checked in lockstep against a reference interpreter.

``Machine`` and ``Config`` come from the compiled modules when they are
built and current, otherwise from the pure-Python sources; ``BACKEND`` says
which.
"""
from .backend import NAME as BACKEND
from .backend import Config, Machine
from .errors import CheckpointError, Divergence, FirmwareFault, ImageError, SimulationFault

__all__ = ["BACKEND", "CheckpointError", "Config", "Divergence", "FirmwareFault", "ImageError",
           "Machine", "SimulationFault"]
