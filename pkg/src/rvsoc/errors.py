"""Host-facing exceptions, shared by the compiled and pure-Python modules."""


class SimulationFault(Exception):
    """Host-level error: the simulated machine cannot continue."""


class FirmwareFault(SimulationFault):
    """The RVuc firmware did something the microcontroller cannot do."""


class ImageError(Exception):
    """An image or firmware file cannot be loaded."""


class CheckpointError(Exception):
    """A checkpoint is corrupt, truncated or from a different timing configuration."""


class Divergence(Exception):
    """The timing core and the reference interpreter disagree."""

    def __init__(self, message, index=None, core_rec=None, oracle_rec=None):
        super().__init__(message)
        self.index = index
        self.core_rec = core_rec
        self.oracle_rec = oracle_rec
