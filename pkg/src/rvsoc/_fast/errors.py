from ..errors import CheckpointError, Divergence, FirmwareFault, ImageError, SimulationFault  # noqa: F401
