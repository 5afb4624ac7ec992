from ..firmware import echo_firmware, source  # noqa: F401
