"""Bundled assembly sources: RVuc service firmware and the supervisor demo."""
from functools import lru_cache
from importlib import resources

from ..asm import assemble


def source(name: str) -> str:
    return resources.files(__name__).joinpath(name).read_text()


@lru_cache(maxsize=None)
def echo_firmware() -> bytes:
    """Default RVuc firmware image (console and disk services), loaded at address 0."""
    return assemble(source("echo.S"), 0)[0]


@lru_cache(maxsize=None)
def supervisor_demo(base: int = 0x80000000) -> bytes:
    """Supervisor demo program image, linked to run from the start of RAM."""
    return assemble(source("supervisor_demo.S"), base)[0]
