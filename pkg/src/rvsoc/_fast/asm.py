from ..asm import *  # noqa: F401,F403
from ..asm import AsmError, assemble  # noqa: F401
