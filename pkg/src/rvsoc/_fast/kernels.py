from ..kernels import BACKEND, OP, OPS, alu, branch, load_extend  # noqa: F401
