"""Pure-Python execution kernels (fallback for the compiled ``_kernels`` module).

Operation codes are small integers shared with the compiled implementation;
see ``OPS`` for the mnemonic mapping.
"""

MASK32 = 0xFFFFFFFF

OPS = (
    "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
    "mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu",
    "beq", "bne", "blt", "bge", "bltu", "bgeu",
    "swap", "amoadd", "amoxor", "amoand", "amoor", "min", "max", "minu", "maxu",
)
OP = {name: i for i, name in enumerate(OPS)}
BACKEND = "python"


def _s(v):
    return v - 0x100000000 if v & 0x80000000 else v


def alu(op, a, b):
    """Integer ALU, M-extension and AMO arithmetic on unsigned 32-bit operands."""
    if op == 0:
        return (a + b) & MASK32
    if op == 1:
        return (a - b) & MASK32
    if op == 2:
        return (a << (b & 31)) & MASK32
    if op == 3:
        return int(_s(a) < _s(b))
    if op == 4:
        return int(a < b)
    if op == 5:
        return a ^ b
    if op == 6:
        return a >> (b & 31)
    if op == 7:
        return (_s(a) >> (b & 31)) & MASK32
    if op == 8:
        return a | b
    if op == 9:
        return a & b
    if op == 10:
        return (a * b) & MASK32
    if op == 11:
        return ((_s(a) * _s(b)) >> 32) & MASK32
    if op == 12:
        return ((_s(a) * b) >> 32) & MASK32
    if op == 13:
        return (a * b) >> 32
    if op == 14:
        if b == 0:
            return MASK32
        sa, sb = _s(a), _s(b)
        if sa == -0x80000000 and sb == -1:
            return a
        q = abs(sa) // abs(sb)
        return (-q if (sa < 0) != (sb < 0) else q) & MASK32
    if op == 15:
        return MASK32 if b == 0 else a // b
    if op == 16:
        if b == 0:
            return a
        sa, sb = _s(a), _s(b)
        if sa == -0x80000000 and sb == -1:
            return 0
        r = abs(sa) % abs(sb)
        return (-r if sa < 0 else r) & MASK32
    if op == 17:
        return a if b == 0 else a % b
    if op == 24:
        return b
    if op == 25:
        return (a + b) & MASK32
    if op == 26:
        return a ^ b
    if op == 27:
        return a & b
    if op == 28:
        return a | b
    if op == 29:
        return a if _s(a) <= _s(b) else b
    if op == 30:
        return a if _s(a) >= _s(b) else b
    if op == 31:
        return a if a <= b else b
    if op == 32:
        return a if a >= b else b
    raise ValueError(op)


def branch(op, a, b):
    if op == 18:
        return a == b
    if op == 19:
        return a != b
    if op == 20:
        return _s(a) < _s(b)
    if op == 21:
        return _s(a) >= _s(b)
    if op == 22:
        return a < b
    if op == 23:
        return a >= b
    raise ValueError(op)


def load_extend(funct3, value):
    """Sign/zero extension of a loaded value by load funct3."""
    if funct3 == 0:
        return (value - 0x100 if value & 0x80 else value) & MASK32
    if funct3 == 1:
        return (value - 0x10000 if value & 0x8000 else value) & MASK32
    return value
