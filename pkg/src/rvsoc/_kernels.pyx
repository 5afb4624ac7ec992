# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution kernels; op codes and semantics match ``_kernels_py``."""

from ._kernels_py import OP, OPS

BACKEND = "cython"

ctypedef unsigned int u32
ctypedef int s32
ctypedef unsigned long long u64
ctypedef long long s64


cpdef u32 alu(int op, u32 a, u32 b):
    """Integer ALU, M-extension and AMO arithmetic on unsigned 32-bit operands."""
    cdef s32 sa = <s32>a
    cdef s32 sb = <s32>b
    if op == 0:
        return a + b
    if op == 1:
        return a - b
    if op == 2:
        return a << (b & 31)
    if op == 3:
        return sa < sb
    if op == 4:
        return a < b
    if op == 5:
        return a ^ b
    if op == 6:
        return a >> (b & 31)
    if op == 7:
        return <u32>(sa >> (b & 31))
    if op == 8:
        return a | b
    if op == 9:
        return a & b
    if op == 10:
        return a * b
    if op == 11:
        return <u32>((<s64>sa * <s64>sb) >> 32)
    if op == 12:
        return <u32>((<s64>sa * <s64>b) >> 32)
    if op == 13:
        return <u32>((<u64>a * <u64>b) >> 32)
    if op == 14:
        if b == 0:
            return 0xFFFFFFFF
        if a == 0x80000000 and b == 0xFFFFFFFF:
            return a
        return <u32>(sa / sb)
    if op == 15:
        return 0xFFFFFFFF if b == 0 else a / b
    if op == 16:
        if b == 0:
            return a
        if a == 0x80000000 and b == 0xFFFFFFFF:
            return 0
        return <u32>(sa % sb)
    if op == 17:
        return a if b == 0 else a % b
    if op == 24:
        return b
    if op == 25:
        return a + b
    if op == 26:
        return a ^ b
    if op == 27:
        return a & b
    if op == 28:
        return a | b
    if op == 29:
        return a if sa <= sb else b
    if op == 30:
        return a if sa >= sb else b
    if op == 31:
        return a if a <= b else b
    if op == 32:
        return a if a >= b else b
    raise ValueError(op)


cpdef bint branch(int op, u32 a, u32 b):
    if op == 18:
        return a == b
    if op == 19:
        return a != b
    if op == 20:
        return <s32>a < <s32>b
    if op == 21:
        return <s32>a >= <s32>b
    if op == 22:
        return a < b
    if op == 23:
        return a >= b
    raise ValueError(op)


cpdef u32 load_extend(int funct3, u32 value):
    """Sign/zero extension of a loaded value by load funct3."""
    if funct3 == 0:
        return <u32><s32><signed char>(value & 0xFF)
    if funct3 == 1:
        return <u32><s32><short>(value & 0xFFFF)
    return value
