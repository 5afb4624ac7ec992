"""Brute-force Sv32 translation used as an oracle for the MMU.

Written straight from the translation algorithm (loop over levels, leaf
checks, superpage alignment, permission rules, hardware A/D update) and
sharing no code with ``rvsoc.mmu_sv32``.
"""
import random
from dataclasses import dataclass, field

V, R, W, X, U, G, A, D = (1 << i for i in range(8))
SUM, MXR = 1 << 18, 1 << 19
PAGE_FAULT = {"x": 12, "r": 13, "w": 15}
ACCESS_FAULT = {"x": 1, "r": 5, "w": 7}
KINDS = ("x", "r", "w")
MODES = {3: "M", 1: "S", 0: "U"}


class Fault(Exception):
    def __init__(self, cause):
        super().__init__(cause)
        self.cause = cause


@dataclass
class Memory:
    words: dict = field(default_factory=dict)
    lo: int = 0x80000000
    hi: int = 0x80100000
    reads: int = 0
    writes: list = field(default_factory=list)

    def read_word(self, pa):
        if not self.lo <= pa < self.hi:
            raise LookupError(pa)
        self.reads += 1
        return self.words.get(pa, 0)

    def write_word(self, pa, value):
        if not self.lo <= pa < self.hi:
            raise LookupError(pa)
        self.writes.append((pa, value))
        self.words[pa] = value


def translate(mem: Memory, va: int, kind: str, mode: int, satp: int, mstatus: int) -> int:
    """Physical address for ``va`` or raises Fault(mcause)."""
    if mode == 3 or not satp >> 31:
        return va
    vpn = ((va >> 12) & 0x3FF, (va >> 22) & 0x3FF)
    table = (satp & 0x3FFFFF) * 4096
    level = 1
    while True:
        addr = table + vpn[level] * 4
        try:
            pte = mem.read_word(addr)
        except LookupError:
            raise Fault(ACCESS_FAULT[kind]) from None
        if not pte & V or (pte & W and not pte & R):
            raise Fault(PAGE_FAULT[kind])
        if pte & (R | X):
            break
        level -= 1
        if level < 0:
            raise Fault(PAGE_FAULT[kind])
        table = (pte >> 10) * 4096
    allowed = {"x": pte & X, "r": pte & R or (mstatus & MXR and pte & X), "w": pte & W}[kind]
    if not allowed:
        raise Fault(PAGE_FAULT[kind])
    if MODES[mode] == "U" and not pte & U:
        raise Fault(PAGE_FAULT[kind])
    if MODES[mode] == "S" and pte & U and (kind == "x" or not mstatus & SUM):
        raise Fault(PAGE_FAULT[kind])
    ppn = pte >> 10
    if level == 1 and ppn & 0x3FF:
        raise Fault(PAGE_FAULT[kind])
    want = pte | A | (D if kind == "w" else 0)
    if want != pte:
        try:
            mem.write_word(addr, want)
        except LookupError:
            raise Fault(ACCESS_FAULT[kind]) from None
    # the system map is below 4GB: Sv32's 34-bit physical address is truncated
    if level == 1:
        return (((ppn >> 10) << 22) | (va & 0x3FFFFF)) & 0xFFFFFFFF
    return ((ppn << 12) | (va & 0xFFF)) & 0xFFFFFFFF


def random_config(rng: random.Random):
    """A random two-level table, one probe address and access context.

    Returns (memory, va, kind, mode, satp, mstatus).
    """
    mem = Memory()
    root = 0x80000000 + rng.randrange(16) * 4096
    va = rng.getrandbits(32)
    vpn1, vpn0 = va >> 22, (va >> 12) & 0x3FF
    flags = lambda: rng.getrandbits(8) | (V if rng.random() < 0.85 else 0)  # noqa: E731
    shape = rng.choice(("pointer", "pointer", "mega", "mega_misaligned", "junk"))
    if shape == "pointer":
        l0 = (0x80020000 + rng.randrange(32) * 4096) if rng.random() < 0.95 else rng.getrandbits(20) << 12
        mem.words[root + vpn1 * 4] = ((l0 >> 12) << 10) | V | (rng.choice((0, G, A, D, U)))
        if 0x80000000 <= l0 < 0x80100000:
            leaf = flags()
            if rng.random() < 0.1:
                leaf &= ~(R | W | X)  # pointer at level 0
            mem.words[l0 + vpn0 * 4] = (rng.getrandbits(22) << 10) | leaf
    elif shape == "mega":
        mem.words[root + vpn1 * 4] = (rng.getrandbits(12) << 20) | flags()
    elif shape == "mega_misaligned":
        mem.words[root + vpn1 * 4] = (rng.getrandbits(22) << 10) | (rng.randrange(1, 1024) << 10) & 0xFFC00 | flags()
    else:
        mem.words[root + vpn1 * 4] = rng.getrandbits(32)
    # a few neighbours so lookups are not trivially alone in the table
    for _ in range(rng.randrange(4)):
        mem.words.setdefault(root + rng.randrange(1024) * 4, rng.getrandbits(32))
    kind = rng.choice(KINDS)
    mode = rng.choice((0, 1, 1, 3))
    satp = (rng.random() < 0.95) << 31 | (root >> 12) | (rng.getrandbits(9) << 22 if rng.random() < 0.1 else 0)
    mstatus = (SUM if rng.random() < 0.5 else 0) | (MXR if rng.random() < 0.5 else 0)
    return mem, va, kind, mode, satp & 0xFFFFFFFF, mstatus
