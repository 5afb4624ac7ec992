"""Sv32 translation: three permission-split direct-mapped TLBs and the page walker."""

import enum
from dataclasses import dataclass
from typing import Callable

from .arch_state import MASK32, MXR, SUM, Cause, PrivMode, Trap

PTE_V, PTE_R, PTE_W, PTE_X, PTE_U, PTE_G, PTE_A, PTE_D = (1 << i for i in range(8))
PAGE_SHIFT = 12
TLB_ENTRIES = 32


class AccessKind(enum.IntEnum):
    EXECUTE = 0
    READ = 1
    WRITE = 2


PAGE_FAULT = {AccessKind.EXECUTE: Cause.INST_PAGE_FAULT, AccessKind.READ: Cause.LOAD_PAGE_FAULT,
              AccessKind.WRITE: Cause.STORE_PAGE_FAULT}
ACCESS_FAULT = {AccessKind.EXECUTE: Cause.INST_ACCESS, AccessKind.READ: Cause.LOAD_ACCESS,
                AccessKind.WRITE: Cause.STORE_ACCESS}


@dataclass(frozen=True)
class Satp:
    mode: bool
    ppn: int

    @classmethod
    def from_csr(cls, value: int) -> "Satp":
        return cls(bool(value >> 31), value & 0x3FFFFF)

    def to_csr(self) -> int:
        return (int(self.mode) << 31) | (self.ppn & 0x3FFFFF)


@dataclass(frozen=True)
class Pte:
    ppn: int
    flags: int

    @classmethod
    def from_word(cls, word: int) -> "Pte":
        return cls((word >> 10) & 0x3FFFFF, word & 0xFF)

    def to_word(self) -> int:
        return (self.ppn << 10) | self.flags

    @property
    def valid(self) -> bool:
        return bool(self.flags & PTE_V)

    @property
    def leaf(self) -> bool:
        return bool(self.flags & (PTE_R | PTE_X))


class AccessFault(Exception):
    """Physical address not backed by any region."""

    def __init__(self, pa: int):
        super().__init__(f"unmapped physical address {pa:#010x}")
        self.pa = pa


def permits(flags: int, kind: int, mode: int, mstatus: int) -> bool:
    """Leaf permission check for an access of ``kind`` from ``mode``."""
    if kind == 0:    # execute
        if not flags & PTE_X:
            return False
    elif kind == 1:  # read
        if not (flags & PTE_R or (mstatus & MXR and flags & PTE_X)):
            return False
    elif not flags & PTE_W:
        return False
    if flags & PTE_U:
        if mode == 1:  # supervisor
            return kind != 0 and bool(mstatus & SUM)
        return True
    return mode != 0


class WalkResult:
    __slots__ = ("pte", "level", "pte_addr", "reads")

    def __init__(self, pte, level, pte_addr, reads):
        self.pte = pte
        self.level = level
        self.pte_addr = pte_addr
        self.reads = reads


def page_walk(va: int, kind: int, satp: int, mode: int, mstatus: int,
              read_word: Callable[[int], int], write_word: Callable[[int, int], None],
              step_hook: Callable[[int], None] | None = None) -> WalkResult:
    """Six-state Sv32 walk.

    ``step_hook`` (if given) is called with the state number 1..6 as each
    state is entered; the timing core charges cycles through it.  Raises
    :class:`Trap` with the kind-matching page fault (or access fault when a
    PTE address is unmapped).
    """
    hook = step_hook
    # state 1: level-1 PTE address, read
    if hook is not None:
        hook(1)
    addr = (((satp & 0x3FFFFF) << PAGE_SHIFT) + ((va >> 22) << 2)) & MASK32
    try:
        word = read_word(addr)
    except AccessFault:
        raise Trap(ACCESS_FAULT[kind], va) from None
    reads = 1
    # state 2: latch
    if hook is not None:
        hook(2)
    level = 1
    if word & PTE_V and not word & (PTE_R | PTE_X | PTE_W):
        # state 3: level-0 PTE address, read
        if hook is not None:
            hook(3)
        addr = ((((word >> 10) & 0x3FFFFF) << PAGE_SHIFT) + (((va >> 12) & 0x3FF) << 2)) & MASK32
        try:
            word = read_word(addr)
        except AccessFault:
            raise Trap(ACCESS_FAULT[kind], va) from None
        reads = 2
        # state 4: latch
        if hook is not None:
            hook(4)
        level = 0
    # state 5: judge
    if hook is not None:
        hook(5)
    if (not word & PTE_V or (word & PTE_W and not word & PTE_R)  # invalid or reserved
            or not word & (PTE_R | PTE_X)                        # non-leaf at level 0
            or (level == 1 and (word >> 10) & 0x3FF)             # misaligned megapage
            or not permits(word, kind, mode, mstatus)):
        raise Trap(PAGE_FAULT[kind], va)
    # state 6: A/D write-back
    if hook is not None:
        hook(6)
    new = word | PTE_A | (PTE_D if kind == 2 else 0)
    if new != word:
        try:
            write_word(addr, new)
        except AccessFault:
            raise Trap(ACCESS_FAULT[kind], va) from None
    return WalkResult(new, level, addr, reads)


def leaf_pa(va: int, pte_word: int, level: int) -> int:
    ppn = (pte_word >> 10) & 0x3FFFFF
    if level == 1:
        return ((ppn >> 10) << 22 | (va & 0x3FFFFF)) & MASK32
    return (ppn << PAGE_SHIFT | (va & 0xFFF)) & MASK32


def translation_active(satp: int, mode: int) -> bool:
    return bool(satp >> 31) and mode != PrivMode.MACHINE


def walk_translate(va, kind, mode, satp, mstatus, read_word, write_word) -> int:
    """TLB-less translation (used by the reference interpreter)."""
    if not (satp >> 31) or mode == 3:
        return va
    r = page_walk(va, kind, satp, mode, mstatus, read_word, write_word)
    return leaf_pa(va, r.pte, r.level)


class TlbArray:
    """32-entry direct-mapped TLB for one access kind."""

    __slots__ = ("tag", "ppn", "flags", "mega")

    def __init__(self):
        self.tag = [-1] * TLB_ENTRIES
        self.ppn = [0] * TLB_ENTRIES
        self.flags = [0] * TLB_ENTRIES
        self.mega = [False] * TLB_ENTRIES

    def flush(self):
        self.tag = [-1] * TLB_ENTRIES

    def valid_count(self) -> int:
        return sum(t >= 0 for t in self.tag)

    def lookup(self, vpn: int) -> int:
        """Index of the entry matching ``vpn`` or -1."""
        i = vpn & (TLB_ENTRIES - 1)
        tag = self.tag[i]
        if tag < 0:
            return -1
        if self.mega[i]:
            return i if (tag >> 10) == (vpn >> 10) else -1
        return i if tag == vpn else -1

    def fill(self, vpn: int, pte_word: int, level: int) -> None:
        i = vpn & (TLB_ENTRIES - 1)
        self.tag[i] = vpn
        self.ppn[i] = (pte_word >> 10) & 0x3FFFFF
        self.flags[i] = pte_word & 0xFF
        self.mega[i] = level == 1


class Mmu:
    """Translation unit owned by the timing core."""

    def __init__(self, tlb_enabled: bool = True):
        self.tlbs = (TlbArray(), TlbArray(), TlbArray())
        self.tlb_enabled = tlb_enabled
        self.walks = [0, 0, 0]
        self.walk_reads = 0
        self.max_walk_reads = 0
        self.tlb_hits = [0, 0, 0]

    def tlb_flush(self) -> None:
        for t in self.tlbs:
            t.flush()

    def translate(self, va: int, kind: int, mode: int, satp: int, mstatus: int,
                  read_word, write_word, step_hook=None) -> int:
        if not (satp >> 31) or mode == 3:
            return va
        vpn = va >> PAGE_SHIFT
        tlb = self.tlbs[kind]
        if self.tlb_enabled:
            i = tlb.lookup(vpn)
            # an entry without the needed permission is treated as a miss
            if i >= 0 and permits(tlb.flags[i], kind, mode, mstatus):
                self.tlb_hits[kind] += 1
                ppn = tlb.ppn[i]
                if tlb.mega[i]:
                    return ((ppn >> 10) << 22 | (va & 0x3FFFFF)) & MASK32
                return (ppn << PAGE_SHIFT | (va & 0xFFF)) & MASK32
        self.walks[kind] += 1
        r = page_walk(va, kind, satp, mode, mstatus, read_word, write_word, step_hook)
        self.walk_reads += r.reads
        if r.reads > self.max_walk_reads:
            self.max_walk_reads = r.reads
        if self.tlb_enabled:
            tlb.fill(vpn, r.pte, r.level)
        return leaf_pa(va, r.pte, r.level)
