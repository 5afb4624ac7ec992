"""Architectural state: GPRs, PC, CSR file, privilege mode, LR/SC reservation.

CSR access, trap entry and trap return live here so the timing core and the
reference interpreter share exactly one definition of the privileged
architecture.
"""

import enum
from typing import NamedTuple

MASK32 = 0xFFFFFFFF


class PrivMode(enum.IntEnum):
    USER = 0
    SUPERVISOR = 1
    MACHINE = 3

    @property
    def letter(self) -> str:
        return "USxM"[self]


U, S, M = PrivMode.USER, PrivMode.SUPERVISOR, PrivMode.MACHINE


class Cause(enum.IntEnum):
    INST_MISALIGNED = 0
    INST_ACCESS = 1
    ILLEGAL = 2
    BREAKPOINT = 3
    LOAD_MISALIGNED = 4
    LOAD_ACCESS = 5
    STORE_MISALIGNED = 6
    STORE_ACCESS = 7
    ECALL_U = 8
    ECALL_S = 9
    ECALL_M = 11
    INST_PAGE_FAULT = 12
    LOAD_PAGE_FAULT = 13
    STORE_PAGE_FAULT = 15


class Interrupt(enum.IntEnum):
    SSI = 1
    MSI = 3
    STI = 5
    MTI = 7
    SEI = 9
    MEI = 11


class TrapCause(NamedTuple):
    code: int
    is_interrupt: bool = False
    tval: int = 0

    @property
    def mcause(self) -> int:
        return (0x80000000 | self.code) if self.is_interrupt else self.code


class Trap(Exception):
    """A guest-visible exception raised while executing an instruction."""

    def __init__(self, code: int, tval: int = 0):
        super().__init__(code, tval)
        self.code = code
        self.tval = tval & MASK32

    @property
    def cause(self) -> TrapCause:
        return TrapCause(self.code, False, self.tval)


# CSR addresses
SSTATUS, SIE, STVEC, SCOUNTEREN = 0x100, 0x104, 0x105, 0x106
SSCRATCH, SEPC, SCAUSE, STVAL, SIP, SATP = 0x140, 0x141, 0x142, 0x143, 0x144, 0x180
MSTATUS, MISA, MEDELEG, MIDELEG, MIE, MTVEC, MCOUNTEREN = 0x300, 0x301, 0x302, 0x303, 0x304, 0x305, 0x306
MSCRATCH, MEPC, MCAUSE, MTVAL, MIP = 0x340, 0x341, 0x342, 0x343, 0x344
CYCLE, TIME, INSTRET, CYCLEH, TIMEH, INSTRETH = 0xC00, 0xC01, 0xC02, 0xC80, 0xC81, 0xC82
MHARTID = 0xF14

CSR_NAMES = {
    SSTATUS: "sstatus", SIE: "sie", STVEC: "stvec", SCOUNTEREN: "scounteren",
    SSCRATCH: "sscratch", SEPC: "sepc", SCAUSE: "scause", STVAL: "stval", SIP: "sip",
    SATP: "satp", MSTATUS: "mstatus", MISA: "misa", MEDELEG: "medeleg",
    MIDELEG: "mideleg", MIE: "mie", MTVEC: "mtvec", MCOUNTEREN: "mcounteren",
    MSCRATCH: "mscratch", MEPC: "mepc", MCAUSE: "mcause", MTVAL: "mtval", MIP: "mip",
    CYCLE: "cycle", TIME: "time", INSTRET: "instret", CYCLEH: "cycleh",
    TIMEH: "timeh", INSTRETH: "instreth", MHARTID: "mhartid",
}

# mstatus fields
SIE_BIT, MIE_BIT, SPIE_BIT, MPIE_BIT, SPP_BIT = 1 << 1, 1 << 3, 1 << 5, 1 << 7, 1 << 8
MPP_SHIFT, MPP_MASK = 11, 3 << 11
MPRV, SUM, MXR, TVM, TW, TSR = 1 << 17, 1 << 18, 1 << 19, 1 << 20, 1 << 21, 1 << 22
MSTATUS_WMASK = SIE_BIT | MIE_BIT | SPIE_BIT | MPIE_BIT | SPP_BIT | MPP_MASK | MPRV | SUM | MXR | TVM | TW | TSR
SSTATUS_MASK = SIE_BIT | SPIE_BIT | SPP_BIT | SUM | MXR

MISA_VALUE = (1 << 30) | sum(1 << (ord(c) - ord("A")) for c in "IMACSU")
MEDELEG_MASK = 0xB3FF  # causes 0-9, 12, 13, 15; ECALL from M is never delegated
MIDELEG_MASK = 0x222
MIE_MASK = 0xAAA
MIP_WMASK = 0x222      # MTIP is driven by the timer only
SIP_WMASK = 0x002
SATP_MASK = 0x803FFFFF  # ASID hardwired to zero

STORED_CSRS = (
    MSTATUS, MEDELEG, MIDELEG, MIE, MIP, MTVEC, MSCRATCH, MEPC, MCAUSE, MTVAL,
    STVEC, SSCRATCH, SEPC, SCAUSE, STVAL, SATP,
)

# interrupt priority order, highest first
_INT_PRIORITY = (Interrupt.MEI, Interrupt.MSI, Interrupt.MTI, Interrupt.SEI, Interrupt.SSI, Interrupt.STI)


class ArchState:
    """Complete architectural machine state for one hart."""

    __slots__ = ("pc", "x", "csr", "mode", "res_valid", "res_addr", "retired", "csr_log")

    def __init__(self, pc: int = 0x80000000):
        self.pc = pc
        self.x = [0] * 32
        self.csr = dict.fromkeys(STORED_CSRS, 0)
        self.mode = M
        self.res_valid = False
        self.res_addr = 0
        self.retired = 0
        self.csr_log: list[tuple[int, int]] = []

    def copy(self) -> "ArchState":
        other = ArchState(self.pc)
        other.x = list(self.x)
        other.csr = dict(self.csr)
        other.mode = self.mode
        other.res_valid = self.res_valid
        other.res_addr = self.res_addr
        other.retired = self.retired
        return other

    def same_as(self, other: "ArchState") -> bool:
        return (
            self.pc == other.pc and self.x == other.x and self.csr == other.csr
            and self.mode == other.mode and self.res_valid == other.res_valid
            and (not self.res_valid or self.res_addr == other.res_addr)
            and self.retired == other.retired
        )

    # register file
    def set_x(self, idx: int, value: int) -> None:
        if idx:
            self.x[idx] = value & MASK32

    @property
    def satp(self) -> int:
        return self.csr[SATP]

    @property
    def mstatus(self) -> int:
        return self.csr[MSTATUS]

    def _log(self, addr: int, value: int) -> None:
        self.csr_log.append((addr, value))

    def data_mode(self) -> PrivMode:
        """Effective privilege of loads and stores (honours mstatus.MPRV)."""
        ms = self.csr[MSTATUS]
        if self.mode == M and ms & MPRV:
            return PrivMode((ms >> MPP_SHIFT) & 3)
        return self.mode


def _check_access(state: ArchState, addr: int, write: bool) -> None:
    if addr not in CSR_NAMES:
        raise Trap(Cause.ILLEGAL)
    if ((addr >> 8) & 3) > state.mode:
        raise Trap(Cause.ILLEGAL)
    if write and (addr >> 10) == 3:
        raise Trap(Cause.ILLEGAL)
    if addr == SATP and state.mode == S and state.csr[MSTATUS] & TVM:
        raise Trap(Cause.ILLEGAL)


def csr_read(state: ArchState, addr: int) -> int:
    """Architecturally visible value of a CSR (raises ``Trap`` when illegal)."""
    _check_access(state, addr, False)
    return _read(state, addr)


def _read(state: ArchState, addr: int) -> int:
    csr = state.csr
    if addr == SSTATUS:
        return csr[MSTATUS] & SSTATUS_MASK
    if addr == SIE:
        return csr[MIE] & csr[MIDELEG]
    if addr == SIP:
        return csr[MIP] & csr[MIDELEG]
    if addr == MISA:
        return MISA_VALUE
    if addr == MHARTID:
        return 0
    if addr in (MCOUNTEREN, SCOUNTEREN):
        return 0x7
    # counters are retirement based so architecture never depends on timing configuration
    if addr in (CYCLE, TIME, INSTRET):
        return state.retired & MASK32
    if addr in (CYCLEH, TIMEH, INSTRETH):
        return (state.retired >> 32) & MASK32
    return csr[addr]


def csr_check_write(state: ArchState, addr: int) -> None:
    _check_access(state, addr, True)


def csr_write(state: ArchState, addr: int, value: int) -> None:
    """Store a WARL-legalised value (raises ``Trap`` when illegal)."""
    _check_access(state, addr, True)
    _write(state, addr, value & MASK32)


def legalize(addr: int, value: int, old: int = 0) -> int:
    """WARL projection of ``value`` for a stored CSR."""
    if addr == MSTATUS:
        v = (old & ~MSTATUS_WMASK) | (value & MSTATUS_WMASK)
        if ((v >> MPP_SHIFT) & 3) == 2:
            v &= ~MPP_MASK
        return v
    if addr in (MTVEC, STVEC):
        return value & ~3
    if addr in (MEPC, SEPC):
        return value & ~1
    if addr in (MCAUSE, SCAUSE):
        return value & 0x8000000F
    if addr == MEDELEG:
        return value & MEDELEG_MASK
    if addr == MIDELEG:
        return value & MIDELEG_MASK
    if addr == MIE:
        return value & MIE_MASK
    if addr == MIP:
        return (old & ~MIP_WMASK) | (value & MIP_WMASK)
    if addr == SATP:
        return value & SATP_MASK
    return value


def _write(state: ArchState, addr: int, value: int) -> None:
    csr = state.csr
    if addr == SSTATUS:
        ms = csr[MSTATUS]
        csr[MSTATUS] = (ms & ~SSTATUS_MASK) | (value & SSTATUS_MASK)
        state._log(SSTATUS, csr[MSTATUS] & SSTATUS_MASK)
        return
    if addr == SIE:
        deleg = csr[MIDELEG]
        csr[MIE] = (csr[MIE] & ~deleg) | (value & deleg & MIE_MASK)
        state._log(SIE, csr[MIE] & deleg)
        return
    if addr == SIP:
        wmask = csr[MIDELEG] & SIP_WMASK
        csr[MIP] = (csr[MIP] & ~wmask) | (value & wmask)
        state._log(SIP, csr[MIP] & csr[MIDELEG])
        return
    if addr in (MISA, MCOUNTEREN, SCOUNTEREN):
        return  # read-only in this implementation, writes ignored
    if addr in csr:
        csr[addr] = legalize(addr, value, csr[addr])
        state._log(addr, csr[addr])
        return
    raise Trap(Cause.ILLEGAL)


def take_trap(state: ArchState, cause: TrapCause) -> None:
    """Enter the trap handler selected by the delegation registers."""
    csr = state.csr
    code = cause.code
    deleg = csr[MIDELEG] if cause.is_interrupt else csr[MEDELEG]
    from_mode = state.mode
    ms = csr[MSTATUS]
    if from_mode <= S and (deleg >> code) & 1:
        csr[SCAUSE] = cause.mcause
        csr[SEPC] = state.pc & ~1
        csr[STVAL] = cause.tval & MASK32
        ms &= ~(SPIE_BIT | SIE_BIT | SPP_BIT)
        if csr[MSTATUS] & SIE_BIT:
            ms |= SPIE_BIT
        if from_mode == S:
            ms |= SPP_BIT
        csr[MSTATUS] = ms
        state.mode = S
        state.pc = csr[STVEC]
        state.csr_log.extend(((SEPC, csr[SEPC]), (SCAUSE, csr[SCAUSE]), (STVAL, csr[STVAL]),
                              (SSTATUS, ms & SSTATUS_MASK)))
    else:
        csr[MCAUSE] = cause.mcause
        csr[MEPC] = state.pc & ~1
        csr[MTVAL] = cause.tval & MASK32
        ms &= ~(MPIE_BIT | MIE_BIT | MPP_MASK)
        if csr[MSTATUS] & MIE_BIT:
            ms |= MPIE_BIT
        ms |= int(from_mode) << MPP_SHIFT
        csr[MSTATUS] = ms
        state.mode = M
        state.pc = csr[MTVEC]
        state.csr_log.extend(((MEPC, csr[MEPC]), (MCAUSE, csr[MCAUSE]), (MTVAL, csr[MTVAL]),
                              (MSTATUS, ms)))


def check_trap_return(state: ArchState, kind: str) -> None:
    if kind == "mret":
        if state.mode != M:
            raise Trap(Cause.ILLEGAL)
    elif state.mode < S or (state.mode == S and state.csr[MSTATUS] & TSR):
        raise Trap(Cause.ILLEGAL)


def trap_return(state: ArchState, kind: str) -> None:
    """Execute MRET (``kind="mret"``) or SRET (``kind="sret"``)."""
    check_trap_return(state, kind)
    csr = state.csr
    ms = csr[MSTATUS]
    if kind == "mret":
        new_mode = PrivMode((ms >> MPP_SHIFT) & 3)
        ms &= ~(MIE_BIT | MPP_MASK)
        if ms & MPIE_BIT:
            ms |= MIE_BIT
        ms |= MPIE_BIT
        state.pc = csr[MEPC]
    else:
        new_mode = S if ms & SPP_BIT else U
        ms &= ~(SIE_BIT | SPP_BIT)
        if ms & SPIE_BIT:
            ms |= SIE_BIT
        ms |= SPIE_BIT
        state.pc = csr[SEPC]
    if new_mode != M:
        ms &= ~MPRV
    csr[MSTATUS] = ms
    state.mode = new_mode
    state._log(MSTATUS, ms)


def pending_interrupt(state: ArchState) -> TrapCause | None:
    """Highest-priority interrupt that is pending, enabled and taken now."""
    csr = state.csr
    pend = csr[MIP] & csr[MIE]
    if not pend:
        return None
    ms = csr[MSTATUS]
    mode = state.mode
    deleg = csr[MIDELEG]
    m_on = mode < M or (ms & MIE_BIT)
    s_on = mode < S or (mode == S and ms & SIE_BIT)
    for irq in _INT_PRIORITY:
        bit = 1 << irq
        if not pend & bit:
            continue
        if deleg & bit:
            if s_on and mode <= S:
                return TrapCause(int(irq), True, 0)
        elif m_on:
            return TrapCause(int(irq), True, 0)
    return None
