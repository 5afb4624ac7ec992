"""Untimed reference interpreter for RV32IMAC.

The interpreter works straight from the instruction bits and executes
compressed parcels natively; it does not use the table decoder or the
compressed expander for execution, which keeps it independent of the timing
core it is compared against.  It walks the page table on every translated
access (no TLBs, no cache, no fetch buffer).
"""

from typing import NamedTuple

from . import arch_state as A
from .arch_state import MASK32, ArchState, Cause, Trap, TrapCause
from .errors import SimulationFault
from .isa_decode import IllegalInstruction, expand_compressed
from .mmu_sv32 import AccessFault, AccessKind, walk_translate

EXEC, READ, WRITE = AccessKind.EXECUTE, AccessKind.READ, AccessKind.WRITE


class RetireRecord(NamedTuple):
    pc_before: int
    raw: int
    mode: int
    gpr_writes: tuple = ()
    csr_writes: tuple = ()
    mem_ops: tuple = ()
    trap: TrapCause | None = None


def _s32(v: int) -> int:
    return v - 0x100000000 if v & 0x80000000 else v


def _sx(v: int, bits: int) -> int:
    v &= (1 << bits) - 1
    return v - (1 << bits) if v >> (bits - 1) else v


def _b(v: int, hi: int, lo: int) -> int:
    return (v >> lo) & ((1 << (hi - lo + 1)) - 1)


def _div(a: int, b: int) -> int:
    sa, sb = _s32(a), _s32(b)
    if sb == 0:
        return MASK32
    if sa == -0x80000000 and sb == -1:
        return a
    q = abs(sa) // abs(sb)
    return (-q if (sa < 0) != (sb < 0) else q) & MASK32


def _rem(a: int, b: int) -> int:
    sa, sb = _s32(a), _s32(b)
    if sb == 0:
        return a
    if sa == -0x80000000 and sb == -1:
        return 0
    r = abs(sa) % abs(sb)
    return (-r if sa < 0 else r) & MASK32


def _amo(kind: int, old: int, src: int) -> int:
    if kind == 0b00001:
        return src
    if kind == 0b00000:
        return (old + src) & MASK32
    if kind == 0b00100:
        return old ^ src
    if kind == 0b01100:
        return old & src
    if kind == 0b01000:
        return old | src
    if kind == 0b10000:
        return old if _s32(old) <= _s32(src) else src
    if kind == 0b10100:
        return old if _s32(old) >= _s32(src) else src
    if kind == 0b11000:
        return min(old, src)
    if kind == 0b11100:
        return max(old, src)
    raise KeyError(kind)


_AMO_KINDS = {0b00001, 0b00000, 0b00100, 0b01100, 0b01000, 0b10000, 0b10100, 0b11000, 0b11100}


class _Illegal(Exception):
    pass


class Oracle:
    """Reference interpreter bound to one state and one physical memory view."""

    def __init__(self, state: ArchState, memory):
        self.state = state
        self.mem = memory
        self._gpr = None
        self._ops: list = []

    # -- helpers -------------------------------------------------------
    def _wr(self, rd: int, value: int) -> None:
        if rd:
            value &= MASK32
            self.state.x[rd] = value
            self._gpr = (rd, value)

    def _xlate(self, va: int, kind: int, mode: int) -> int:
        st = self.state
        csr = st.csr
        return walk_translate(va & MASK32, kind, mode, csr[A.SATP], csr[A.MSTATUS],
                              self.mem.read_word, self.mem.write_word)

    def _load(self, va: int, width: int) -> int:
        va &= MASK32
        if va & (width - 1):
            raise Trap(Cause.LOAD_MISALIGNED, va)
        pa = self._xlate(va, READ, self.state.data_mode())
        try:
            v = self.mem.read(pa, width)
        except AccessFault:
            raise Trap(Cause.LOAD_ACCESS, va) from None
        self._ops.append(("r", pa, width, v))
        return v

    def _store_pa(self, va: int, width: int) -> int:
        va &= MASK32
        if va & (width - 1):
            raise Trap(Cause.STORE_MISALIGNED, va)
        return self._xlate(va, WRITE, self.state.data_mode())

    def _store(self, va: int, pa: int, width: int, value: int) -> None:
        value &= (1 << (8 * width)) - 1
        try:
            self.mem.write(pa, width, value)
        except AccessFault:
            raise Trap(Cause.STORE_ACCESS, va & MASK32) from None
        self.state.res_valid = False
        self._ops.append(("w", pa, width, value))

    def _fetch16(self, va: int) -> tuple[int, int]:
        st = self.state
        pa = self._xlate(va, EXEC, st.mode)
        try:
            return self.mem.read(pa, 2), pa
        except AccessFault:
            if not (st.csr[A.SATP] >> 31) or st.mode == A.M:
                raise SimulationFault(f"instruction fetch from unmapped address {pa:#010x}") from None
            raise Trap(Cause.INST_ACCESS, va) from None

    # -- stepping ------------------------------------------------------
    def step(self) -> RetireRecord:
        st = self.state
        st.csr_log = []
        pc = st.pc
        mode = st.mode
        irq = A.pending_interrupt(st)
        if irq is not None:
            A.take_trap(st, irq)
            return RetireRecord(pc, 0, int(mode), (), tuple(st.csr_log), (), irq)
        self._gpr = None
        self._ops = []
        bits = 0
        raw = 0
        try:
            lo, pa = self._fetch16(pc)
            if lo & 3 == 3:
                if (pc & 0xFFF) == 0xFFE:
                    hi = self._fetch16((pc + 2) & MASK32)[0]
                else:
                    try:
                        hi = self.mem.read(pa + 2, 2)
                    except AccessFault:
                        raise Trap(Cause.INST_ACCESS, pc) from None
                bits = raw = lo | (hi << 16)
                self._exec32(bits, pc)
            else:
                bits = lo
                try:
                    raw = expand_compressed(lo)
                except IllegalInstruction:
                    raw = lo
                self._exec16(lo, pc)
        except _Illegal:
            return self._trap(pc, mode, raw, TrapCause(Cause.ILLEGAL, False, bits))
        except Trap as t:
            tval = bits if t.code == Cause.ILLEGAL else t.tval
            return self._trap(pc, mode, raw, TrapCause(t.code, False, tval))
        st.retired += 1
        g = self._gpr
        return RetireRecord(pc, raw, int(mode), (g,) if g else (), tuple(st.csr_log), tuple(self._ops), None)

    def _trap(self, pc, mode, raw, cause: TrapCause) -> RetireRecord:
        st = self.state
        st.pc = pc
        st.csr_log = []
        A.take_trap(st, cause)
        return RetireRecord(pc, raw, int(mode), (), tuple(st.csr_log), (), cause)

    # -- 32-bit instructions -------------------------------------------
    def _exec32(self, w: int, pc: int) -> None:
        st = self.state
        x = st.x
        op = w & 0x7F
        rd = (w >> 7) & 31
        f3 = (w >> 12) & 7
        rs1 = (w >> 15) & 31
        rs2 = (w >> 20) & 31
        f7 = w >> 25
        npc = (pc + 4) & MASK32
        a = x[rs1]
        b = x[rs2]

        if op == 0x33:
            if f7 == 1:
                if f3 == 0:
                    r = a * b
                elif f3 == 1:
                    r = (_s32(a) * _s32(b)) >> 32
                elif f3 == 2:
                    r = (_s32(a) * b) >> 32
                elif f3 == 3:
                    r = (a * b) >> 32
                elif f3 == 4:
                    r = _div(a, b)
                elif f3 == 5:
                    r = MASK32 if b == 0 else a // b
                elif f3 == 6:
                    r = _rem(a, b)
                else:
                    r = a if b == 0 else a % b
            elif f7 == 0:
                if f3 == 0:
                    r = a + b
                elif f3 == 1:
                    r = a << (b & 31)
                elif f3 == 2:
                    r = int(_s32(a) < _s32(b))
                elif f3 == 3:
                    r = int(a < b)
                elif f3 == 4:
                    r = a ^ b
                elif f3 == 5:
                    r = a >> (b & 31)
                elif f3 == 6:
                    r = a | b
                else:
                    r = a & b
            elif f7 == 0x20 and f3 == 0:
                r = a - b
            elif f7 == 0x20 and f3 == 5:
                r = _s32(a) >> (b & 31)
            else:
                raise _Illegal
            self._wr(rd, r)
        elif op == 0x13:
            imm = _sx(w >> 20, 12)
            if f3 == 0:
                r = a + imm
            elif f3 == 1:
                if f7:
                    raise _Illegal
                r = a << rs2
            elif f3 == 2:
                r = int(_s32(a) < imm)
            elif f3 == 3:
                r = int(a < (imm & MASK32))
            elif f3 == 4:
                r = a ^ (imm & MASK32)
            elif f3 == 5:
                if f7 == 0:
                    r = a >> rs2
                elif f7 == 0x20:
                    r = _s32(a) >> rs2
                else:
                    raise _Illegal
            elif f3 == 6:
                r = a | (imm & MASK32)
            else:
                r = a & (imm & MASK32)
            self._wr(rd, r)
        elif op == 0x37:
            self._wr(rd, w & 0xFFFFF000)
        elif op == 0x17:
            self._wr(rd, pc + (w & 0xFFFFF000))
        elif op == 0x6F:
            off = _sx((_b(w, 31, 31) << 20) | (_b(w, 19, 12) << 12) | (_b(w, 20, 20) << 11)
                      | (_b(w, 30, 21) << 1), 21)
            self._wr(rd, npc)
            npc = (pc + off) & MASK32
        elif op == 0x67:
            if f3:
                raise _Illegal
            target = (a + _sx(w >> 20, 12)) & ~1 & MASK32
            self._wr(rd, pc + 4)
            npc = target
        elif op == 0x63:
            off = _sx((_b(w, 31, 31) << 12) | (_b(w, 7, 7) << 11) | (_b(w, 30, 25) << 5)
                      | (_b(w, 11, 8) << 1), 13)
            if f3 == 0:
                t = a == b
            elif f3 == 1:
                t = a != b
            elif f3 == 4:
                t = _s32(a) < _s32(b)
            elif f3 == 5:
                t = _s32(a) >= _s32(b)
            elif f3 == 6:
                t = a < b
            elif f3 == 7:
                t = a >= b
            else:
                raise _Illegal
            if t:
                npc = (pc + off) & MASK32
        elif op == 0x03:
            va = a + _sx(w >> 20, 12)
            if f3 == 0:
                r = _sx(self._load(va, 1), 8)
            elif f3 == 1:
                r = _sx(self._load(va, 2), 16)
            elif f3 == 2:
                r = self._load(va, 4)
            elif f3 == 4:
                r = self._load(va, 1)
            elif f3 == 5:
                r = self._load(va, 2)
            else:
                raise _Illegal
            self._wr(rd, r)
        elif op == 0x23:
            if f3 > 2:
                raise _Illegal
            width = 1 << f3
            va = (a + _sx((f7 << 5) | rd, 12)) & MASK32
            pa = self._store_pa(va, width)
            self._store(va, pa, width, b)
        elif op == 0x0F:
            if f3 > 1:
                raise _Illegal
        elif op == 0x2F:
            self._atomic(w, rd, f3, rs1, rs2, f7 >> 2)
        elif op == 0x73:
            if self._system(w, pc, rd, f3, rs1):
                return  # mret/sret already set the pc
        else:
            raise _Illegal
        st.pc = npc

    def _atomic(self, w, rd, f3, rs1, rs2, funct5):
        st = self.state
        if f3 != 2:
            raise _Illegal
        va = st.x[rs1]
        if funct5 == 0b00010:
            if rs2:
                raise _Illegal
            if va & 3:
                raise Trap(Cause.LOAD_MISALIGNED, va)
            pa = self._xlate(va, READ, st.data_mode())
            try:
                v = self.mem.read(pa, 4)
            except AccessFault:
                raise Trap(Cause.LOAD_ACCESS, va) from None
            self._ops.append(("r", pa, 4, v))
            st.res_valid = True
            st.res_addr = pa
            self._wr(rd, v)
            return
        if funct5 == 0b00011:
            pa = self._store_pa(va, 4)
            if st.res_valid and st.res_addr == pa:
                self._store(va, pa, 4, st.x[rs2])
                self._wr(rd, 0)
            else:
                st.res_valid = False
                self._wr(rd, 1)
            return
        if funct5 not in _AMO_KINDS:
            raise _Illegal
        pa = self._store_pa(va, 4)
        try:
            old = self.mem.read(pa, 4)
        except AccessFault:
            raise Trap(Cause.STORE_ACCESS, va) from None
        self._ops.append(("r", pa, 4, old))
        src = st.x[rs2]
        self._store(va, pa, 4, _amo(funct5, old, src))
        self._wr(rd, old)

    def _system(self, w, pc, rd, f3, rs1):
        st = self.state
        if f3 == 0:
            mode = st.mode
            if w == 0x00000073:
                raise Trap({A.U: Cause.ECALL_U, A.S: Cause.ECALL_S, A.M: Cause.ECALL_M}[mode])
            if w == 0x00100073:
                raise Trap(Cause.BREAKPOINT, pc)
            if w == 0x30200073:
                A.trap_return(st, "mret")
                return True
            if w == 0x10200073:
                A.trap_return(st, "sret")
                return True
            if w == 0x10500073:
                if mode == A.U or (mode == A.S and st.csr[A.MSTATUS] & A.TW):
                    raise _Illegal
                return
            if (w >> 25) == 0x09 and rd == 0:
                if mode == A.U or (mode == A.S and st.csr[A.MSTATUS] & A.TVM):
                    raise _Illegal
                return
            raise _Illegal
        if f3 == 4:
            raise _Illegal
        addr = w >> 20
        imm_form = f3 >= 5
        kind = f3 & 3
        writes = kind == 1 or rs1 != 0
        if writes:
            A.csr_check_write(st, addr)
        old = A.csr_read(st, addr)
        src = rs1 if imm_form else st.x[rs1]
        if writes:
            if kind == 1:
                new = src
            elif kind == 2:
                new = old | src
            else:
                new = old & ~src & MASK32
            A.csr_write(st, addr, new)
        self._wr(rd, old)

    # -- compressed instructions ---------------------------------------
    def _exec16(self, p: int, pc: int) -> None:
        st = self.state
        x = st.x
        q = p & 3
        f = p >> 13
        npc = (pc + 2) & MASK32
        r3d = ((p >> 2) & 7) + 8
        r3s = ((p >> 7) & 7) + 8
        r5 = (p >> 7) & 31
        r5b = (p >> 2) & 31
        imm6 = _sx(((p >> 12) & 1) << 5 | r5b, 6)

        if q == 0:
            if f == 0:
                nz = (_b(p, 10, 7) << 6) | (_b(p, 12, 11) << 4) | (_b(p, 5, 5) << 3) | (_b(p, 6, 6) << 2)
                if not nz:
                    raise _Illegal
                self._wr(r3d, x[2] + nz)
            elif f == 2 or f == 6:
                off = (_b(p, 5, 5) << 6) | (_b(p, 12, 10) << 3) | (_b(p, 6, 6) << 2)
                va = (x[r3s] + off) & MASK32
                if f == 2:
                    self._wr(r3d, self._load(va, 4))
                else:
                    pa = self._store_pa(va, 4)
                    self._store(va, pa, 4, x[r3d])
            else:
                raise _Illegal
        elif q == 1:
            if f == 0:
                self._wr(r5, x[r5] + imm6)
            elif f == 1 or f == 5:
                off = _sx((_b(p, 12, 12) << 11) | (_b(p, 8, 8) << 10) | (_b(p, 10, 9) << 8)
                          | (_b(p, 6, 6) << 7) | (_b(p, 7, 7) << 6) | (_b(p, 2, 2) << 5)
                          | (_b(p, 11, 11) << 4) | (_b(p, 5, 3) << 1), 12)
                if f == 1:
                    self._wr(1, npc)
                npc = (pc + off) & MASK32
            elif f == 2:
                self._wr(r5, imm6)
            elif f == 3:
                if r5 == 2:
                    nz = _sx((_b(p, 12, 12) << 9) | (_b(p, 4, 3) << 7) | (_b(p, 5, 5) << 6)
                             | (_b(p, 2, 2) << 5) | (_b(p, 6, 6) << 4), 10)
                    if not nz:
                        raise _Illegal
                    self._wr(2, x[2] + nz)
                else:
                    if not imm6:
                        raise _Illegal
                    self._wr(r5, imm6 << 12)
            elif f == 4:
                sel = _b(p, 11, 10)
                if sel < 2:
                    if p & 0x1000:
                        raise _Illegal
                    sh = r5b
                    self._wr(r3s, (x[r3s] >> sh) if sel == 0 else (_s32(x[r3s]) >> sh))
                elif sel == 2:
                    self._wr(r3s, x[r3s] & (imm6 & MASK32))
                else:
                    if p & 0x1000:
                        raise _Illegal
                    a, b = x[r3s], x[r3d]
                    op = _b(p, 6, 5)
                    self._wr(r3s, (a - b, a ^ b, a | b, a & b)[op])
            else:
                off = _sx((_b(p, 12, 12) << 8) | (_b(p, 6, 5) << 6) | (_b(p, 2, 2) << 5)
                          | (_b(p, 11, 10) << 3) | (_b(p, 4, 3) << 1), 9)
                if (x[r3s] == 0) == (f == 6):
                    npc = (pc + off) & MASK32
        else:
            if f == 0:
                if p & 0x1000:
                    raise _Illegal
                self._wr(r5, x[r5] << r5b)
            elif f == 2:
                if not r5:
                    raise _Illegal
                off = (_b(p, 3, 2) << 6) | (_b(p, 12, 12) << 5) | (_b(p, 6, 4) << 2)
                self._wr(r5, self._load(x[2] + off, 4))
            elif f == 4:
                if not p & 0x1000:
                    if not r5b:
                        if not r5:
                            raise _Illegal
                        npc = x[r5] & ~1
                    else:
                        self._wr(r5, x[r5b])
                else:
                    if not r5b:
                        if not r5:
                            raise Trap(Cause.BREAKPOINT, pc)
                        target = x[r5] & ~1
                        self._wr(1, npc)
                        npc = target
                    else:
                        self._wr(r5, x[r5] + x[r5b])
            elif f == 6:
                off = (_b(p, 8, 7) << 6) | (_b(p, 12, 9) << 2)
                va = (x[2] + off) & MASK32
                pa = self._store_pa(va, 4)
                self._store(va, pa, 4, x[r5b])
            else:
                raise _Illegal
        st.pc = npc


def oracle_step(state: ArchState, memory) -> tuple[ArchState, RetireRecord]:
    rec = Oracle(state, memory).step()
    return state, rec


def oracle_run(state: ArchState, memory, n: int) -> tuple[ArchState, list[RetireRecord]]:
    o = Oracle(state, memory)
    return state, [o.step() for _ in range(n)]
