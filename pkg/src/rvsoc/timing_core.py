"""RVCoreM-style multi-cycle core: twelve steps with instruction-dependent skips.

Every call to :meth:`TimingCore.advance` performs the work of one step and
charges its cycles.  Memory latency is charged inside the step that accesses
memory; the divider holds the machine in EX1 for ``DIV_CYCLES`` calls.

Default per-step charges (cache hit): INI 0, IF 1, CVT 1, ID 1, OF 1, EX1 1,
LD 1, EX2 1, SD 1, WB 1, COM 1, FIN 1.  An ALU instruction therefore takes
IF CVT ID OF EX1 WB COM FIN = 8 cycles, a load 9, a store 10 and an AMO 11.
"""

import enum
from dataclasses import dataclass, field

from . import arch_state as A
from .arch_state import MASK32, ArchState, Cause, Trap, TrapCause
from .isa_decode import IllegalInstruction, InstClass, decode32, expand_compressed
from .kernels import OP, alu, branch, load_extend
from .mem_hier import MemSystem
from .mmu_sv32 import AccessFault, AccessKind, Mmu
from .errors import SimulationFault
from .oracle_iss import RetireRecord


class CoreStep(enum.IntEnum):
    INI = 0
    IF = 1
    CVT = 2
    ID = 3
    OF = 4
    EX1 = 5
    LD = 6
    EX2 = 7
    SD = 8
    WB = 9
    COM = 10
    FIN = 11


INI, IF, CVT, ID, OF, EX1, LD, EX2, SD, WB, COM, FIN = range(12)
DIV_CYCLES = 32
STEP_CYCLES = {
    CoreStep.INI: 0, CoreStep.CVT: 1, CoreStep.ID: 1, CoreStep.OF: 1, CoreStep.EX1: 1,
    CoreStep.EX2: 1, CoreStep.WB: 1, CoreStep.COM: 1, CoreStep.FIN: 1,
}
# IF, LD and SD cost whatever the memory system charges (at least one cycle)

EXEC, READ, WRITE = AccessKind.EXECUTE, AccessKind.READ, AccessKind.WRITE

# micro-op classes
(K_ALU, K_ALUI, K_LUI, K_AUIPC, K_JAL, K_JALR, K_BRANCH, K_MUL, K_DIV, K_LOAD, K_STORE,
 K_LR, K_SC, K_AMO, K_CSR, K_MRET, K_SRET, K_WFI, K_SFENCE, K_FENCE, K_ECALL, K_EBREAK) = range(22)

_MEM_CLASSES = frozenset((K_LOAD, K_STORE, K_LR, K_SC, K_AMO))
_LOAD_WIDTH = {"lb": 1, "lh": 2, "lw": 4, "lbu": 1, "lhu": 2, "sb": 1, "sh": 2, "sw": 4}
_LOAD_F3 = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
_ALUI_OP = {"addi": "add", "slti": "slt", "sltiu": "sltu", "xori": "xor", "ori": "or",
            "andi": "and", "slli": "sll", "srli": "srl", "srai": "sra"}
_AMO_OP = {"swap": "swap", "add": "amoadd", "xor": "amoxor", "and": "amoand", "or": "amoor",
           "min": "min", "max": "max", "minu": "minu", "maxu": "maxu"}
_SYS = {"mret": K_MRET, "sret": K_SRET, "wfi": K_WFI, "sfence.vma": K_SFENCE,
        "ecall": K_ECALL, "ebreak": K_EBREAK}


class Uop:
    """Decoded instruction flattened for the step handlers."""

    __slots__ = ("kind", "op", "rd", "rs1", "rs2", "imm", "width", "f3", "csr_kind",
                 "csr_imm", "csr_writes", "raw")

    def __init__(self, d):
        self.rd, self.rs1, self.rs2, self.imm, self.raw = d.rd, d.rs1, d.rs2, d.imm, d.raw
        self.op = 0
        self.width = 4
        self.f3 = 2
        self.csr_kind = 0
        self.csr_imm = False
        self.csr_writes = False
        c = d.cls
        f = d.funct
        if c is InstClass.ALU:
            self.kind, self.op = K_ALU, OP[f]
        elif c is InstClass.ALU_IMM:
            self.kind, self.op = K_ALUI, OP[_ALUI_OP[f]]
        elif c is InstClass.LUI:
            self.kind = K_LUI
        elif c is InstClass.AUIPC:
            self.kind = K_AUIPC
        elif c is InstClass.JAL:
            self.kind = K_JAL
        elif c is InstClass.JALR:
            self.kind = K_JALR
        elif c is InstClass.BRANCH:
            self.kind, self.op = K_BRANCH, OP[f]
        elif c is InstClass.MULDIV:
            self.kind = K_DIV if f.startswith(("div", "rem")) else K_MUL
            self.op = OP[f]
        elif c is InstClass.LOAD:
            self.kind, self.width, self.f3 = K_LOAD, _LOAD_WIDTH[f], _LOAD_F3[f]
        elif c is InstClass.STORE:
            self.kind, self.width = K_STORE, _LOAD_WIDTH[f]
        elif c is InstClass.LRSC:
            self.kind = K_LR if f == "lr" else K_SC
        elif c is InstClass.AMO:
            self.kind, self.op = K_AMO, OP[_AMO_OP[f]]
        elif c is InstClass.CSR:
            self.kind = K_CSR
            self.csr_imm = f.endswith("i")
            self.csr_kind = {"csrrw": 1, "csrrs": 2, "csrrc": 3}[f[:-1] if self.csr_imm else f]
            self.csr_writes = self.csr_kind == 1 or d.rs1 != 0
            self.imm = d.imm & 0xFFF
        elif c is InstClass.SYSTEM:
            self.kind = _SYS[f]
        else:
            self.kind = K_FENCE


_UOPS: dict[int, Uop] = {}


def _uop(raw: int) -> Uop:
    u = _UOPS.get(raw)
    if u is None:
        u = _UOPS[raw] = Uop(decode32(raw))
    return u


def next_step(step: int, kind: int | None, pending_trap: bool, stall: bool) -> CoreStep:
    """Transition function of the step machine.

    ``kind`` is the micro-op class (``None`` before decode).  High-priority
    edges: a stall holds the current step; a pending exception goes to COM.
    """
    if stall and not pending_trap:
        return CoreStep(step)
    if pending_trap and step not in (COM, FIN):
        return CoreStep.COM
    if step == INI:
        return CoreStep.IF
    if step in (IF, CVT, ID, OF):
        return CoreStep(step + 1)
    if step == EX1:
        return CoreStep.LD if kind in _MEM_CLASSES else CoreStep.WB
    if step == LD:
        if kind == K_AMO:
            return CoreStep.EX2
        if kind in (K_STORE, K_SC):
            return CoreStep.SD
        return CoreStep.WB
    if step in (EX2, SD):
        return CoreStep(step + 1)
    if step == WB:
        return CoreStep.COM
    if step == COM:
        return CoreStep.FIN
    return CoreStep.INI


@dataclass
class CycleCounters:
    cycles: int = 0
    retired: int = 0
    trapped: int = 0
    excluded: int = 0
    per_step: list = field(default_factory=lambda: [0] * 12)
    visits: list = field(default_factory=lambda: [0] * 12)

    @property
    def cpi(self) -> float | None:
        return self.cycles / self.retired if self.retired else None


class TimingCore:
    """The step machine plus its in-flight instruction latches."""

    def __init__(self, state: ArchState, mem: MemSystem, mmu: Mmu | None = None):
        self.state = state
        self.mem = mem
        self.mmu = mmu if mmu is not None else Mmu()
        self.counters = CycleCounters()
        self.step = INI
        self.alu = alu  # replaceable for fault-injection tests
        self._handlers = (self._ini, self._if, self._cvt, self._id, self._of, self._ex1,
                          self._ld, self._ex2, self._sd, self._wb, self._com, self._fin)
        self._reset_latches()

    def _reset_latches(self):
        self.pc_before = self.state.pc
        self.mode_before = self.state.mode
        self.window = 0
        self.raw = 0
        self.compressed = False
        self.uop: Uop | None = None
        self.a = self.b = 0
        self.csr_old = 0
        self.csr_new = 0
        self.result = 0
        self.write_rd = False
        self.next_pc = 0
        self.va = 0
        self.pa = 0
        self.load_data = 0
        self.div_left = 0
        self.trap: TrapCause | None = None
        self.sc_ok = False
        self.ops: list = []

    @property
    def fsm_step(self) -> CoreStep:
        return CoreStep(self.step)

    # -- driving -------------------------------------------------------
    def advance(self) -> RetireRecord | None:
        """Run the current step; returns a record when an instruction leaves FIN."""
        step = self.step
        mem = self.mem
        start = mem.cycles
        extra, nxt, rec = self._handlers[step]()
        c = extra + mem.cycles - start
        cnt = self.counters
        cnt.cycles += c
        cnt.per_step[step] += c
        cnt.visits[step] += 1
        self.step = nxt
        return rec

    def run_instruction(self, stall=None) -> RetireRecord | None:
        """Advance until a record is produced.

        ``stall`` is any object with a ``busy`` attribute (the RVuc); while it
        is set the core holds its current step, so this returns ``None`` and
        the caller services the stall before calling again.
        """
        handlers = self._handlers
        mem = self.mem
        cnt = self.counters
        per_step = cnt.per_step
        visits = cnt.visits
        step = self.step
        while True:
            if stall is not None and stall.busy:
                self.step = step
                return None
            start = mem.cycles
            extra, nxt, rec = handlers[step]()
            c = extra + mem.cycles - start
            cnt.cycles += c
            per_step[step] += c
            visits[step] += 1
            step = nxt
            if rec is not None:
                self.step = step
                return rec

    def _walk_hook(self, state_no):
        # latch / judge / update states of the walker cost one cycle each
        if state_no in (2, 4, 5, 6):
            self.mem.cycles += 1

    def _translate(self, va, kind, mode):
        st = self.state
        csr = st.csr
        satp = csr[A.SATP]
        if not satp >> 31 or mode == A.M:
            return va
        mem = self.mem
        return self.mmu.translate(va, kind, mode, satp, csr[A.MSTATUS], mem.read_word,
                                  mem.write_word, self._walk_hook)

    def _fault(self, code, tval):
        self.trap = TrapCause(int(code), False, tval & MASK32)
        return COM

    # -- steps ---------------------------------------------------------
    def _ini(self):
        st = self.state
        st.csr_log = []
        self.pc_before = st.pc
        self.mode_before = st.mode
        self.trap = None
        self.uop = None
        self.raw = 0
        self.write_rd = False
        self.ops = []
        irq = A.pending_interrupt(st)
        if irq is not None:
            self.trap = irq
            return 0, COM, None
        return 0, IF, None

    def _if(self):
        st = self.state
        va = st.pc
        mem = self.mem
        start = mem.cycles
        try:
            pa = self._translate(va, EXEC, st.mode)
            if (va & 0xFFF) == 0xFFE:
                lo = mem.fetch_half(pa)
                if lo & 3 == 3:
                    try:
                        pa2 = self._translate((va + 2) & MASK32, EXEC, st.mode)
                    except Trap as t:
                        return 0, self._fault(t.code, t.tval), None
                    hi = mem.fetch_half(pa2)
                    mem.latch(pa2, hi)
                    window = lo | (hi << 16)
                else:
                    mem.fbuf.valid = False
                    window = lo
            else:
                window = mem.fetch(pa)
        except Trap as t:
            return (0 if mem.cycles > start else 1), self._fault(t.code, t.tval), None
        except AccessFault:
            if not st.csr[A.SATP] >> 31 or st.mode == A.M:
                raise SimulationFault(f"instruction fetch from unmapped address {va:#010x}") from None
            return (0 if mem.cycles > start else 1), self._fault(Cause.INST_ACCESS, va), None
        self.window = window
        self.compressed = (window & 3) != 3
        self.raw = (window & 0xFFFF) if self.compressed else window
        return (0 if mem.cycles > start else 1), CVT, None

    def _cvt(self):
        if self.compressed:
            parcel = self.window & 0xFFFF
            try:
                self.raw = expand_compressed(parcel)
            except IllegalInstruction:
                return 1, self._fault(Cause.ILLEGAL, parcel), None
        return 1, ID, None

    def _id(self):
        try:
            u = _uop(self.raw)
        except IllegalInstruction:
            bits = self.window & 0xFFFF if self.compressed else self.raw
            return 1, self._fault(Cause.ILLEGAL, bits), None
        self.uop = u
        k = u.kind
        if k >= K_MRET:
            st = self.state
            mode = st.mode
            if k == K_ECALL:
                code = (Cause.ECALL_U, Cause.ECALL_S, 0, Cause.ECALL_M)[mode]
                return 1, self._fault(code, 0), None
            if k == K_EBREAK:
                return 1, self._fault(Cause.BREAKPOINT, st.pc), None
            ms = st.csr[A.MSTATUS]
            if k == K_MRET or k == K_SRET:
                try:
                    A.check_trap_return(st, "mret" if k == K_MRET else "sret")
                except Trap:
                    return 1, self._illegal(), None
            elif k == K_WFI:
                if mode == A.U or (mode == A.S and ms & A.TW):
                    return 1, self._illegal(), None
            elif k == K_SFENCE:
                if mode == A.U or (mode == A.S and ms & A.TVM):
                    return 1, self._illegal(), None
        return 1, OF, None

    def _illegal(self):
        bits = self.window & 0xFFFF if self.compressed else self.raw
        return self._fault(Cause.ILLEGAL, bits)

    def _of(self):
        u = self.uop
        x = self.state.x
        self.a = x[u.rs1]
        self.b = x[u.rs2]
        if u.kind == K_CSR:
            st = self.state
            try:
                if u.csr_writes:
                    A.csr_check_write(st, u.imm)
                self.csr_old = A.csr_read(st, u.imm)
            except Trap:
                return 1, self._illegal(), None
        return 1, EX1, None

    def _ex1(self):
        u = self.uop
        k = u.kind
        pc = self.state.pc
        size = 2 if self.compressed else 4
        self.next_pc = (pc + size) & MASK32
        if k == K_ALUI:
            self.result = self.alu(u.op, self.a, u.imm)
            self.write_rd = True
        elif k == K_ALU or k == K_MUL:
            self.result = self.alu(u.op, self.a, self.b)
            self.write_rd = True
        elif k == K_BRANCH:
            if branch(u.op, self.a, self.b):
                self.next_pc = (pc + u.imm) & MASK32
        elif k in _MEM_CLASSES:
            va = (self.a + u.imm) & MASK32 if k <= K_STORE else self.a
            self.va = va
            if va & (u.width - 1):
                code = Cause.LOAD_MISALIGNED if k in (K_LOAD, K_LR) else Cause.STORE_MISALIGNED
                return 1, self._fault(code, va), None
            return 1, LD, None
        elif k == K_LUI:
            self.result = u.imm
            self.write_rd = True
        elif k == K_AUIPC:
            self.result = (pc + u.imm) & MASK32
            self.write_rd = True
        elif k == K_JAL:
            self.result = self.next_pc
            self.write_rd = True
            self.next_pc = (pc + u.imm) & MASK32
        elif k == K_JALR:
            self.result = self.next_pc
            self.write_rd = True
            self.next_pc = (self.a + u.imm) & MASK32 & ~1
        elif k == K_DIV:
            # the divider holds EX1 for DIV_CYCLES cycles in total
            if self.div_left == 0:
                self.div_left = DIV_CYCLES
            self.div_left -= 1
            if self.div_left:
                return 1, EX1, None
            self.result = self.alu(u.op, self.a, self.b)
            self.write_rd = True
        elif k == K_CSR:
            src = u.rs1 if u.csr_imm else self.a
            ck = u.csr_kind
            if ck == 1:
                self.csr_new = src
            elif ck == 2:
                self.csr_new = self.csr_old | src
            else:
                self.csr_new = self.csr_old & ~src & MASK32
            self.result = self.csr_old
            self.write_rd = True
        return 1, WB, None

    def _ld(self):
        u = self.uop
        k = u.kind
        st = self.state
        mem = self.mem
        start = mem.cycles
        va = self.va
        try:
            if k == K_LOAD or k == K_LR:
                pa = self._translate(va, READ, st.data_mode())
                try:
                    v = mem.read(pa, u.width)
                except AccessFault:
                    return 1, self._fault(Cause.LOAD_ACCESS, va), None
                self.ops.append(("r", pa, u.width, v))
                self.result = load_extend(u.f3, v)
                self.write_rd = True
                if k == K_LR:
                    st.res_valid = True
                    st.res_addr = pa
                return (0 if mem.cycles > start else 1), WB, None
            if k == K_STORE:
                return 1, SD, None
            pa = self._translate(va, WRITE, st.data_mode())
            self.pa = pa
            if k == K_SC:
                self.sc_ok = st.res_valid and st.res_addr == pa
                return (0 if mem.cycles > start else 1), SD, None
            try:
                self.load_data = mem.read(pa, 4)
            except AccessFault:
                return 1, self._fault(Cause.STORE_ACCESS, va), None
            self.ops.append(("r", pa, 4, self.load_data))
            return (0 if mem.cycles > start else 1), EX2, None
        except Trap as t:
            return (0 if mem.cycles > start else 1), self._fault(t.code, t.tval), None

    def _ex2(self):
        self.result = self.alu(self.uop.op, self.load_data, self.b)
        return 1, SD, None

    def _sd(self):
        u = self.uop
        k = u.kind
        st = self.state
        mem = self.mem
        start = mem.cycles
        if k == K_STORE:
            try:
                pa = self._translate(self.va, WRITE, st.data_mode())
            except Trap as t:
                return (0 if mem.cycles > start else 1), self._fault(t.code, t.tval), None
            value = self.b & ((1 << (8 * u.width)) - 1)
            if not self._write(pa, u.width, value):
                return 1, COM, None
        elif k == K_SC:
            if self.sc_ok:
                if not self._write(self.pa, 4, self.b):
                    return 1, COM, None
                self.result = 0
            else:
                self.result = 1
            st.res_valid = False
            self.write_rd = True
        else:
            if not self._write(self.pa, 4, self.result):
                return 1, COM, None
            self.result = self.load_data
            self.write_rd = True
        return (0 if mem.cycles > start else 1), WB, None

    def _write(self, pa, width, value):
        try:
            self.mem.write(pa, width, value)
        except AccessFault:
            self._fault(Cause.STORE_ACCESS, self.va)
            return False
        self.state.res_valid = False
        self.ops.append(("w", pa, width, value))
        return True

    def _wb(self):
        if self.write_rd:
            rd = self.uop.rd
            if rd:
                self.state.x[rd] = self.result & MASK32
        return 1, COM, None

    def _com(self):
        st = self.state
        trap = self.trap
        if trap is not None:
            st.pc = self.pc_before
            st.csr_log = []
            A.take_trap(st, trap)
            self.mem.fbuf.valid = False
            return 1, FIN, None
        u = self.uop
        k = u.kind
        if k == K_CSR:
            if u.csr_writes:
                A.csr_write(st, u.imm, self.csr_new)
                if u.imm == A.SATP:
                    self.mmu.tlb_flush()
            st.pc = self.next_pc
        elif k == K_MRET:
            A.trap_return(st, "mret")
        elif k == K_SRET:
            A.trap_return(st, "sret")
        else:
            if k == K_SFENCE:
                self.mmu.tlb_flush()
            st.pc = self.next_pc
        return 1, FIN, None

    def _fin(self):
        st = self.state
        cnt = self.counters
        trap = self.trap
        if trap is None:
            st.retired += 1
            cnt.retired += 1
            u = self.uop
            g = ((u.rd, st.x[u.rd]),) if self.write_rd and u.rd else ()
            rec = RetireRecord(self.pc_before, self.raw, int(self.mode_before), g,
                               tuple(st.csr_log), tuple(self.ops), None)
        else:
            cnt.trapped += 1
            rec = RetireRecord(self.pc_before, self.raw, int(self.mode_before), (),
                               tuple(st.csr_log), (), trap)
        return 1, INI, rec
