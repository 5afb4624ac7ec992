"""Seeded random RV32IMAC test programs for lockstep and transparency checks.

A program is a flat RAM image: an M-mode prologue that installs trap
handlers, optionally builds Sv32 page tables, seeds registers and drops to
the body's privilege mode; then a body of random instructions that loops
forever.  Every exception is handled by skipping the faulting instruction,
so runs are bounded only by the instruction limit.

Register conventions inside the body: x2, x8 and x31 are data pointers and
never written; x28-x30 belong to the handlers and address computations.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from . import asm
from .arch_state import MPP_SHIFT, MXR, SUM, PrivMode
from .isa_decode import IllegalInstruction, decode32, expand_compressed
from .mmu_sv32 import PTE_A, PTE_D, PTE_R, PTE_U, PTE_V, PTE_W, PTE_X

RAM = 0x8000_0000
M_HANDLER = RAM + 0x1000
S_HANDLER = RAM + 0x2000
BODY = RAM + 0x1_0000
DATA = RAM + 0x2_0000
DATA_PAGES = 4
PT_ROOT = RAM + 0x4_0000

BODY_VA = 0x0040_0000
S_HANDLER_VA = 0x0080_0000
DATA_VA = 0x1000_0000
MEGA_VA = 0xC000_0000  # 4MB alias of the start of RAM
UNMAPPED_PA = 0x1000_0800

WRITABLE = [1, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15] + list(range(16, 28))
C_REGS = [9, 10, 11, 12, 13, 14, 15]       # x8..x15 minus the x8 data pointer
BASES = (2, 8, 31)
EDGE_VALUES = (0, 1, 0xFFFFFFFF, 0x80000000, 0x7FFFFFFF, 2, 0xFFFFFFFE)


@dataclass
class FuzzProgram:
    seed: int
    image: bytes
    mode: PrivMode
    sv32: bool
    delegate: bool
    body_len: int

    @property
    def description(self) -> str:
        return (f"seed={self.seed} mode={self.mode.letter} sv32={self.sv32} "
                f"delegate={self.delegate} body={self.body_len}")


class _Body:
    """Instruction list with deferred encodings for forward control flow."""

    def __init__(self):
        self.items = []  # (size, encoding or callable(index, addrs))

    def add(self, word, size=4):
        self.items.append((size, word))

    def layout(self, base):
        addrs = []
        a = base
        for size, _ in self.items:
            addrs.append(a)
            a += size
        addrs.append(a)
        out = bytearray()
        for i, (size, enc) in enumerate(self.items):
            w = enc(i, addrs) if callable(enc) else enc
            out += (w & ((1 << (8 * size)) - 1)).to_bytes(size, "little")
        return bytes(out), addrs


def _rand_value(rng):
    r = rng.random()
    if r < 0.3:
        return rng.choice(EDGE_VALUES)
    if r < 0.5:
        return rng.randrange(-64, 64) & 0xFFFFFFFF
    return rng.getrandbits(32)


def _illegal_word(rng):
    while True:
        w = rng.getrandbits(32) | 3
        try:
            decode32(w)
        except IllegalInstruction:
            return w


def _illegal_parcel(rng):
    while True:
        p = rng.getrandbits(16)
        if p & 3 == 3:
            continue
        try:
            expand_compressed(p)
        except IllegalInstruction:
            return p


class _Gen:
    def __init__(self, rng: random.Random, mode: PrivMode, compressed: bool):
        self.rng = rng
        self.mode = mode
        self.compressed = compressed
        self.body = _Body()

    def rd(self):
        return 0 if self.rng.random() < 0.03 else self.rng.choice(WRITABLE)

    def rs(self):
        return self.rng.randrange(32)

    def mem_off(self, width):
        rng = self.rng
        off = rng.randrange(-2048, 2048 - 4)
        if rng.random() < 0.9:
            off &= ~(width - 1)
        return off

    def forward(self, make, lo=1, hi=24):
        """Control transfer to a later instruction; ``make(offset)`` encodes it."""
        n = self.rng.randint(lo, hi)
        self.body.add(lambda i, addrs, n=n: make(addrs[min(i + n, len(addrs) - 2)] - addrs[i]))

    def emit_one(self):
        rng = self.rng
        b = self.body
        r = rng.random()
        if r < 0.22:
            op = rng.choice(list(asm.R_OPS)[:10])
            b.add(asm.r_type(op, self.rd(), self.rs(), self.rs()))
        elif r < 0.36:
            op = rng.choice(list(asm.I_OPS) + list(asm.SHIFT_OPS))
            imm = rng.randrange(32) if op in asm.SHIFT_OPS else rng.randrange(-2048, 2048)
            b.add(asm.i_type(op, self.rd(), self.rs(), imm))
        elif r < 0.42:
            op = rng.choice(list(asm.R_OPS)[10:])
            b.add(asm.r_type(op, self.rd(), self.rs(), self.rs()))
        elif r < 0.45:
            f = asm.lui if rng.random() < 0.5 else asm.auipc
            b.add(f(self.rd(), rng.getrandbits(20)))
        elif r < 0.55:
            op = rng.choice(list(asm.LOADS))
            w = {"lb": 1, "lbu": 1, "lh": 2, "lhu": 2, "lw": 4}[op]
            b.add(asm.load(op, self.rd(), rng.choice(BASES), self.mem_off(w)))
        elif r < 0.63:
            op = rng.choice(list(asm.STORES))
            w = {"sb": 1, "sh": 2, "sw": 4}[op]
            b.add(asm.store(op, self.rs(), rng.choice(BASES), self.mem_off(w)))
        elif r < 0.71:
            op = rng.choice(list(asm.BRANCHES))
            a, c = self.rs(), self.rs()
            self.forward(lambda off, op=op, a=a, c=c: asm.br(op, a, c, off))
        elif r < 0.73:
            rd = self.rd()
            self.forward(lambda off, rd=rd: asm.jal(rd, off))
        elif r < 0.75:
            # auipc x30 + jalr, kept as one 8-byte item so no branch lands between them
            rd = self.rd()
            n = rng.randint(1, 20)

            def pair(i, addrs, n=n, rd=rd):
                off = addrs[min(i + n, len(addrs) - 2)] - addrs[i]
                return asm.auipc(30, 0) | asm.jalr(rd, 30, off) << 32
            b.add(pair, 8)
        elif r < 0.81:
            self.emit_atomic()
        elif r < 0.84:
            self.emit_csr()
        elif r < 0.86:
            self.emit_system()
        elif r < 0.87:
            if rng.random() < 0.5 or not self.compressed:
                b.add(_illegal_word(rng))
            else:
                b.add(_illegal_parcel(rng), 2)
        elif self.compressed:
            self.emit_compressed()
        else:
            b.add(asm.i_type("addi", self.rd(), self.rs(), rng.randrange(-2048, 2048)))

    def emit_atomic(self):
        """Address setup plus AMO or LR/SC, emitted as one item so no branch lands inside."""
        rng = self.rng
        ws = [asm.i_type("addi", 30, rng.choice(BASES), self.mem_off(4))]
        if rng.random() < 0.5:
            ws.append(asm.amo(rng.choice(list(asm.AMOS)), self.rd(), self.rs(), 30,
                              rng.randrange(2), rng.randrange(2)))
        else:
            ws.append(asm.lr(self.rd(), 30))
            for _ in range(rng.randrange(3)):
                ws.append(asm.r_type(rng.choice(list(asm.R_OPS)[:10]), self.rd(), self.rs(), self.rs()))
            if rng.random() < 0.2:
                ws.append(asm.store("sw", self.rs(), rng.choice(BASES), self.mem_off(4)))
            if rng.random() < 0.2:
                ws.append(asm.i_type("addi", 30, 30, rng.choice((4, -4, 0))))
            ws.append(asm.sc(self.rd(), self.rs(), 30))
        self.body.add(int.from_bytes(_words(ws), "little"), 4 * len(ws))

    def emit_csr(self):
        rng = self.rng
        if rng.random() < 0.5:
            addr = rng.choice((0x340, 0x140))
            op = rng.choice(list(asm.CSR_OPS))
            src = rng.randrange(32)
            self.body.add(asm.csr(op, self.rd(), addr, src))
        else:
            if rng.random() < 0.8:
                addr = rng.choice((0x301, 0xF14, 0x300, 0x100, 0xC00, 0xC01, 0xC02, 0xC80, 0x104,
                                   0x144, 0x304, 0x344, 0x106, 0x306, 0x7C0, 0x180))
                self.body.add(asm.csr("csrrs", self.rd(), addr, 0))
            else:
                # writes that are ignored or illegal, never ones that reconfigure the machine
                addr = rng.choice((0xC00, 0xC01, 0xC02, 0xC80, 0xF14, 0x301, 0x7C0, 0x306, 0x106))
                self.body.add(asm.csr("csrrw", self.rd(), addr, self.rs()))

    def emit_system(self):
        rng = self.rng
        choices = ["ecall", "ebreak", "fence", "wfi", "sfence"]
        if self.mode == PrivMode.USER:
            choices += ["mret", "sret"]
        c = rng.choice(choices)
        if c == "sfence":
            self.body.add(asm.sfence_vma(rng.randrange(32), rng.randrange(32)))
        else:
            self.body.add(asm.FIXED[c if c != "fence" else "fence"])

    def emit_compressed(self):
        rng = self.rng
        b = self.body
        r = rng.random()
        cr = lambda: rng.choice(C_REGS)  # noqa: E731
        full = lambda: rng.choice([x for x in WRITABLE if x])  # noqa: E731
        imm6 = lambda: rng.randrange(-32, 32)  # noqa: E731
        if r < 0.1:
            b.add(asm.c_addi(full(), imm6() or 1), 2)
        elif r < 0.18:
            b.add(asm.c_li(full(), imm6()), 2)
        elif r < 0.22:
            b.add(asm.c_lui(rng.choice([x for x in WRITABLE if x]), rng.choice([v for v in range(-32, 32) if v])), 2)
        elif r < 0.3:
            f = rng.choice((asm.c_sub, asm.c_xor, asm.c_or, asm.c_and))
            b.add(f(cr(), cr()), 2)
        elif r < 0.36:
            f = rng.choice((asm.c_srli, asm.c_srai))
            b.add(f(cr(), rng.randrange(1, 32)), 2)
        elif r < 0.4:
            b.add(asm.c_andi(cr(), imm6()), 2)
        elif r < 0.44:
            b.add(asm.c_slli(full(), rng.randrange(1, 32)), 2)
        elif r < 0.52:
            b.add(asm.c_mv(full(), rng.randrange(1, 32)), 2)
        elif r < 0.58:
            b.add(asm.c_add(full(), rng.randrange(1, 32)), 2)
        elif r < 0.66:
            b.add(asm.c_lw(cr(), 8, rng.randrange(0, 128, 4)), 2)
        elif r < 0.72:
            b.add(asm.c_sw(cr(), 8, rng.randrange(0, 128, 4)), 2)
        elif r < 0.77:
            b.add(asm.c_lwsp(full(), rng.randrange(0, 256, 4)), 2)
        elif r < 0.82:
            b.add(asm.c_swsp(rng.randrange(32), rng.randrange(0, 256, 4)), 2)
        elif r < 0.9:
            f = rng.choice((asm.c_beqz, asm.c_bnez))
            reg = cr()
            n = rng.randint(1, 12)
            b.add(lambda i, addrs, f=f, reg=reg, n=n: f(reg, addrs[min(i + n, len(addrs) - 2)] - addrs[i]), 2)
        elif r < 0.95:
            n = rng.randint(1, 12)
            f = rng.choice((asm.c_j, asm.c_jal))
            b.add(lambda i, addrs, n=n, f=f: f(addrs[min(i + n, len(addrs) - 2)] - addrs[i]), 2)
        else:
            b.add(asm.c_nop(), 2)


def _skip_handler(epc_csr, ret, offset):
    """Skip the faulting instruction: read its first parcel, advance epc by 2 or 4."""
    words = [asm.csr("csrrs", 28, epc_csr, 0)]
    words += asm.li(29, offset)
    words += [
        asm.r_type("add", 29, 28, 29),
        asm.load("lhu", 29, 29, 0),
        asm.i_type("andi", 29, 29, 3),
        asm.i_type("addi", 29, 29, -3),
        asm.i_type("addi", 28, 28, 2),
        asm.br("bne", 29, 0, 8),
        asm.i_type("addi", 28, 28, 2),
        asm.csr("csrrw", 0, epc_csr, 28),
        ret,
    ]
    return words


def _words(ws):
    return b"".join((w & 0xFFFFFFFF).to_bytes(4, "little") for w in ws)


def generate(seed: int, body_len: int = 1500, mode: PrivMode | None = None, sv32: bool | None = None,
             delegate: bool | None = None, compressed: bool = True) -> FuzzProgram:
    """Build a fuzz program; unspecified variant knobs are drawn from ``seed``."""
    rng = random.Random(seed)
    if mode is None:
        mode = rng.choice((PrivMode.MACHINE, PrivMode.SUPERVISOR, PrivMode.USER))
    if sv32 is None:
        sv32 = mode != PrivMode.MACHINE and rng.random() < 0.75
    sv32 = sv32 and mode != PrivMode.MACHINE
    if delegate is None:
        delegate = mode != PrivMode.MACHINE and rng.random() < 0.5
    delegate = delegate and mode != PrivMode.MACHINE

    image = bytearray(PT_ROOT - RAM + 0x5000)

    def put(pa, data):
        image[pa - RAM:pa - RAM + len(data)] = data

    body_base = BODY_VA if sv32 else BODY
    data_base = DATA_VA if sv32 else DATA
    g = _Gen(rng, mode, compressed)
    for _ in range(body_len):
        g.emit_one()
    # loop back to the start of the body
    g.body.add(lambda i, addrs: asm.jal(0, addrs[0] - addrs[i]))
    body_bytes, _ = g.body.layout(body_base)
    if len(body_bytes) > DATA - BODY:
        raise ValueError("fuzz body too large")
    put(BODY, body_bytes)

    # data: random contents
    put(DATA, bytes(rng.getrandbits(8) for _ in range(DATA_PAGES * 4096)))

    # handlers
    put(M_HANDLER, _words(_skip_handler(0x341, asm.FIXED["mret"], BODY - body_base)))
    if delegate:
        put(S_HANDLER, _words(_skip_handler(0x141, asm.FIXED["sret"], 0)))

    mstatus = int(mode) << MPP_SHIFT
    if sv32:
        if rng.random() < 0.3:
            mstatus |= MXR
        if rng.random() < 0.5 or (delegate and mode == PrivMode.USER):
            mstatus |= SUM
        _page_tables(rng, put, mode, delegate, len(body_bytes))

    # prologue
    pro = []
    pro += asm.li(28, M_HANDLER) + [asm.csr("csrrw", 0, 0x305, 28)]
    if delegate:
        pro += asm.li(28, S_HANDLER_VA if sv32 else S_HANDLER) + [asm.csr("csrrw", 0, 0x105, 28)]
        pro += asm.li(28, rng.choice((0xB3FF, 0xB1FF, 0x0100, 0xB000 | 0x1FF))) + [asm.csr("csrrw", 0, 0x302, 28)]
    if sv32:
        pro += asm.li(28, (1 << 31) | (PT_ROOT >> 12)) + [asm.csr("csrrw", 0, 0x180, 28)]
    pro += asm.li(28, mstatus) + [asm.csr("csrrw", 0, 0x300, 28)]
    regs = {r: _rand_value(rng) for r in WRITABLE}
    regs[2] = data_base + 0x800
    regs[8] = data_base + 0x1800
    if sv32:
        regs[31] = rng.choice((MEGA_VA + (DATA - RAM) + 0x2800, data_base + 0x3800))
    else:
        regs[31] = rng.choice((data_base + 0x2800, UNMAPPED_PA))
    for r, v in regs.items():
        pro += asm.li(r, v)
    pro += asm.li(28, body_base) + [asm.csr("csrrw", 0, 0x341, 28)]
    pro += [asm.li(29, 0)[0], asm.li(30, 0)[0], asm.FIXED["mret"]]
    if len(pro) * 4 > M_HANDLER - RAM:
        raise ValueError("fuzz prologue too large")
    put(RAM, _words(pro))
    return FuzzProgram(seed, bytes(image), mode, sv32, delegate, body_len)


def _page_tables(rng, put, mode, delegate, body_size):
    user = PTE_U if mode == PrivMode.USER else 0
    root = {}
    l0 = {}

    def ad():
        r = rng.random()
        return PTE_A | PTE_D if r < 0.5 else (PTE_A if r < 0.8 else 0)

    def map4k(va, pa, flags):
        l0.setdefault(va >> 22, {})[(va >> 12) & 0x3FF] = ((pa >> 12) << 10) | flags | PTE_V

    pages = (body_size + 4095) // 4096 + 1
    for n in range(pages):
        map4k(BODY_VA + n * 4096, BODY + n * 4096, PTE_R | PTE_X | user | ad())
    if delegate:
        map4k(S_HANDLER_VA, S_HANDLER, PTE_R | PTE_X | ad())
    perms = [PTE_R, PTE_R | PTE_W, PTE_R | PTE_W | PTE_X, PTE_X, PTE_W, 0]
    for n in range(DATA_PAGES):
        p = rng.choice(perms) if rng.random() < 0.5 else PTE_R | PTE_W
        u = user if rng.random() < 0.85 else user ^ PTE_U
        pte_flags = p | u | ad()
        va = DATA_VA + n * 4096
        if p == 0:
            l0.setdefault(va >> 22, {})[(va >> 12) & 0x3FF] = ((DATA + n * 4096) >> 12) << 10
        else:
            map4k(va, DATA + n * 4096, pte_flags)
    root[MEGA_VA >> 22] = ((RAM >> 12) << 10) | PTE_V | PTE_R | PTE_W | user | ad()
    for i, (vpn1, entries) in enumerate(sorted(l0.items())):
        table = PT_ROOT + 0x1000 * (i + 1)
        root[vpn1] = ((table >> 12) << 10) | PTE_V
        for vpn0, pte in entries.items():
            put(table + vpn0 * 4, pte.to_bytes(4, "little"))
    for vpn1, pte in root.items():
        put(PT_ROOT + vpn1 * 4, pte.to_bytes(4, "little"))
