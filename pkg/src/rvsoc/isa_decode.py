"""Instruction parcel length, compressed expansion and 32-bit decode for RV32IMAC.

``expand_compressed`` is the CVT step: every legal 16-bit parcel is rewritten
into the equivalent 32-bit encoding so that nothing downstream ever sees a
compressed instruction.  ``decode32`` turns a 32-bit word into a
:class:`DecodedInst` record.
"""

import enum
from dataclasses import dataclass
from functools import lru_cache


class IllegalInstruction(Exception):
    """Raised for reserved, undefined or unsupported encodings."""

    def __init__(self, bits: int):
        super().__init__(f"illegal instruction {bits:#x}")
        self.bits = bits


class Width(enum.Enum):
    HALF = 2
    WORD = 4


class InstClass(enum.Enum):
    ALU = "alu"
    ALU_IMM = "alu_imm"
    LOAD = "load"
    STORE = "store"
    BRANCH = "branch"
    JAL = "jal"
    JALR = "jalr"
    LUI = "lui"
    AUIPC = "auipc"
    MULDIV = "muldiv"
    AMO = "amo"
    LRSC = "lrsc"
    CSR = "csr"
    SYSTEM = "system"
    FENCE = "fence"


@dataclass(frozen=True, slots=True)
class DecodedInst:
    cls: InstClass
    funct: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    raw: int = 0
    was_compressed: bool = False

    @property
    def mnemonic(self) -> str:
        if self.cls is InstClass.AMO:
            return "amo" + self.funct + ".w"
        if self.cls is InstClass.LRSC:
            return self.funct + ".w"
        return self.funct


def parcel_length(low16: int) -> Width:
    return Width.WORD if (low16 & 3) == 3 else Width.HALF


def sext(value: int, bits: int) -> int:
    """Sign-extend ``value`` from ``bits`` and return it as an unsigned 32-bit int."""
    value &= (1 << bits) - 1
    if value >> (bits - 1):
        value -= 1 << bits
    return value & 0xFFFFFFFF


def _bits(x: int, hi: int, lo: int) -> int:
    return (x >> lo) & ((1 << (hi - lo + 1)) - 1)


# --- 32-bit encoders used by the expander ---------------------------------

def enc_r(funct7, rs2, rs1, funct3, rd, opcode):
    return (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode


def enc_i(imm, rs1, funct3, rd, opcode):
    return ((imm & 0xFFF) << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode


def enc_s(imm, rs2, rs1, funct3, opcode):
    imm &= 0xFFF
    return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | ((imm & 0x1F) << 7) | opcode


def enc_b(imm, rs2, rs1, funct3, opcode=0x63):
    imm &= 0x1FFF
    return (
        (_bits(imm, 12, 12) << 31) | (_bits(imm, 10, 5) << 25) | (rs2 << 20) | (rs1 << 15)
        | (funct3 << 12) | (_bits(imm, 4, 1) << 8) | (_bits(imm, 11, 11) << 7) | opcode
    )


def enc_u(imm, rd, opcode):
    return (imm & 0xFFFFF000) | (rd << 7) | opcode


def enc_j(imm, rd, opcode=0x6F):
    imm &= 0x1FFFFF
    return (
        (_bits(imm, 20, 20) << 31) | (_bits(imm, 10, 1) << 21) | (_bits(imm, 11, 11) << 20)
        | (_bits(imm, 19, 12) << 12) | (rd << 7) | opcode
    )


def _signed(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


# --- compressed expansion -------------------------------------------------

def _cj_offset(p):
    # offset[11|4|9:8|10|6|7|3:1|5] = inst[12|11|10:9|8|7|6|5:3|2]
    off = (
        (_bits(p, 12, 12) << 11) | (_bits(p, 11, 11) << 4) | (_bits(p, 10, 9) << 8)
        | (_bits(p, 8, 8) << 10) | (_bits(p, 7, 7) << 6) | (_bits(p, 6, 6) << 7)
        | (_bits(p, 5, 3) << 1) | (_bits(p, 2, 2) << 5)
    )
    return _signed(off, 12)


def _cb_offset(p):
    # offset[8|4:3|7:6|2:1|5] = inst[12|11:10|6:5|4:3|2]
    off = (
        (_bits(p, 12, 12) << 8) | (_bits(p, 11, 10) << 3) | (_bits(p, 6, 5) << 6)
        | (_bits(p, 4, 3) << 1) | (_bits(p, 2, 2) << 5)
    )
    return _signed(off, 9)


def _ci_imm(p):
    return _signed((_bits(p, 12, 12) << 5) | _bits(p, 6, 2), 6)


@lru_cache(maxsize=None)
def expand_compressed(parcel: int) -> int:
    """Return the 32-bit encoding equivalent to the 16-bit ``parcel``."""
    p = parcel & 0xFFFF
    quadrant = p & 3
    funct3 = p >> 13
    if quadrant == 3:
        raise ValueError(f"{parcel:#06x} is not a compressed parcel")
    rd_p = _bits(p, 4, 2) + 8
    rs1_p = _bits(p, 9, 7) + 8
    rd = _bits(p, 11, 7)
    rs2 = _bits(p, 6, 2)

    if quadrant == 0:
        if funct3 == 0:  # c.addi4spn
            nzuimm = (
                (_bits(p, 12, 11) << 4) | (_bits(p, 10, 7) << 6) | (_bits(p, 6, 6) << 2)
                | (_bits(p, 5, 5) << 3)
            )
            if nzuimm == 0:
                raise IllegalInstruction(parcel)
            return enc_i(nzuimm, 2, 0, rd_p, 0x13)
        if funct3 in (2, 6):  # c.lw / c.sw
            uimm = (_bits(p, 12, 10) << 3) | (_bits(p, 6, 6) << 2) | (_bits(p, 5, 5) << 6)
            if funct3 == 2:
                return enc_i(uimm, rs1_p, 2, rd_p, 0x03)
            return enc_s(uimm, rd_p, rs1_p, 2, 0x23)
        # c.fld/c.flw/c.fsd/c.fsw need F/D; 100 is reserved
        raise IllegalInstruction(parcel)

    if quadrant == 1:
        if funct3 == 0:  # c.addi / c.nop (hints included)
            return enc_i(_ci_imm(p), rd, 0, rd, 0x13)
        if funct3 in (1, 5):  # c.jal / c.j
            return enc_j(_cj_offset(p), 1 if funct3 == 1 else 0)
        if funct3 == 2:  # c.li
            return enc_i(_ci_imm(p), 0, 0, rd, 0x13)
        if funct3 == 3:
            if rd == 2:  # c.addi16sp
                nzimm = (
                    (_bits(p, 12, 12) << 9) | (_bits(p, 6, 6) << 4) | (_bits(p, 5, 5) << 6)
                    | (_bits(p, 4, 3) << 7) | (_bits(p, 2, 2) << 5)
                )
                if nzimm == 0:
                    raise IllegalInstruction(parcel)
                return enc_i(_signed(nzimm, 10), 2, 0, 2, 0x13)
            nzimm = _ci_imm(p)
            if nzimm == 0:
                raise IllegalInstruction(parcel)
            return enc_u(nzimm << 12, rd, 0x37)  # c.lui
        if funct3 == 4:
            funct2 = _bits(p, 11, 10)
            if funct2 in (0, 1):  # c.srli / c.srai
                if _bits(p, 12, 12):
                    raise IllegalInstruction(parcel)
                return enc_i((0x400 if funct2 else 0) | rs2, rs1_p, 5, rs1_p, 0x13)
            if funct2 == 2:  # c.andi
                return enc_i(_ci_imm(p), rs1_p, 7, rs1_p, 0x13)
            if _bits(p, 12, 12):  # c.subw/c.addw are RV64 only
                raise IllegalInstruction(parcel)
            op = _bits(p, 6, 5)
            funct7, f3 = ((0x20, 0), (0, 4), (0, 6), (0, 7))[op]
            return enc_r(funct7, rd_p, rs1_p, f3, rs1_p, 0x33)
        # c.beqz / c.bnez
        return enc_b(_cb_offset(p), 0, rs1_p, 0 if funct3 == 6 else 1)

    # quadrant 2
    if funct3 == 0:  # c.slli
        if _bits(p, 12, 12):
            raise IllegalInstruction(parcel)
        return enc_i(rs2, rd, 1, rd, 0x13)
    if funct3 == 2:  # c.lwsp
        if rd == 0:
            raise IllegalInstruction(parcel)
        uimm = (_bits(p, 12, 12) << 5) | (_bits(p, 6, 4) << 2) | (_bits(p, 3, 2) << 6)
        return enc_i(uimm, 2, 2, rd, 0x03)
    if funct3 == 4:
        if not _bits(p, 12, 12):
            if rs2 == 0:  # c.jr
                if rd == 0:
                    raise IllegalInstruction(parcel)
                return enc_i(0, rd, 0, 0, 0x67)
            return enc_r(0, rs2, 0, 0, rd, 0x33)  # c.mv
        if rs2 == 0:
            if rd == 0:
                return 0x00100073  # c.ebreak
            return enc_i(0, rd, 0, 1, 0x67)  # c.jalr
        return enc_r(0, rs2, rd, 0, rd, 0x33)  # c.add
    if funct3 == 6:  # c.swsp
        uimm = (_bits(p, 12, 9) << 2) | (_bits(p, 8, 7) << 6)
        return enc_s(uimm, rs2, 2, 2, 0x23)
    # c.fldsp/c.flwsp/c.fsdsp/c.fswsp
    raise IllegalInstruction(parcel)


# --- 32-bit decode --------------------------------------------------------

_BRANCH = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
_LOAD = {0: "lb", 1: "lh", 2: "lw", 4: "lbu", 5: "lhu"}
_STORE = {0: "sb", 1: "sh", 2: "sw"}
_OPIMM = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
_OP = {
    (0, 0): "add", (0x20, 0): "sub", (0, 1): "sll", (0, 2): "slt", (0, 3): "sltu",
    (0, 4): "xor", (0, 5): "srl", (0x20, 5): "sra", (0, 6): "or", (0, 7): "and",
}
_MULDIV = ("mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu")
_AMO = {
    0b00001: "swap", 0b00000: "add", 0b00100: "xor", 0b01100: "and", 0b01000: "or",
    0b10000: "min", 0b10100: "max", 0b11000: "minu", 0b11100: "maxu",
}
_CSR = {1: "csrrw", 2: "csrrs", 3: "csrrc", 5: "csrrwi", 6: "csrrsi", 7: "csrrci"}
_SYSTEM = {
    0x00000073: "ecall", 0x00100073: "ebreak", 0x10200073: "sret",
    0x30200073: "mret", 0x10500073: "wfi",
}


@lru_cache(maxsize=1 << 16)
def decode32(word: int) -> DecodedInst:
    w = word & 0xFFFFFFFF
    opcode = w & 0x7F
    rd = _bits(w, 11, 7)
    funct3 = _bits(w, 14, 12)
    rs1 = _bits(w, 19, 15)
    rs2 = _bits(w, 24, 20)
    funct7 = w >> 25
    imm_i = sext(w >> 20, 12)

    if opcode == 0x37:
        return DecodedInst(InstClass.LUI, "lui", rd=rd, imm=w & 0xFFFFF000, raw=w)
    if opcode == 0x17:
        return DecodedInst(InstClass.AUIPC, "auipc", rd=rd, imm=w & 0xFFFFF000, raw=w)
    if opcode == 0x6F:
        imm = (
            (_bits(w, 31, 31) << 20) | (_bits(w, 19, 12) << 12) | (_bits(w, 20, 20) << 11)
            | (_bits(w, 30, 21) << 1)
        )
        return DecodedInst(InstClass.JAL, "jal", rd=rd, imm=sext(imm, 21), raw=w)
    if opcode == 0x67 and funct3 == 0:
        return DecodedInst(InstClass.JALR, "jalr", rd=rd, rs1=rs1, imm=imm_i, raw=w)
    if opcode == 0x63 and funct3 in _BRANCH:
        imm = (
            (_bits(w, 31, 31) << 12) | (_bits(w, 7, 7) << 11) | (_bits(w, 30, 25) << 5)
            | (_bits(w, 11, 8) << 1)
        )
        return DecodedInst(InstClass.BRANCH, _BRANCH[funct3], rs1=rs1, rs2=rs2, imm=sext(imm, 13), raw=w)
    if opcode == 0x03 and funct3 in _LOAD:
        return DecodedInst(InstClass.LOAD, _LOAD[funct3], rd=rd, rs1=rs1, imm=imm_i, raw=w)
    if opcode == 0x23 and funct3 in _STORE:
        imm = sext((funct7 << 5) | rd, 12)
        return DecodedInst(InstClass.STORE, _STORE[funct3], rs1=rs1, rs2=rs2, imm=imm, raw=w)
    if opcode == 0x13:
        if funct3 == 1:
            if funct7:
                raise IllegalInstruction(w)
            return DecodedInst(InstClass.ALU_IMM, "slli", rd=rd, rs1=rs1, imm=rs2, raw=w)
        if funct3 == 5:
            if funct7 not in (0, 0x20):
                raise IllegalInstruction(w)
            return DecodedInst(InstClass.ALU_IMM, "srai" if funct7 else "srli", rd=rd, rs1=rs1, imm=rs2, raw=w)
        return DecodedInst(InstClass.ALU_IMM, _OPIMM[funct3], rd=rd, rs1=rs1, imm=imm_i, raw=w)
    if opcode == 0x33:
        if funct7 == 1:
            return DecodedInst(InstClass.MULDIV, _MULDIV[funct3], rd=rd, rs1=rs1, rs2=rs2, raw=w)
        name = _OP.get((funct7, funct3))
        if name is None:
            raise IllegalInstruction(w)
        return DecodedInst(InstClass.ALU, name, rd=rd, rs1=rs1, rs2=rs2, raw=w)
    if opcode == 0x0F and funct3 in (0, 1):
        return DecodedInst(InstClass.FENCE, "fence.i" if funct3 else "fence", raw=w)
    if opcode == 0x2F and funct3 == 2:
        funct5 = funct7 >> 2
        if funct5 == 0b00010:
            if rs2:
                raise IllegalInstruction(w)
            return DecodedInst(InstClass.LRSC, "lr", rd=rd, rs1=rs1, raw=w)
        if funct5 == 0b00011:
            return DecodedInst(InstClass.LRSC, "sc", rd=rd, rs1=rs1, rs2=rs2, raw=w)
        if funct5 in _AMO:
            return DecodedInst(InstClass.AMO, _AMO[funct5], rd=rd, rs1=rs1, rs2=rs2, raw=w)
        raise IllegalInstruction(w)
    if opcode == 0x73:
        if funct3 in _CSR:
            return DecodedInst(InstClass.CSR, _CSR[funct3], rd=rd, rs1=rs1, imm=w >> 20, raw=w)
        if funct3 == 0:
            if w in _SYSTEM:
                return DecodedInst(InstClass.SYSTEM, _SYSTEM[w], raw=w)
            if funct7 == 0x09 and rd == 0:
                return DecodedInst(InstClass.SYSTEM, "sfence.vma", rs1=rs1, rs2=rs2, raw=w)
    raise IllegalInstruction(w)


def decode_parcel(low16: int, high16: int = 0) -> DecodedInst:
    """Decode an instruction given its first parcel and (if needed) second parcel."""
    if parcel_length(low16) is Width.WORD:
        return decode32(low16 | (high16 << 16))
    d = decode32(expand_compressed(low16))
    return _compressed_view(d)


@lru_cache(maxsize=1 << 16)
def _compressed_view(d: DecodedInst) -> DecodedInst:
    return DecodedInst(d.cls, d.funct, d.rd, d.rs1, d.rs2, d.imm, d.raw, True)
