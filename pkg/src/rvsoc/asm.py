"""Small RV32IMAC assembler for firmware, demo programs and crafted tests.

Two passes over GNU-style source: labels, ``.equ``, ``.word/.half/.byte``,
``.ascii/.asciz``, ``.align``, ``.space``, ``.org`` and the common pseudo
instructions.  Compressed instructions are only emitted when written with an
explicit ``c.`` mnemonic, so layouts never depend on relaxation.
"""
from __future__ import annotations

import ast
import operator
import re

from .arch_state import CSR_NAMES
from .isa_decode import enc_b, enc_i, enc_j, enc_r, enc_s, enc_u

ABI = ["zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1"] + [f"a{i}" for i in range(8)] \
    + [f"s{i}" for i in range(2, 12)] + ["t3", "t4", "t5", "t6"]
REGS = {f"x{i}": i for i in range(32)} | {n: i for i, n in enumerate(ABI)} | {"fp": 8}
CSRS = {name: addr for addr, name in CSR_NAMES.items()}


class AsmError(Exception):
    def __init__(self, msg, line_no=None, line=""):
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{where}{msg}" + (f"  [{line.strip()}]" if line else ""))


def _fits(v, bits):
    return -(1 << (bits - 1)) <= v < (1 << (bits - 1))


class RangeError(AsmError):
    """Operand does not fit its field; may be transient while labels settle."""


def _imm(v, bits, align=1):
    if not _fits(v, bits) or v % align:
        raise RangeError(f"immediate {v} out of range for a {bits}-bit field")
    return v


def _reg(name):
    try:
        return REGS[name.strip()]
    except KeyError:
        raise AsmError(f"unknown register {name!r}") from None


def _creg(name):
    r = _reg(name)
    if not 8 <= r <= 15:
        raise AsmError(f"register {name!r} not encodable in compressed form")
    return r - 8


def _b(v, hi, lo):
    return (v >> lo) & ((1 << (hi - lo + 1)) - 1)


# -- 32-bit encoders -----------------------------------------------------
R_OPS = {
    "add": (0, 0, 0x33), "sub": (0x20, 0, 0x33), "sll": (0, 1, 0x33), "slt": (0, 2, 0x33),
    "sltu": (0, 3, 0x33), "xor": (0, 4, 0x33), "srl": (0, 5, 0x33), "sra": (0x20, 5, 0x33),
    "or": (0, 6, 0x33), "and": (0, 7, 0x33),
    "mul": (1, 0, 0x33), "mulh": (1, 1, 0x33), "mulhsu": (1, 2, 0x33), "mulhu": (1, 3, 0x33),
    "div": (1, 4, 0x33), "divu": (1, 5, 0x33), "rem": (1, 6, 0x33), "remu": (1, 7, 0x33),
}
I_OPS = {"addi": 0, "slti": 2, "sltiu": 3, "xori": 4, "ori": 6, "andi": 7}
SHIFT_OPS = {"slli": (0, 1), "srli": (0, 5), "srai": (0x20, 5)}
LOADS = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
STORES = {"sb": 0, "sh": 1, "sw": 2}
BRANCHES = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}
AMOS = {"amoswap.w": 1, "amoadd.w": 0, "amoxor.w": 4, "amoand.w": 0xC, "amoor.w": 8,
        "amomin.w": 0x10, "amomax.w": 0x14, "amominu.w": 0x18, "amomaxu.w": 0x1C}
CSR_OPS = {"csrrw": 1, "csrrs": 2, "csrrc": 3, "csrrwi": 5, "csrrsi": 6, "csrrci": 7}
FIXED = {"ecall": 0x00000073, "ebreak": 0x00100073, "mret": 0x30200073, "sret": 0x10200073,
         "wfi": 0x10500073, "fence": 0x0FF0000F, "fence.i": 0x0000100F}


def r_type(op, rd, rs1, rs2):
    f7, f3, opc = R_OPS[op]
    return enc_r(f7, rs2, rs1, f3, rd, opc)


def i_type(op, rd, rs1, imm):
    if op in SHIFT_OPS:
        f7, f3 = SHIFT_OPS[op]
        if not 0 <= imm < 32:
            raise RangeError(f"shift amount {imm} out of range")
        return enc_i((f7 << 5) | imm, rs1, f3, rd, 0x13)
    return enc_i(_imm(imm, 12), rs1, I_OPS[op], rd, 0x13)


def load(op, rd, rs1, imm):
    return enc_i(_imm(imm, 12), rs1, LOADS[op], rd, 0x03)


def store(op, rs2, rs1, imm):
    return enc_s(_imm(imm, 12), rs2, rs1, STORES[op], 0x23)


def br(op, rs1, rs2, off):
    return enc_b(_imm(off, 13, 2), rs2, rs1, BRANCHES[op])


def jal(rd, off):
    return enc_j(_imm(off, 21, 2), rd)


def jalr(rd, rs1, imm):
    return enc_i(_imm(imm, 12), rs1, 0, rd, 0x67)


def lui(rd, imm20):
    return enc_u(imm20 << 12, rd, 0x37)


def auipc(rd, imm20):
    return enc_u(imm20 << 12, rd, 0x17)


def amo(op, rd, rs2, rs1, aq=0, rl=0):
    return enc_r((AMOS[op] << 2) | (aq << 1) | rl, rs2, rs1, 2, rd, 0x2F)


def lr(rd, rs1, aq=0, rl=0):
    return enc_r((0x02 << 2) | (aq << 1) | rl, 0, rs1, 2, rd, 0x2F)


def sc(rd, rs2, rs1, aq=0, rl=0):
    return enc_r((0x03 << 2) | (aq << 1) | rl, rs2, rs1, 2, rd, 0x2F)


def csr(op, rd, addr, rs1_or_uimm):
    return (addr << 20) | (rs1_or_uimm << 15) | (CSR_OPS[op] << 12) | (rd << 7) | 0x73


def sfence_vma(rs1=0, rs2=0):
    return enc_r(0x09, rs2, rs1, 0, 0, 0x73)


def hi_lo(value):
    """Split a 32-bit constant into (lui imm20, addi imm12)."""
    value &= 0xFFFFFFFF
    lo = value & 0xFFF
    if lo & 0x800:
        lo -= 0x1000
    return ((value - lo) >> 12) & 0xFFFFF, lo


def li(rd, value):
    """Encodings for ``li`` (one word when the value fits 12 bits)."""
    v = value & 0xFFFFFFFF
    sv = v - (1 << 32) if v & 0x80000000 else v
    if _fits(sv, 12):
        return [i_type("addi", rd, 0, sv)]
    hi, lo = hi_lo(v)
    return [lui(rd, hi)] + ([i_type("addi", rd, rd, lo)] if lo else [])


# -- compressed encoders -------------------------------------------------
def c_addi4spn(rd, imm):
    return (_b(imm, 5, 4) << 11 | _b(imm, 9, 6) << 7 | _b(imm, 2, 2) << 6 | _b(imm, 3, 3) << 5
            | (rd - 8) << 2)


def c_lw(rd, rs1, imm):
    return 0x4000 | _b(imm, 5, 3) << 10 | (rs1 - 8) << 7 | _b(imm, 2, 2) << 6 | _b(imm, 6, 6) << 5 | (rd - 8) << 2


def c_sw(rs2, rs1, imm):
    return 0xC000 | _b(imm, 5, 3) << 10 | (rs1 - 8) << 7 | _b(imm, 2, 2) << 6 | _b(imm, 6, 6) << 5 | (rs2 - 8) << 2


def _ci(f3, rd, imm, op=1):
    return f3 << 13 | _b(imm, 5, 5) << 12 | rd << 7 | _b(imm, 4, 0) << 2 | op


def c_nop():
    return 0x0001


def c_addi(rd, imm):
    return _ci(0, rd, imm)


def c_li(rd, imm):
    return _ci(2, rd, imm)


def c_lui(rd, imm6):
    return _ci(3, rd, imm6)


def c_addi16sp(imm):
    return (0x6000 | _b(imm, 9, 9) << 12 | 2 << 7 | _b(imm, 4, 4) << 6 | _b(imm, 6, 6) << 5
            | _b(imm, 8, 7) << 3 | _b(imm, 5, 5) << 2 | 1)


def _cb_alu(f2, rd, imm):
    return 0x8000 | _b(imm, 5, 5) << 12 | f2 << 10 | (rd - 8) << 7 | _b(imm, 4, 0) << 2 | 1


def c_srli(rd, sh):
    return _cb_alu(0, rd, sh)


def c_srai(rd, sh):
    return _cb_alu(1, rd, sh)


def c_andi(rd, imm):
    return _cb_alu(2, rd, imm)


def _ca(f2, rd, rs2):
    return 0x8C01 | (rd - 8) << 7 | f2 << 5 | (rs2 - 8) << 2


def c_sub(rd, rs2):
    return _ca(0, rd, rs2)


def c_xor(rd, rs2):
    return _ca(1, rd, rs2)


def c_or(rd, rs2):
    return _ca(2, rd, rs2)


def c_and(rd, rs2):
    return _ca(3, rd, rs2)


def _cj(f3, off):
    return (f3 << 13 | _b(off, 11, 11) << 12 | _b(off, 4, 4) << 11 | _b(off, 9, 8) << 9
            | _b(off, 10, 10) << 8 | _b(off, 6, 6) << 7 | _b(off, 7, 7) << 6 | _b(off, 3, 1) << 3
            | _b(off, 5, 5) << 2 | 1)


def c_jal(off):
    return _cj(1, off)


def c_j(off):
    return _cj(5, off)


def _cbr(f3, rs1, off):
    return (f3 << 13 | _b(off, 8, 8) << 12 | _b(off, 4, 3) << 10 | (rs1 - 8) << 7
            | _b(off, 7, 6) << 5 | _b(off, 2, 1) << 3 | _b(off, 5, 5) << 2 | 1)


def c_beqz(rs1, off):
    return _cbr(6, rs1, off)


def c_bnez(rs1, off):
    return _cbr(7, rs1, off)


def c_slli(rd, sh):
    return _ci(0, rd, sh, op=2)


def c_lwsp(rd, imm):
    return 0x4002 | _b(imm, 5, 5) << 12 | rd << 7 | _b(imm, 4, 2) << 4 | _b(imm, 7, 6) << 2


def c_swsp(rs2, imm):
    return 0xC002 | _b(imm, 5, 2) << 9 | _b(imm, 7, 6) << 7 | rs2 << 2


def c_jr(rs1):
    return 0x8002 | rs1 << 7


def c_mv(rd, rs2):
    return 0x8002 | rd << 7 | rs2 << 2


def c_ebreak():
    return 0x9002


def c_jalr(rs1):
    return 0x9002 | rs1 << 7


def c_add(rd, rs2):
    return 0x9002 | rd << 7 | rs2 << 2


# -- expression evaluation -----------------------------------------------
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.FloorDiv: operator.floordiv, ast.Div: operator.floordiv, ast.Mod: operator.mod,
           ast.LShift: operator.lshift, ast.RShift: operator.rshift, ast.BitOr: operator.or_,
           ast.BitAnd: operator.and_, ast.BitXor: operator.xor}


def _hi(v):
    return hi_lo(v)[0]


def _lo(v):
    return hi_lo(v)[1]


_TOKEN = re.compile(r"'(?:\\.|[^'])'|0[xXbB][0-9a-fA-F_]+|\d+|%(hi|lo)\(|[A-Za-z_.$][\w.$]*")


def evaluate(expr: str, symbols: dict, pc: int = 0) -> int:
    """Integer expression over symbols; ``.`` is the current location.

    Raises ``KeyError`` for an undefined symbol so pass one can defer it.
    """
    env = {}

    def rename(m):
        tok = m.group(0)
        if m.group(1):
            return f"_{m.group(1)}("
        if tok[0].isdigit() or tok[0] == "'":
            return tok
        key = f"_v{len(env)}"
        env[key] = tok
        return key

    text = _TOKEN.sub(rename, expr.strip())

    def ev(n):
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant):
            if isinstance(n.value, int):
                return n.value
            if isinstance(n.value, str) and len(n.value) == 1:
                return ord(n.value)
        if isinstance(n, ast.Name) and n.id in env:
            name = env[n.id]
            if name == ".":
                return pc
            return symbols[name]
        if isinstance(n, ast.UnaryOp):
            v = ev(n.operand)
            if isinstance(n.op, ast.USub):
                return -v
            if isinstance(n.op, ast.Invert):
                return ~v
            if isinstance(n.op, ast.UAdd):
                return v
        if isinstance(n, ast.BinOp) and type(n.op) in _BINOPS:
            return _BINOPS[type(n.op)](ev(n.left), ev(n.right))
        if isinstance(n, ast.Call) and isinstance(n.func, ast.Name) and n.func.id in ("_hi", "_lo") \
                and len(n.args) == 1:
            return (_hi if n.func.id == "_hi" else _lo)(ev(n.args[0]))
        raise AsmError(f"bad expression {expr!r}")

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise AsmError(f"bad expression {expr!r}") from None
    return ev(tree)


# -- text assembler ------------------------------------------------------
_MEMREF = re.compile(r"^(.*)\((\w+)\)$")


def _split_operands(s):
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _strip_comment(line):
    out, quoted = "", False
    for i, ch in enumerate(line):
        if ch == '"' and (i == 0 or line[i - 1] != "\\"):
            quoted = not quoted
        if not quoted and (ch == "#" or (ch == "/" and line[i:i + 2] == "//")):
            break
        out += ch
    return out


class Assembler:
    def __init__(self, base: int = 0, symbols: dict | None = None):
        self.base = base
        self.predefined = dict(symbols or {})

    def assemble(self, source: str) -> tuple[bytes, dict]:
        """Assemble ``source``; returns (image bytes starting at ``base``, symbol table)."""
        lines = [(i + 1, raw) for i, raw in enumerate(source.splitlines())]
        symbols = dict(self.predefined)
        # sizing passes until every label settles (forward references make
        # pass one guess the length of li/la)
        for _ in range(16):
            before = dict(symbols)
            self._pass(lines, symbols, final=False)
            if symbols == before:
                break
        else:
            raise AsmError("label addresses do not converge")
        image = self._pass(lines, symbols, final=True)
        return bytes(image), symbols

    def _pass(self, lines, symbols, final):
        image = bytearray()
        self.pc = self.base
        seen = set()
        for no, raw in lines:
            text = _strip_comment(raw).strip()
            while True:
                m = re.match(r"^([A-Za-z_.$][\w.$]*|\d+):\s*(.*)$", text)
                if not m:
                    break
                label = m.group(1)
                if label in seen:
                    raise AsmError(f"duplicate label {label}", no, raw)
                seen.add(label)
                if final and symbols.get(label) != self.pc:
                    raise AsmError(f"label {label} moved between passes", no, raw)
                symbols[label] = self.pc
                text = m.group(2)
            if not text:
                continue
            parts = text.split(None, 1)
            mnem = parts[0].lower()
            ops = _split_operands(parts[1]) if len(parts) > 1 else []
            try:
                chunk = self._emit(mnem, ops, symbols, final, parts[1] if len(parts) > 1 else "")
            except RangeError as e:
                if final:
                    raise AsmError(str(e), no, raw) from None
                chunk = None
            except AsmError as e:
                raise AsmError(str(e), no, raw) from None
            except KeyError as e:
                if final:
                    raise AsmError(f"undefined symbol {e.args[0]}", no, raw) from None
                chunk = None
            if chunk is None:
                chunk = bytes(self._size_guess(mnem, ops, symbols))
            image += chunk
            self.pc += len(chunk)
        return image

    # sizes used in pass one when an operand is a forward reference
    def _size_guess(self, mnem, ops, symbols):
        if mnem.startswith("c."):
            return 2
        if mnem in ("li",):
            return 8
        if mnem in ("la", "call", "tail"):
            return 8
        return 4

    def _ev(self, e, symbols, final):
        try:
            return evaluate(e, symbols, self.pc)
        except KeyError:
            if final:
                raise
            return 0

    def _emit(self, mnem, ops, symbols, final, rest):
        ev = lambda e: evaluate(e, symbols, self.pc)  # noqa: E731
        w32 = lambda *ws: b"".join((w & 0xFFFFFFFF).to_bytes(4, "little") for w in ws)  # noqa: E731
        h16 = lambda *hs: b"".join((h & 0xFFFF).to_bytes(2, "little") for h in hs)  # noqa: E731
        rel = lambda e: ev(e) - self.pc  # noqa: E731
        # directives
        if mnem == ".equ" or mnem == ".set":
            symbols[ops[0]] = ev(ops[1])
            return b""
        if mnem in (".word", ".4byte"):
            return b"".join((self._ev(o, symbols, final) & 0xFFFFFFFF).to_bytes(4, "little") for o in ops)
        if mnem in (".half", ".2byte"):
            return b"".join((self._ev(o, symbols, final) & 0xFFFF).to_bytes(2, "little") for o in ops)
        if mnem == ".byte":
            return bytes(self._ev(o, symbols, final) & 0xFF for o in ops)
        if mnem in (".ascii", ".asciz", ".string"):
            s = ast.literal_eval(rest.strip()).encode("latin-1")
            return s + (b"\0" if mnem != ".ascii" else b"")
        if mnem == ".align" or mnem == ".p2align":
            n = 1 << ev(ops[0])
            return bytes((-self.pc) % n)
        if mnem == ".balign":
            n = ev(ops[0])
            return bytes((-self.pc) % n)
        if mnem in (".space", ".zero", ".skip"):
            return bytes(ev(ops[0]))
        if mnem == ".org":
            target = ev(ops[0])
            if target < self.pc:
                raise AsmError(".org moves backwards")
            return bytes(target - self.pc)
        if mnem in (".text", ".data", ".section", ".globl", ".global", ".option", ".type", ".size"):
            return b""
        if mnem == "fence" and ops:
            bits = lambda o: sum({"i": 8, "o": 4, "r": 2, "w": 1}[ch] for ch in o.lower())  # noqa: E731
            return w32(0x0000000F | bits(ops[0]) << 24 | bits(ops[1]) << 20)
        if mnem in FIXED:
            return w32(FIXED[mnem])
        if mnem in R_OPS:
            return w32(r_type(mnem, _reg(ops[0]), _reg(ops[1]), _reg(ops[2])))
        if mnem in I_OPS or mnem in SHIFT_OPS:
            return w32(i_type(mnem, _reg(ops[0]), _reg(ops[1]), ev(ops[2])))
        if mnem in LOADS or mnem in STORES:
            m = _MEMREF.match(ops[1])
            off, base = (m.group(1) or "0", m.group(2)) if m else ("0", ops[1])
            if mnem in LOADS:
                return w32(load(mnem, _reg(ops[0]), _reg(base), ev(off)))
            return w32(store(mnem, _reg(ops[0]), _reg(base), ev(off)))
        if mnem in BRANCHES:
            return w32(br(mnem, _reg(ops[0]), _reg(ops[1]), rel(ops[2])))
        swapped = {"bgt": "blt", "ble": "bge", "bgtu": "bltu", "bleu": "bgeu"}
        if mnem in swapped:
            return w32(br(swapped[mnem], _reg(ops[1]), _reg(ops[0]), rel(ops[2])))
        zb = {"beqz": "beq", "bnez": "bne", "bltz": "blt", "bgez": "bge"}
        if mnem in zb:
            return w32(br(zb[mnem], _reg(ops[0]), 0, rel(ops[1])))
        if mnem == "blez":
            return w32(br("bge", 0, _reg(ops[0]), rel(ops[1])))
        if mnem == "bgtz":
            return w32(br("blt", 0, _reg(ops[0]), rel(ops[1])))
        if mnem == "jal":
            if len(ops) == 1:
                return w32(jal(1, rel(ops[0])))
            return w32(jal(_reg(ops[0]), rel(ops[1])))
        if mnem == "j":
            return w32(jal(0, rel(ops[0])))
        if mnem == "jalr":
            if len(ops) == 1:
                return w32(jalr(1, _reg(ops[0]), 0))
            if len(ops) == 2:
                m = _MEMREF.match(ops[1])
                return w32(jalr(_reg(ops[0]), _reg(m.group(2)), ev(m.group(1) or "0")))
            return w32(jalr(_reg(ops[0]), _reg(ops[1]), ev(ops[2])))
        if mnem == "jr":
            return w32(jalr(0, _reg(ops[0]), 0))
        if mnem == "ret":
            return w32(jalr(0, 1, 0))
        if mnem in ("call", "tail"):
            off = rel(ops[0])
            hi, lo = hi_lo(off)
            rd = 1 if mnem == "call" else 6
            return w32(auipc(rd, hi), jalr(1 if mnem == "call" else 0, rd, lo))
        if mnem == "lui":
            return w32(lui(_reg(ops[0]), ev(ops[1]) & 0xFFFFF))
        if mnem == "auipc":
            return w32(auipc(_reg(ops[0]), ev(ops[1]) & 0xFFFFF))
        if mnem == "li":
            rd = _reg(ops[0])
            try:
                value = evaluate(ops[1], symbols, self.pc)
            except KeyError:
                if final:
                    raise
                return None
            return w32(*li(rd, value))
        if mnem == "la":
            off = rel(ops[1])
            hi, lo = hi_lo(off)
            rd = _reg(ops[0])
            return w32(auipc(rd, hi), i_type("addi", rd, rd, lo))
        if mnem == "mv":
            return w32(i_type("addi", _reg(ops[0]), _reg(ops[1]), 0))
        if mnem == "nop":
            return w32(i_type("addi", 0, 0, 0))
        if mnem == "not":
            return w32(i_type("xori", _reg(ops[0]), _reg(ops[1]), -1))
        if mnem == "neg":
            return w32(r_type("sub", _reg(ops[0]), 0, _reg(ops[1])))
        if mnem == "seqz":
            return w32(i_type("sltiu", _reg(ops[0]), _reg(ops[1]), 1))
        if mnem == "snez":
            return w32(r_type("sltu", _reg(ops[0]), 0, _reg(ops[1])))
        if mnem in AMOS or mnem.split(".aq")[0].split(".rl")[0] in AMOS:
            base = re.sub(r"\.(aqrl|aq|rl)$", "", mnem)
            aq, rl = int(".aq" in mnem[len(base):]), int("rl" in mnem[len(base):])
            m = _MEMREF.match(ops[2])
            return w32(amo(base, _reg(ops[0]), _reg(ops[1]), _reg(m.group(2) if m else ops[2]), aq, rl))
        if mnem.startswith(("lr.w", "sc.w")):
            order = mnem[4:]
            aq, rl = int(".aq" in order), int("rl" in order)
            m = _MEMREF.match(ops[-1])
            base = _reg(m.group(2) if m else ops[-1])
            if mnem.startswith("lr.w"):
                return w32(lr(_reg(ops[0]), base, aq, rl))
            return w32(sc(_reg(ops[0]), _reg(ops[1]), base, aq, rl))
        if mnem in CSR_OPS:
            addr = self._csr(ops[1], symbols)
            src = ev(ops[2]) if mnem.endswith("i") else _reg(ops[2])
            return w32(csr(mnem, _reg(ops[0]), addr, src))
        csr_pseudo = {"csrr": ("csrrs", True), "csrw": ("csrrw", False), "csrs": ("csrrs", False),
                      "csrc": ("csrrc", False), "csrwi": ("csrrwi", False), "csrsi": ("csrrsi", False),
                      "csrci": ("csrrci", False)}
        if mnem in csr_pseudo:
            op, is_read = csr_pseudo[mnem]
            if is_read:
                return w32(csr(op, _reg(ops[0]), self._csr(ops[1], symbols), 0))
            src = ev(ops[1]) if op.endswith("i") else _reg(ops[1])
            return w32(csr(op, 0, self._csr(ops[0], symbols), src))
        if mnem == "sfence.vma":
            return w32(sfence_vma(*(_reg(o) for o in ops)))
        if mnem.startswith("c."):
            return h16(self._compressed(mnem[2:], ops, ev, rel))
        raise AsmError(f"unknown mnemonic {mnem!r}")

    def _csr(self, name, symbols):
        name = name.strip()
        if name in CSRS:
            return CSRS[name]
        return evaluate(name, symbols, self.pc)

    def _compressed(self, m, ops, ev, rel):
        r = _reg
        if m == "nop":
            return c_nop()
        if m == "ebreak":
            return c_ebreak()
        if m in ("lw", "sw", "lwsp", "swsp"):
            mm = _MEMREF.match(ops[1])
            off, base = ev(mm.group(1) or "0"), r(mm.group(2))
            if m == "lw":
                _creg(ops[0]), _creg(mm.group(2))
                return c_lw(r(ops[0]), base, off)
            if m == "sw":
                _creg(ops[0]), _creg(mm.group(2))
                return c_sw(r(ops[0]), base, off)
            return c_lwsp(r(ops[0]), off) if m == "lwsp" else c_swsp(r(ops[0]), off)
        one_imm = {"addi": c_addi, "li": c_li, "lui": c_lui, "slli": c_slli}
        if m in one_imm:
            return one_imm[m](r(ops[0]), ev(ops[1]))
        creg_imm = {"srli": c_srli, "srai": c_srai, "andi": c_andi}
        if m in creg_imm:
            _creg(ops[0])
            return creg_imm[m](r(ops[0]), ev(ops[1]))
        ca = {"sub": c_sub, "xor": c_xor, "or": c_or, "and": c_and}
        if m in ca:
            _creg(ops[0]), _creg(ops[1])
            return ca[m](r(ops[0]), r(ops[1]))
        if m == "addi4spn":
            _creg(ops[0])
            return c_addi4spn(r(ops[0]), ev(ops[-1]))
        if m == "addi16sp":
            return c_addi16sp(ev(ops[-1]))
        if m == "j":
            return c_j(rel(ops[0]))
        if m == "jal":
            return c_jal(rel(ops[0]))
        if m in ("beqz", "bnez"):
            _creg(ops[0])
            return (c_beqz if m == "beqz" else c_bnez)(r(ops[0]), rel(ops[1]))
        if m == "jr":
            return c_jr(r(ops[0]))
        if m == "jalr":
            return c_jalr(r(ops[0]))
        if m == "mv":
            return c_mv(r(ops[0]), r(ops[1]))
        if m == "add":
            return c_add(r(ops[0]), r(ops[1]))
        raise AsmError(f"unknown compressed mnemonic c.{m}")


def assemble(source: str, base: int = 0, symbols: dict | None = None) -> tuple[bytes, dict]:
    return Assembler(base, symbols).assemble(source)
