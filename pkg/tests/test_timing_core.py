import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvsoc import asm
from rvsoc.asm import assemble
from rvsoc.errors import SimulationFault
from rvsoc.mem_hier import RAM_BASE
from rvsoc.timing_core import (COM, DIV_CYCLES, EX1, EX2, FIN, ID, IF, INI, LD, OF, SD, WB, CVT, CoreStep, K_ALU,
                               K_AMO, K_LOAD, K_STORE, next_step)

from conftest import machine
from helpers import off_window, pair, same, step_both

PROLOGUE = "li x5, 0x80000800\nli x6, 0x80000900\nli x2, 7\nli x3, 3\n"


def run_to(m, pc, times=1, limit=10_000):
    for _ in range(limit):
        if m.state.pc == pc:
            times -= 1
            if times == 0:
                return
        m.step()
    raise AssertionError(f"never reached {pc:#x}")


def cycles_of_next(m, n):
    out = []
    for _ in range(n):
        before = m.core.counters.cycles
        m.step()
        out.append(m.core.counters.cycles - before)
    return out


def per_instruction_cycles(body: str, warm_iters=3, **cfg):
    """Cycles charged to each instruction of ``body`` on a late trip round the loop."""
    src = PROLOGUE + "loop:\n" + body + "\nj loop\n"
    m = machine(src, **cfg)
    run_to(m, assemble(src, RAM_BASE)[1]["loop"], warm_iters)
    return cycles_of_next(m, body.count("\n") + 1)


@pytest.mark.parametrize("src,cycles", [
    ("add x1, x2, x3", 8), ("c.add x1, x2", 8), ("addi x1, x1, 1", 8), ("lui x1, 5", 8),
    ("mul x1, x2, x3", 8), ("mulhu x1, x2, x3", 8), ("csrrw x1, mscratch, x2", 8), ("fence", 8),
    ("div x1, x2, x3", 8 + DIV_CYCLES - 1), ("remu x1, x2, x3", 39),
    ("lw x1, 0(x5)", 9), ("lr.w x1, (x5)", 9), ("sw x1, 0(x6)", 10), ("sc.w x1, x2, (x5)", 10),
])
def test_cycles_per_class_cache_warm(src, cycles):
    assert per_instruction_cycles(src) == [cycles]


def test_amo_costs_eleven_on_a_warm_line():
    # the lw warms the line; the AMO's own store then invalidates it
    assert per_instruction_cycles("lw x1, 0(x6)\namoadd.w x1, x2, (x6)") == [9 + 16, 11]


def test_load_after_store_to_same_line_misses():
    # the previous trip's last load refilled the line, so only the load after the store misses
    assert per_instruction_cycles("lw x1, 0(x5)\nsw x1, 4(x5)\nlw x1, 8(x5)") == [9, 10, 9 + 16]


@pytest.mark.parametrize("penalty", [0, 5, 40])
def test_miss_penalty_is_configurable(penalty):
    got = per_instruction_cycles("lw x1, 0(x5)\nsw x1, 4(x5)", miss_penalty=penalty)
    assert got == [9 + penalty, 10]


def test_cold_fetch_pays_the_miss():
    m = machine("nop\nnop\nnop\nnop\nnop")
    assert cycles_of_next(m, 5) == [8 + 16, 8, 8, 8, 8 + 16]  # 16-byte lines


@pytest.mark.parametrize("kind,path", [
    (K_ALU, [IF, CVT, ID, OF, EX1, WB, COM, FIN, INI]),
    (K_LOAD, [IF, CVT, ID, OF, EX1, LD, WB, COM, FIN, INI]),
    (K_STORE, [IF, CVT, ID, OF, EX1, LD, SD, WB, COM, FIN, INI]),
    (K_AMO, [IF, CVT, ID, OF, EX1, LD, EX2, SD, WB, COM, FIN, INI]),
])
def test_step_paths(kind, path):
    step, seen = INI, []
    for _ in path:
        step = next_step(step, kind, False, False)
        seen.append(step)
    assert seen == path


@given(st.sampled_from(list(CoreStep)), st.integers(0, 21))
def test_stall_holds_and_traps_go_to_commit(step, kind):
    assert next_step(step, kind, False, True) == step
    if step not in (COM, FIN):
        assert next_step(step, kind, True, False) == COM
        assert next_step(step, kind, True, True) == COM


def test_visits_counted_per_step():
    src = PROLOGUE + "body: lw x1, 0(x5)\nsw x1, 0(x6)\nadd x1, x1, x1"
    m = machine(src)
    run_to(m, assemble(src, RAM_BASE)[1]["body"])
    v0 = list(m.core.counters.visits)
    m.run(3)
    v = [a - b for a, b in zip(m.core.counters.visits, v0)]
    assert v[IF] == v[CVT] == v[ID] == v[OF] == v[EX1] == v[WB] == v[COM] == v[FIN] == 3
    assert v[LD] == 2 and v[SD] == 1 and v[EX2] == 0


def test_divider_holds_ex1():
    m = machine("div x1, x2, x3")
    m.run(1)
    assert m.core.counters.visits[EX1] == DIV_CYCLES


def test_tlb_miss_costs_more_than_hit():
    src = """
        la   t0, root
        srli t0, t0, 12
        li   t1, 0x80000000
        or   t0, t0, t1
        csrw satp, t0
        li   t0, 0x800
        csrs mstatus, t0
        la   t0, smode
        csrw mepc, t0
        mret
    smode:
        lw   x1, 0x100(x0)
        lw   x1, 0x104(x0)
    spin: j spin
        .align 12
    root:
        .word (0x80000 << 10) | 0xCF
        .space 0x800 - 4
        .word (0x80000 << 10) | 0xCF
        .space 0x800 - 4
    """
    m = machine(src)
    run_to(m, 0x80000000 + assemble(src, 0)[1]["smode"])
    costs = cycles_of_next(m, 2)
    assert m.core.mmu.walks[1] == 1
    # walk: read (miss) + latch + judge + A/D state, against a 1-cycle TLB hit
    assert costs[0] > costs[1] >= 9


def _word(draw_op, rd, rs1, rs2, imm):
    kind, op = draw_op
    if kind == "r":
        return asm.r_type(op, rd, rs1, rs2)
    if kind == "i":
        return asm.i_type(op, rd, rs1, imm)
    if kind == "load":
        return asm.load(op, rd, rs1, imm)
    if kind == "store":
        return asm.store(op, rs2, rs1, imm)
    if kind == "branch":
        return asm.br(op, rs1, rs2, imm & ~1)
    if kind == "amo":
        return asm.amo(op, rd, rs2, rs1)
    if kind == "lr":
        return asm.lr(rd, rs1)
    if kind == "sc":
        return asm.sc(rd, rs2, rs1)
    if kind == "csr":
        return asm.csr(op, rd, imm & 0xFFF, rs1)
    return asm.FIXED[op]


OPS = st.one_of(
    st.tuples(st.just("r"), st.sampled_from(sorted(asm.R_OPS))),
    st.tuples(st.just("i"), st.sampled_from(sorted(set(asm.I_OPS) - set(asm.SHIFT_OPS)))),
    st.tuples(st.sampled_from(["load"]), st.sampled_from(sorted(asm.LOADS))),
    st.tuples(st.just("store"), st.sampled_from(sorted(asm.STORES))),
    st.tuples(st.just("branch"), st.sampled_from(sorted(asm.BRANCHES))),
    st.tuples(st.just("amo"), st.sampled_from(sorted(asm.AMOS))),
    st.tuples(st.sampled_from(["lr", "sc"]), st.none()),
    st.tuples(st.just("csr"), st.sampled_from(sorted(asm.CSR_OPS))),
    st.tuples(st.just("fixed"), st.sampled_from(sorted(asm.FIXED))),
)
REG = st.integers(0, 31)


@given(OPS, REG, REG, REG, st.integers(-2048, 2047), st.integers(0, 0xFF), st.sampled_from([0, 1, 3]))
def test_single_instruction_matches_interpreter(op, rd, rs1, rs2, imm, seed, mode):
    regs = [0] + [(RAM_BASE + 0x2000 + ((seed * 37 + i * 0x40) & 0x1FFF)) if i % 3 == 0
                  else off_window((seed * 0x9E3779B1 * i) & 0xFFFFFFFF) for i in range(1, 32)]
    o, c = pair(_word(op, rd, rs1, rs2, imm).to_bytes(4, "little"), regs, mode)
    for _ in range(2):
        try:
            orec, crec = step_both(o, c)
        except SimulationFault:  # control left RAM: the core must agree
            with pytest.raises(SimulationFault):
                c.run_instruction()
            return
        assert orec == crec
        assert same(o, c)
