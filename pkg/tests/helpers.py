"""Small machines for unit-level comparisons (no devices, 64KB of RAM)."""
from rvsoc import arch_state as A
from rvsoc.arch_state import ArchState
from rvsoc.mem_hier import RAM_BASE, MemSystem, PhysMem
from rvsoc.mmu_sv32 import Mmu
from rvsoc.oracle_iss import Oracle
from rvsoc.timing_core import TimingCore

SMALL = 1 << 16


def off_window(v: int) -> int:
    """Move a value that would address DRAM beyond the small backing store out of DRAM."""
    if RAM_BASE + SMALL - 2048 <= v < RAM_BASE + (128 << 20) + 2048:
        return v ^ 0x10000000
    return v


def small_state(regs=None, mode=None) -> ArchState:
    s = ArchState()
    if regs is not None:
        s.x = [0] + list(regs[1:32])
    if mode is not None:
        s.mode = mode
    s.csr[A.MTVEC] = RAM_BASE + 0x100
    return s


def pair(image: bytes, regs=None, mode=None, setup=None):
    """(oracle, core) over identical private copies of ``image`` at RAM_BASE."""
    out = []
    for _ in range(2):
        phys = PhysMem(dram=bytearray(SMALL))
        phys.load(RAM_BASE, image)
        s = small_state(regs, mode)
        if setup is not None:
            setup(s, phys)
        out.append((s, phys))
    (os_, ophys), (cs, cphys) = out
    return Oracle(os_, ophys), TimingCore(cs, MemSystem(cphys), Mmu())


def step_both(oracle, core):
    """One record from each side; returns (oracle_rec, core_rec)."""
    orec = oracle.step()
    crec = None
    while crec is None:
        crec = core.run_instruction()
    return orec, crec


def same(oracle, core, lo=0, hi=SMALL) -> bool:
    return oracle.state.same_as(core.state) and oracle.mem.dram[lo:hi] == core.mem.phys.dram[lo:hi]
