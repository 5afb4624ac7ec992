import io
import struct
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import HALT, build, machine
from rvsoc import fuzz
from rvsoc.arch_state import ArchState
from rvsoc.errors import CheckpointError, Divergence, ImageError, SimulationFault
from rvsoc.harness import (MAGIC, Config, Machine, format_record, save_checkpoint, restore_checkpoint,
                           stats_report)
from rvsoc.io_devices import Console, DeviceBus, DiskController, Timer
from rvsoc.mem_hier import DISK_BASE, RAM_BASE, RAM_SIZE, PhysMem
from rvsoc.oracle_iss import Oracle

FIX = Path(__file__).parent / "fixtures"


def _fuzz_machine(seed, **cfg):
    m = Machine(Config(**cfg))
    m.load_image(fuzz.generate(seed, body_len=300).image)
    return m


def _traced(m, n):
    m.trace_lines = []
    m.run(n)
    return m.trace_lines


# -- trace format ----------------------------------------------------------
def test_golden_trace():
    m = machine((FIX / "golden.S").read_text())
    lines = _traced(m, 100)
    assert m.console.poweroff == 0xB
    assert "\n".join(lines) + "\n" == (FIX / "golden_trace.txt").read_text()


def test_oracle_emits_the_same_trace():
    image = build((FIX / "golden.S").read_text())
    phys = PhysMem(DeviceBus(Timer(lambda: 0), Console(), DiskController()))
    phys.load(RAM_BASE, image)
    o = Oracle(ArchState(RAM_BASE), phys)
    lines = [format_record(i, o.step()) for i in range(13)]
    assert "\n".join(lines) + "\n" == (FIX / "golden_trace.txt").read_text()


def test_trace_file_written(tmp_path):
    m = machine((FIX / "golden.S").read_text(), trace=str(tmp_path / "t.txt"))
    m.run(100)
    assert (tmp_path / "t.txt").read_text() == (FIX / "golden_trace.txt").read_text()


def test_trace_to_stream():
    m = machine((FIX / "golden.S").read_text())
    buf = io.StringIO()
    m.run(100, trace=buf)
    assert buf.getvalue() == (FIX / "golden_trace.txt").read_text()


# -- stats -----------------------------------------------------------------
@pytest.mark.parametrize("retired, cycles, cpi", [
    (66_067_456, 1_213_305_856, "18.4"),
    (66_760_704, 1_233_961_984, "18.5"),
])
def test_stats_cpi_rendering(retired, cycles, cpi):
    r = stats_report(retired, cycles)
    assert f"CPI            {cpi}" in r.render()


@pytest.mark.parametrize("acc, hits, rate, mpki", [
    (86_738_837, 82_231_973, "94.8%", "73.88"),
    (77_055_765, 71_725_363, "93.1%", "87.38"),
])
def test_stats_cache_rendering(acc, hits, rate, mpki):
    text = stats_report(61_000_000, 1, acc, hits).render()
    assert f"hit rate       {rate}" in text
    assert f"MPKI           {mpki}" in text


def test_stats_empty_run():
    r = stats_report(0, 0)
    assert r.cpi is None and "n/a" in r.render()
    assert '"retired": 0' in r.to_json()


def test_stats_no_cache_identical_trace_larger_cpi():
    src = "li t0, 50\nloop: addi t0, t0, -1\nadd a0, a0, t0\nsw a0, 0(sp)\nbnez t0, loop\n" + HALT
    a = machine(src)
    b = machine(src, cache=False)
    a.state.x[2] = b.state.x[2] = RAM_BASE + 0x1000
    assert _traced(a, 180) == _traced(b, 180)
    assert b.stats().cpi > a.stats().cpi
    assert b.stats().cache_accesses == 0


def test_warm_alu_program_cpi():
    body = "\n".join(f"addi a{i % 6}, a{i % 6}, {i}" for i in range(10))
    m = machine(f"li t0, 2\nloop:\n{body}\naddi t0, t0, -1\nbnez t0, loop\n" + HALT)
    m.run(14)  # li + first pass
    c0, r0 = m.core.counters.cycles, m.state.retired
    m.run(10)
    assert m.state.retired - r0 == 10
    assert (m.core.counters.cycles - c0) / 10 == 8.0


# -- images ----------------------------------------------------------------
def test_load_raw_image(tmp_path):
    f = tmp_path / "img.bin"
    f.write_bytes(bytes(range(1, 17)))
    m = Machine(Config(ram=str(f)))
    assert m.phys.dram[:17] == bytes(range(1, 17)) + b"\0"
    m.load_image(str(f), "disk", 32)
    assert m.phys.read(DISK_BASE + 32, 1) == 1


def test_image_errors(tmp_path):
    m = Machine()
    with pytest.raises(ImageError):
        m.load_image(bytes(RAM_SIZE + 1))
    with pytest.raises(ImageError):
        m.load_image(b"abcd", "disk", RAM_SIZE - 2)
    with pytest.raises(ImageError):
        m.load_image(str(tmp_path / "missing.bin"))
    bad = tmp_path / "bad.S"
    bad.write_text("frobnicate a0\n")
    with pytest.raises(ImageError, match="bad.S"):
        m.load_image(str(bad))


def test_assembly_images_use_region_base(tmp_path):
    f = tmp_path / "d.S"
    f.write_text("here: .word here\n")
    m = Machine(Config(ram=str(f), disk=str(f)))
    assert m.phys.read(RAM_BASE, 4) == RAM_BASE
    assert m.phys.read(DISK_BASE, 4) == DISK_BASE


def _elf(segments, entry):
    """Minimal ELF32 little-endian RISC-V executable with PT_LOAD segments."""
    phoff = 52
    data_off = phoff + 32 * len(segments)
    hdr = b"\x7fELF" + bytes((1, 1, 1)) + bytes(9)
    hdr += struct.pack("<HHIIIIIHHHHHH", 2, 243, 1, entry, phoff, 0, 0, 52, 32, len(segments), 40, 0, 0)
    phdrs, blobs = b"", b""
    for paddr, payload, memsz in segments:
        phdrs += struct.pack("<8I", 1, data_off + len(blobs), paddr, paddr, len(payload), memsz, 5, 4)
        blobs += payload
    return hdr + phdrs + blobs


def test_elf_loader():
    code = build("li a0, 42\n" + HALT, RAM_BASE + 0x100)
    m = Machine()
    m.phys.load(RAM_BASE + 0x200, b"\xff" * 8)
    m.load_image(_elf([(RAM_BASE + 0x100, code, len(code)), (RAM_BASE + 0x200, b"\x01", 8)], RAM_BASE + 0x100))
    assert m.state.pc == RAM_BASE + 0x100
    assert m.phys.dram[0x200:0x208] == b"\x01" + bytes(7)
    m.run(3)
    assert m.state.x[10] == 42


def test_elf_rejects_big_endian_and_foreign_segments():
    with pytest.raises(ImageError):
        Machine().load_image(b"\x7fELF\x01\x02" + bytes(60))
    with pytest.raises(ImageError, match="outside RAM"):
        Machine().load_image(_elf([(0x1000, b"\0" * 4, 4)], 0x1000))


# -- run loop --------------------------------------------------------------
def test_reset_state():
    m = Machine()
    assert m.state.pc == RAM_BASE and m.state.mode == 3


def test_unmapped_fetch_is_a_host_diagnostic():
    m = machine("li t0, 0x30000000\njr t0\n")
    with pytest.raises(SimulationFault, match="unmapped"):
        m.run(10)


def test_trap_storm_guard(monkeypatch):
    import rvsoc.harness as H
    monkeypatch.setattr(H, "TRAP_STORM_LIMIT", 50)
    # mtvec points at an illegal instruction
    m = machine("la t0, bad\ncsrw mtvec, t0\n.word 0\n.align 2\nbad: .word 0\n")
    with pytest.raises(SimulationFault, match="consecutive traps"):
        m.run(1000)


def test_end_to_end_determinism(tmp_path):
    script = tmp_path / "in.txt"
    script.write_bytes(b"abc")
    outs = []
    for i in range(2):
        t = tmp_path / f"t{i}.txt"
        m = _fuzz_machine(3, trace=str(t), stdin=str(script), rx_interval=100)
        m.run(2000)
        outs.append((t.read_bytes(), m.stats()))
    assert outs[0] == outs[1]


# -- lockstep --------------------------------------------------------------
@pytest.mark.parametrize("seed", [1, 2, 5])
def test_lockstep_fuzz_short(seed):
    m = _fuzz_machine(seed, lockstep=True)
    assert m.run(3000) == "limit"


def test_lockstep_detects_injected_alu_fault():
    m = machine("li a0, 3\nli a1, 4\nadd a2, a0, a1\nadd a3, a2, a2\n" + HALT, lockstep=True)
    real = m.core.alu

    def broken(op, a, b):
        r = real(op, a, b)
        return r + 1 if (a, b) == (3, 4) else r

    m.core.alu = broken
    with pytest.raises(Divergence) as ei:
        m.run(10)
    d = ei.value
    assert d.index == 2
    assert d.core_rec.gpr_writes == ((12, 8),) and d.oracle_rec.gpr_writes == ((12, 7),)
    assert "x12=00000008" in str(d) and "x12=00000007" in str(d)


def test_lockstep_detects_state_only_difference():
    m = machine("nop\nnop\n" + HALT, lockstep=True)
    m.run(1)
    m.state.x[7] = 1  # corrupt state outside any record
    with pytest.raises(Divergence, match="state differs"):
        m.run(1)


def test_lockstep_supervisor_demo():
    from rvsoc.firmware import supervisor_demo
    m = Machine(Config(lockstep=True))
    m.load_image(supervisor_demo())
    assert m.run(10_000) == "poweroff"
    assert bytes(m.console.output).endswith(b"code 00000000\n")


# -- checkpoints -----------------------------------------------------------
def test_checkpoint_zero_instruction_identity(tmp_path):
    m = _fuzz_machine(4)
    m.run(700)
    p = tmp_path / "c.ckpt"
    m.checkpoint_save(p)
    r = Machine()
    r.checkpoint_restore(p)
    assert r.stats() == m.stats()
    assert save_checkpoint(r) == p.read_bytes()


def test_checkpoint_split_equals_straight(tmp_path):
    straight = _traced(_fuzz_machine(6), 1000)
    a = _fuzz_machine(6)
    first = _traced(a, 500)
    a.checkpoint_save(tmp_path / "k.ckpt")
    b = Machine()
    b.checkpoint_restore(tmp_path / "k.ckpt")
    rest = _traced(b, 500)
    assert first + rest == straight
    assert b.stats() == _straight_stats(6, 1000)


def _straight_stats(seed, n):
    m = _fuzz_machine(seed)
    m.run(n)
    return m.stats()


@settings(max_examples=8)
@given(st.integers(1, 598), st.integers(1, 598))
def test_checkpoint_associativity(k1, k2):
    k1, k2 = sorted((k1, k2 + 1 if k2 >= k1 else k2))
    n = 600
    straight = _traced(_fuzz_machine(8), n)
    m = _fuzz_machine(8)
    lines = _traced(m, k1)
    for a, b in ((k1, k2), (k2, n)):
        blob = save_checkpoint(m)
        m = Machine()
        restore_checkpoint(m, blob)
        lines += _traced(m, b - a)
    assert lines == straight


def test_checkpoint_restore_continues_lockstep():
    m = _fuzz_machine(9)
    m.run(400)
    blob = save_checkpoint(m)
    r = Machine(Config(lockstep=True))
    restore_checkpoint(r, blob)
    assert r.run(1500) == "limit"


def test_checkpoint_rejects_bad_input():
    m = _fuzz_machine(2)
    m.run(50)
    blob = save_checkpoint(m)
    fresh = Machine()
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        restore_checkpoint(fresh, b"hello")
    with pytest.raises(CheckpointError, match="truncated"):
        restore_checkpoint(fresh, blob[:-100])
    bumped = bytearray(blob[:-4])
    bumped[8:12] = struct.pack("<I", 99)
    import zlib
    bumped += struct.pack("<I", zlib.crc32(bumped))
    with pytest.raises(CheckpointError, match="version 99"):
        restore_checkpoint(fresh, bytes(bumped))
    with pytest.raises(CheckpointError, match="different timing"):
        restore_checkpoint(Machine(Config(miss_penalty=20)), blob)
    assert blob.startswith(MAGIC)


def test_checkpoint_keeps_console_and_disk(tmp_path):
    m = Machine(Config(rx_interval=10), stdin_script=b"qrs")
    m.load_image(build("li s0, 0x40000000\nli a0, 'Z'\nsw a0, 0(s0)\n" + HALT))
    m.load_image(b"DISK", "disk", 4096)
    m.run(25)
    blob = save_checkpoint(m)
    r = Machine(Config(rx_interval=10))
    restore_checkpoint(r, blob)
    assert list(r.console.rx) == list(m.console.rx) == [ord("q"), ord("r")]
    r.run(10)
    assert list(r.console.rx) == [ord("q"), ord("r"), ord("s")]
    assert r.phys.read(DISK_BASE + 4096, 4) == int.from_bytes(b"DISK", "little")
