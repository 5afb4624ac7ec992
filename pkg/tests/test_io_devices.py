import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import HALT, build, machine
from rvsoc.asm import assemble
from rvsoc.errors import FirmwareFault, ImageError
from rvsoc.harness import Config, Machine
from rvsoc.io_devices import (CONSOLE_BASE, RX_FIFO_DEPTH, RX_OVERFLOW, RXDATA, RXSTATUS, RVUC_MEM_SIZE,
                              SECTOR_SIZE, Console, DiskController, Rvuc, Timer, MTIME_LO, MTIMECMP_HI,
                              MTIMECMP_LO)
from rvsoc.mem_hier import DISK_BASE, RAM_BASE, MemSystem, PhysMem

CON = f"li s0, {CONSOLE_BASE:#x}\n"


# -- console ---------------------------------------------------------------
def test_rx_fifo_overflow_drops_newest_and_is_sticky():
    c = Console()
    for b in range(RX_FIFO_DEPTH + 3):
        c.push_rx(b)
    assert list(c.rx) == list(range(RX_FIFO_DEPTH))
    assert c.read(RXSTATUS) == RX_FIFO_DEPTH | RX_OVERFLOW
    assert c.read(RXDATA) == 0
    assert c.read(RXSTATUS) & RX_OVERFLOW  # draining does not clear it
    c.write(RXSTATUS, 0)
    assert c.read(RXSTATUS) == RX_FIFO_DEPTH - 1


def test_rx_empty_reads_all_ones():
    assert Console().read(RXDATA) == 0xFFFFFFFF


def test_rx_script_one_byte_per_interval():
    c = Console(b"xyz", rx_interval=10)
    arrivals = []
    for retired in range(1, 50):
        before = len(c.rx)
        c.tick(retired)
        if len(c.rx) > before:
            arrivals.append(retired)
    assert arrivals == [10, 20, 30]
    assert bytes(c.rx) == b"xyz"


@given(st.lists(st.one_of(st.integers(0, 255), st.none()), max_size=80))
def test_rx_fifo_model(ops):
    c = Console()
    model, overflow = [], False
    for op in ops:
        if op is None:
            assert c.read(RXDATA) == (model.pop(0) if model else 0xFFFFFFFF)
        else:
            c.push_rx(op)
            if len(model) < RX_FIFO_DEPTH:
                model.append(op)
            else:
                overflow = True
        assert c.read(RXSTATUS) == len(model) | (RX_OVERFLOW if overflow else 0)


# -- timer -----------------------------------------------------------------
def test_timer_registers():
    now = [5]
    t = Timer(lambda: now[0])
    assert t.read(MTIME_LO) == 5 and not t.pending()
    t.write(MTIMECMP_HI, 0)
    t.write(MTIMECMP_LO, 7)
    assert t.read(MTIMECMP_LO) == 7 and t.read(MTIMECMP_HI) == 0
    now[0] = 7
    assert t.pending()


def test_mtime_counts_retired_instructions():
    src = "li t0, 0x0200bff8\nnop\nnop\nlw a0, 0(t0)\n" + HALT
    m = machine(src)
    m.run(5)
    # lui, addi, nop, nop retired before the load
    assert m.state.x[10] == 4


def test_timer_interrupt_taken():
    src = f"""
    la t0, handler
    csrw mtvec, t0
    li t0, 0x02004000
    li t1, 20
    sw t1, 0(t0)
    sw zero, 4(t0)
    li t0, 0x80
    csrw mie, t0
    csrsi mstatus, 8
spin: addi a1, a1, 1
    j spin
handler:
    csrr a0, mcause
    csrr a2, mepc
    {HALT}
    """
    m = machine(src)
    m.run(200)
    assert m.state.x[10] == 0x80000007
    assert m.state.x[11] > 0


# -- disk controller -------------------------------------------------------
def _disk():
    mem = MemSystem(PhysMem())
    d = DiskController()
    d.mem = mem
    return d, mem


def test_disk_read_write_roundtrip():
    d, mem = _disk()
    payload = bytes(range(256)) * 2
    mem.phys.load(RAM_BASE + 0x1000, payload)
    d.write(4, 3)
    d.write(8, RAM_BASE + 0x1000)
    d.write(0, 2)
    assert d.read(0x0C) == 0
    assert mem.dma_read(DISK_BASE + 3 * SECTOR_SIZE, SECTOR_SIZE) == payload
    d.write(8, RAM_BASE + 0x4000)
    mem.read(RAM_BASE + 0x4000, 4)  # cache the line first
    d.write(0, 1)
    assert mem.read(RAM_BASE + 0x4000, 4) == 0x03020100


@pytest.mark.parametrize("sector, ram, cmd", [
    ((64 << 20) // SECTOR_SIZE, RAM_BASE, 1),
    (0, DISK_BASE - 256, 1),
    (0, 0x1000, 2),
    (0, RAM_BASE, 7),
])
def test_disk_bad_requests_set_status(sector, ram, cmd):
    d, _ = _disk()
    d.write(4, sector)
    d.write(8, ram)
    d.write(0, cmd)
    assert d.read(0x0C) == 1


# -- RVuc ------------------------------------------------------------------
def _rvuc(src, **kw):
    return Rvuc(MemSystem(PhysMem()), assemble(src, 0)[0], **kw)


def _run(r, limit=1000):
    r.start()
    for _ in range(limit):
        r.step()


@pytest.mark.parametrize("src, msg", [
    (".word 0xffffffff", "illegal firmware instruction"),
    ("li t0, 0x80000002\nlw a0, 0(t0)", "misaligned load"),
    ("li t0, 0x30000000\nlw a0, 0(t0)", "unmapped"),
    ("li t0, 0x30000000\nsw a0, 0(t0)", "unmapped"),
    (f"li t0, {RVUC_MEM_SIZE - 2}\nlw a0, 0(t0)", "past end"),
    ("ecall", "unsupported"),
    ("mul a0, a0, a0", "unsupported"),
    ("li t0, 0x2002\njr t0", "bad firmware pc"),
])
def test_rvuc_faults(src, msg):
    with pytest.raises(FirmwareFault, match=msg):
        _run(_rvuc(src + "\nspin: j spin"))


def test_rvuc_watchdog():
    r = _rvuc("spin: j spin", watchdog=50)
    r.start()
    for _ in range(50):
        r.step()
    with pytest.raises(FirmwareFault, match="watchdog"):
        r.step()


def test_rvuc_cycle_cost():
    r = _rvuc("addi a0, a0, 1\nli t0, 0x80000000\nlw a1, 0(t0)\nlw a1, 0(t0)")
    r.start()
    assert r.step() == 4
    assert r.step() == 4
    miss, hit = r.step(), r.step()
    assert hit < miss and hit >= 4
    assert r.mem.cycles == 0  # RVuc time is kept out of the main core's clock


def test_firmware_size_limit(tmp_path):
    ok = tmp_path / "ok.bin"
    ok.write_bytes(bytes(RVUC_MEM_SIZE))
    Machine(Config(firmware=str(ok)))
    big = tmp_path / "big.bin"
    big.write_bytes(bytes(RVUC_MEM_SIZE + 1))
    with pytest.raises(ImageError):
        Machine(Config(firmware=str(big)))


# -- doorbell services through the bundled firmware -----------------------
def _service(body, n=400, **cfg):
    m = machine(CON + body + "\nsw zero, 0x40(s0)\n" + HALT, **cfg)
    assert m.run(n) == "poweroff"
    return m


def test_putchar_and_puts():
    m = _service("""
    li a0, 'A'
    sw a0, 0x14(s0)
    li a0, 1
    sw a0, 0x10(s0)
    lw s1, 0x20(s0)
    la a0, msg
    sw a0, 0x14(s0)
    li a0, 3
    sw a0, 0x18(s0)
    li a0, 2
    sw a0, 0x10(s0)
    lw s2, 0x20(s0)
    j off
msg: .ascii "xyz"
    .align 2
off:
    """)
    assert bytes(m.console.output) == b"Axyz"
    assert m.state.x[9] == 0 and m.state.x[18] == 3
    s = m.stats()
    assert s.excluded_cycles > 0
    assert m.core.counters.cycles == s.cycles


def test_getchar_and_direct_rx():
    m = Machine(Config(rx_interval=5), stdin_script=b"hi")
    m.load_image(build(CON + """
    li t0, 20
wait: addi t0, t0, -1
    bnez t0, wait
    li a0, 3
    sw a0, 0x10(s0)
    lw s1, 0x20(s0)
    lw s2, 4(s0)
    lw s3, 4(s0)
    sw zero, 0x40(s0)
    """ + HALT))
    assert m.run(200) == "poweroff"
    assert m.state.x[9] == ord("h") and m.state.x[18] == ord("i")
    assert m.state.x[19] == 0xFFFFFFFF


def test_disk_services_roundtrip():
    m = _service("""
    la a0, buf
    li t0, 0x5a5a1234
    sw t0, 0(a0)
    sw t0, 508(a0)
    li t0, 9
    sw t0, 0x14(s0)
    sw a0, 0x18(s0)
    li t0, 5
    sw t0, 0x10(s0)
    sw zero, 0(a0)
    lw t1, 0(a0)
    li t0, 4
    sw t0, 0x10(s0)
    lw s1, 0(a0)
    lw s2, 508(a0)
    li t0, 999999
    sw t0, 0x14(s0)
    sw t0, 0x10(s0)
    lw s3, 0x20(s0)
    j off
    .align 4
buf: .space 512
off:
    """, n=2000)
    assert m.state.x[9] == 0x5A5A1234 and m.state.x[18] == 0x5A5A1234
    assert m.state.x[19] == 0xFFFFFFFF
    assert m.phys.read(DISK_BASE + 9 * SECTOR_SIZE, 4) == 0x5A5A1234


def test_poweroff_code():
    m = machine(CON + "li a0, 7\nsw a0, 0x40(s0)\n" + HALT)
    assert m.run(100) == "poweroff"
    assert m.console.poweroff == 7
