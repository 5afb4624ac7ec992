"""MMIO devices (timer, console, disk controller) and the RVuc I/O microcontroller.

The RVuc is a small RV32I core with 8KB of local memory at address 0.  The
main core rings it through the console doorbell; the RVuc then runs its
firmware from address 0 until it writes the completion register, while the
main core stalls.  Register layout is documented in ``docs/device_abi.md``.
"""

from collections import deque

from .errors import FirmwareFault
from .isa_decode import IllegalInstruction, InstClass, decode32
from .kernels import OP, alu, branch, load_extend
from .mem_hier import CONSOLE_BASE, DISK_BASE, DISK_CTRL_BASE, DRAM_BASE, TIMER_BASE
from .mmu_sv32 import AccessFault

MASK32 = 0xFFFFFFFF
SECTOR_SIZE = 512
DISK_SECTORS = (64 << 20) // SECTOR_SIZE
RX_FIFO_DEPTH = 16
RX_OVERFLOW = 1 << 8

# console registers (offsets from CONSOLE_BASE)
TXDATA, RXDATA, RXSTATUS = 0x00, 0x04, 0x08
DOORBELL, ARG0, ARG1, ARG2, COMPLETION, CAUSE = 0x10, 0x14, 0x18, 0x1C, 0x20, 0x24
POWEROFF = 0x40
# doorbell causes
REQ_PUTCHAR, REQ_PUTS, REQ_GETCHAR, REQ_DISK_READ, REQ_DISK_WRITE = 1, 2, 3, 4, 5

# disk controller registers
DISK_CMD, DISK_SECTOR, DISK_RAMADDR, DISK_STATUS = 0x00, 0x04, 0x08, 0x0C
CMD_READ, CMD_WRITE = 1, 2

# timer registers
MTIMECMP_LO, MTIMECMP_HI, MTIME_LO, MTIME_HI = 0x4000, 0x4004, 0xBFF8, 0xBFFC

RVUC_MEM_SIZE = 8 << 10
RVUC_CPI = 4
RVUC_WATCHDOG = 10_000_000


class Timer:
    """mtime counts retired instructions; mtimecmp is software-writable."""

    def __init__(self, clock):
        self.clock = clock
        self.mtimecmp = MASK32 | (MASK32 << 32)

    def read(self, off):
        t = self.clock()
        return {MTIMECMP_LO: self.mtimecmp & MASK32, MTIMECMP_HI: self.mtimecmp >> 32,
                MTIME_LO: t & MASK32, MTIME_HI: (t >> 32) & MASK32}.get(off & ~3, 0)

    def write(self, off, value):
        off &= ~3
        if off == MTIMECMP_LO:
            self.mtimecmp = (self.mtimecmp & ~MASK32) | value
        elif off == MTIMECMP_HI:
            self.mtimecmp = (self.mtimecmp & MASK32) | (value << 32)

    def pending(self) -> bool:
        return self.clock() >= self.mtimecmp


class Console:
    """UART-like console with an RX FIFO fed from a scripted input stream."""

    def __init__(self, script: bytes = b"", rx_interval: int = 1000):
        self.output = bytearray()
        self.sink = None
        self.rx = deque()
        self.overflow = False
        self.script = bytes(script)
        self.script_pos = 0
        self.rx_interval = rx_interval
        self.args = [0, 0, 0]
        self.cause = 0
        self.result = 0
        self.doorbell = None  # callback(cause), installed by the machine
        self.poweroff: int | None = None

    def putc(self, byte: int) -> None:
        self.output.append(byte & 0xFF)
        if self.sink is not None:
            self.sink.write(bytes((byte & 0xFF,)))
            self.sink.flush()

    def push_rx(self, byte: int) -> None:
        if len(self.rx) >= RX_FIFO_DEPTH:
            self.overflow = True  # drop the newest byte
        else:
            self.rx.append(byte & 0xFF)

    def tick(self, retired: int) -> None:
        """Deliver one scripted input byte every ``rx_interval`` retirements."""
        if self.script_pos < len(self.script) and retired >= (self.script_pos + 1) * self.rx_interval:
            self.push_rx(self.script[self.script_pos])
            self.script_pos += 1

    def read(self, off):
        if off == RXDATA:
            return self.rx.popleft() if self.rx else MASK32
        if off == RXSTATUS:
            return len(self.rx) | (RX_OVERFLOW if self.overflow else 0)
        if ARG0 <= off <= ARG2:
            return self.args[(off - ARG0) >> 2]
        if off == COMPLETION:
            return self.result
        if off == CAUSE:
            return self.cause
        return 0

    def write(self, off, value):
        if off == TXDATA:
            self.putc(value)
        elif off == RXSTATUS:
            self.overflow = False
        elif ARG0 <= off <= ARG2:
            self.args[(off - ARG0) >> 2] = value
        elif off == DOORBELL:
            self.cause = value
            if self.doorbell is not None:
                self.doorbell(value)
        elif off == COMPLETION:
            self.result = value
            if self.doorbell is not None:
                self.doorbell(None)
        elif off == POWEROFF:
            self.poweroff = value


class DiskController:
    """Sector copies between the disk region and RAM, coherent with the cache."""

    def __init__(self):
        self.mem = None  # MemSystem, installed by the machine
        self.sector = 0
        self.ramaddr = 0
        self.status = 0

    def read(self, off):
        return {DISK_SECTOR: self.sector, DISK_RAMADDR: self.ramaddr, DISK_STATUS: self.status}.get(off, 0)

    def write(self, off, value):
        if off == DISK_SECTOR:
            self.sector = value
        elif off == DISK_RAMADDR:
            self.ramaddr = value
        elif off == DISK_CMD:
            self.status = 0 if self.transfer(value) else 1

    def transfer(self, cmd: int) -> bool:
        if self.sector >= DISK_SECTORS or cmd not in (CMD_READ, CMD_WRITE):
            return False
        disk = DISK_BASE + self.sector * SECTOR_SIZE
        ram = self.ramaddr
        if not (DRAM_BASE <= ram and ram + SECTOR_SIZE <= DISK_BASE):
            return False
        src, dst = (disk, ram) if cmd == CMD_READ else (ram, disk)
        self.mem.dma_write(dst, self.mem.dma_read(src, SECTOR_SIZE))
        return True


class DeviceBus:
    """Routes MMIO accesses to the timer, console and disk controller."""

    def __init__(self, timer: Timer, console: Console, disk: DiskController):
        self.timer = timer
        self.console = console
        self.disk = disk

    def _route(self, pa):
        if pa >= DISK_CTRL_BASE:
            return self.disk, pa - DISK_CTRL_BASE
        if pa >= CONSOLE_BASE:
            return self.console, pa - CONSOLE_BASE
        return self.timer, pa - TIMER_BASE

    def mmio_read(self, pa, width):
        dev, off = self._route(pa)
        return dev.read(off & ~3) >> (8 * (off & 3))

    def mmio_write(self, pa, width, value):
        dev, off = self._route(pa)
        dev.write(off & ~3, value << (8 * (off & 3)))


class ReplayBus:
    """MMIO bus for the reference interpreter in lockstep.

    Reads return the values the timing core observed, in order; writes are
    swallowed because the real devices already saw them.
    """

    def __init__(self):
        self.pending = deque()

    def mmio_read(self, pa, width):
        if not self.pending:
            raise AccessFault(pa)
        qpa, value = self.pending.popleft()
        if qpa != pa:
            raise AccessFault(pa)
        return value

    def mmio_write(self, pa, width, value):
        pass


class Rvuc:
    """RV32I I/O microcontroller: 4 cycles per instruction plus memory time."""

    def __init__(self, mem, firmware: bytes = b"", cpi: int = RVUC_CPI, watchdog: int = RVUC_WATCHDOG):
        self.mem = mem  # MemSystem
        self.local = bytearray(RVUC_MEM_SIZE)
        self.local[:len(firmware)] = firmware
        self.x = [0] * 32
        self.pc = 0
        self.busy = False
        self.cpi = cpi
        self.watchdog = watchdog
        self.executed = 0
        self.requests = 0
        self.cycles = 0
        self.budget = 0

    def start(self) -> None:
        self.pc = 0
        self.busy = True
        self.requests += 1
        self.budget = self.watchdog

    def stop(self) -> None:
        self.busy = False

    def _load(self, addr, width):
        if addr < RVUC_MEM_SIZE:
            if addr + width > RVUC_MEM_SIZE:
                raise FirmwareFault(f"local load past end at {addr:#x}")
            return int.from_bytes(self.local[addr:addr + width], "little")
        if addr & (width - 1):
            raise FirmwareFault(f"misaligned load at {addr:#010x}")
        try:
            return self.mem.read(addr, width)
        except AccessFault:
            raise FirmwareFault(f"load from unmapped address {addr:#010x}") from None

    def _store(self, addr, width, value):
        value &= (1 << (8 * width)) - 1
        if addr < RVUC_MEM_SIZE:
            if addr + width > RVUC_MEM_SIZE:
                raise FirmwareFault(f"local store past end at {addr:#x}")
            self.local[addr:addr + width] = value.to_bytes(width, "little")
            return
        if addr & (width - 1):
            raise FirmwareFault(f"misaligned store at {addr:#010x}")
        try:
            self.mem.write(addr, width, value, external=True)
        except AccessFault:
            raise FirmwareFault(f"store to unmapped address {addr:#010x}") from None

    def step(self) -> int:
        """Execute one firmware instruction; returns the cycles it took."""
        if self.budget <= 0:
            raise FirmwareFault("watchdog expired: firmware did not signal completion")
        self.budget -= 1
        pc = self.pc
        if pc & 3 or pc + 4 > RVUC_MEM_SIZE:
            raise FirmwareFault(f"bad firmware pc {pc:#x}")
        w = int.from_bytes(self.local[pc:pc + 4], "little")
        try:
            d = decode32(w)
        except IllegalInstruction:
            raise FirmwareFault(f"illegal firmware instruction {w:#010x} at {pc:#x}") from None
        mem = self.mem
        start = mem.cycles
        x = self.x
        c = d.cls
        nxt = (pc + 4) & MASK32
        res = None
        if c is InstClass.ALU_IMM:
            res = alu(OP[d.funct[:-1] if d.funct != "sltiu" else "sltu"], x[d.rs1], d.imm)
        elif c is InstClass.ALU:
            res = alu(OP[d.funct], x[d.rs1], x[d.rs2])
        elif c is InstClass.LUI:
            res = d.imm
        elif c is InstClass.AUIPC:
            res = (pc + d.imm) & MASK32
        elif c is InstClass.JAL:
            res, nxt = nxt, (pc + d.imm) & MASK32
        elif c is InstClass.JALR:
            res, nxt = nxt, (x[d.rs1] + d.imm) & MASK32 & ~1
        elif c is InstClass.BRANCH:
            if branch(OP[d.funct], x[d.rs1], x[d.rs2]):
                nxt = (pc + d.imm) & MASK32
        elif c is InstClass.LOAD:
            width = {"lb": 1, "lbu": 1, "lh": 2, "lhu": 2, "lw": 4}[d.funct]
            v = self._load((x[d.rs1] + d.imm) & MASK32, width)
            res = load_extend({"lb": 0, "lh": 1}.get(d.funct, 2), v)
        elif c is InstClass.STORE:
            width = {"sb": 1, "sh": 2, "sw": 4}[d.funct]
            self._store((x[d.rs1] + d.imm) & MASK32, width, x[d.rs2])
        elif c is not InstClass.FENCE:
            raise FirmwareFault(f"unsupported firmware instruction {d.mnemonic} at {pc:#x}")
        if res is not None and d.rd:
            x[d.rd] = res & MASK32
        self.pc = nxt
        self.executed += 1
        cost = self.cpi + mem.cycles - start
        mem.cycles = start
        self.cycles += cost
        return cost
