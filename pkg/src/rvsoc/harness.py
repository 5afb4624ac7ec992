"""Whole-system driver: image loading, the run loop, traces, lockstep, checkpoints, stats."""

import hashlib
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

from . import arch_state as A
from .arch_state import ArchState, PrivMode
from .errors import CheckpointError, Divergence, FirmwareFault, ImageError, SimulationFault  # noqa: F401
from .io_devices import RVUC_MEM_SIZE, Console, DeviceBus, DiskController, ReplayBus, Rvuc, Timer
from .mem_hier import DISK_BASE, DISK_SIZE, RAM_BASE, RAM_SIZE, MemSystem, PhysMem, cache_stats
from .mmu_sv32 import Mmu
from .oracle_iss import Oracle, RetireRecord
from .timing_core import INI, TimingCore

MTIP = 1 << 7
TRAP_STORM_LIMIT = 1_000_000


@dataclass
class Config:
    ram: str | None = None
    disk: str | None = None
    firmware: str | None = None
    max_insns: int | None = None
    trace: str | None = None
    lockstep: bool = False
    cache: bool = True
    fetch_buffer: bool = True
    miss_penalty: int = 16
    store_latency: int = 1
    mmio_latency: int = 4
    tlb: bool = True
    rx_interval: int = 1000
    stdin: str | None = None
    seed: int | None = None

    def timing_hash(self) -> bytes:
        """Digest of every setting that changes cycle-level behaviour."""
        key = (self.cache, self.fetch_buffer, self.miss_penalty, self.store_latency,
               self.mmio_latency, self.tlb, self.rx_interval)
        return hashlib.sha256(repr(key).encode()).digest()


# -- trace lines -----------------------------------------------------------
def format_record(index: int, rec: RetireRecord) -> str:
    """Canonical one-line rendering of a retirement (or trap) record.

    ``index pc raw priv gpr trap csrs mem`` with lowercase zero-padded hex and
    ``-`` for empty fields.
    """
    g = rec.gpr_writes
    gpr = f"x{g[0][0]:02d}={g[0][1]:08x}" if g else "-"
    t = rec.trap
    trap = f"t={t.mcause:08x}/{t.tval:08x}" if t is not None else "-"
    csrs = ",".join(f"{a:03x}={v:08x}" for a, v in rec.csr_writes) or "-"
    mem = ",".join(f"{k}{pa:08x}:{w}={v:0{2 * w}x}" for k, pa, w, v in rec.mem_ops) or "-"
    return (f"{index:010d} {rec.pc_before:08x} {rec.raw:08x} {PrivMode(rec.mode).letter} "
            f"{gpr} {trap} {csrs} {mem}")


class TraceLine(NamedTuple):
    index: int
    record: RetireRecord

    def __str__(self):
        return format_record(self.index, self.record)


# -- stats -------------------------------------------------------------------
@dataclass
class StatsReport:
    retired: int
    cycles: int
    cpi: float | None
    cache_accesses: int
    cache_hits: int
    hit_rate: float | None
    mpki: float | None
    tlb_walks: list = field(default_factory=lambda: [0, 0, 0])
    excluded_cycles: int = 0

    def render(self) -> str:
        fmt = lambda v, spec, suffix="": "n/a" if v is None else f"{v:{spec}}{suffix}"  # noqa: E731
        return "\n".join((
            f"retired        {self.retired}",
            f"cycles         {self.cycles}",
            f"CPI            {fmt(self.cpi, '.1f')}",
            f"cache accesses {self.cache_accesses}",
            f"cache hits     {self.cache_hits}",
            f"hit rate       {fmt(None if self.hit_rate is None else self.hit_rate * 100, '.1f', '%')}",
            f"MPKI           {fmt(self.mpki, '.2f')}",
            f"TLB walks      I={self.tlb_walks[0]} R={self.tlb_walks[1]} W={self.tlb_walks[2]}",
            f"RVuc cycles    {self.excluded_cycles} (excluded)",
        ))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def stats_report(retired: int, cycles: int, cache_accesses: int = 0, cache_hits: int = 0,
                 tlb_walks=(0, 0, 0), excluded: int = 0) -> StatsReport:
    """CPI = cycles / retired; hit rate and MPKI per :func:`mem_hier.cache_stats`."""
    cs = cache_stats(cache_accesses, cache_hits, retired)
    return StatsReport(retired, cycles, cycles / retired if retired else None, cache_accesses,
                       cache_hits, cs.hit_rate, cs.mpki, list(tlb_walks), excluded)


# -- lockstep ----------------------------------------------------------------
def divergence(index, core_rec, oracle_rec, detail="") -> Divergence:
    lines = [f"lockstep divergence at record {index}" + (f": {detail}" if detail else ""),
             "  core:   " + format_record(index, core_rec),
             "  oracle: " + (format_record(index, oracle_rec) if oracle_rec else "(none)")]
    return Divergence("\n".join(lines), index, core_rec, oracle_rec)


# -- the machine ---------------------------------------------------------------
def _default_firmware() -> bytes:
    from .firmware import echo_firmware
    return echo_firmware()


class Machine:
    """Timing core, memory system, devices and RVuc wired together."""

    def __init__(self, config: Config | None = None, firmware: bytes | None = None,
                 stdin_script: bytes | None = None):
        self.config = cfg = config or Config()
        self.state = ArchState(RAM_BASE)
        self.timer = Timer(lambda: self.state.retired)
        if stdin_script is None and cfg.stdin:
            stdin_script = Path(cfg.stdin).read_bytes()
        self.console = Console(stdin_script or b"", cfg.rx_interval)
        self.disk = DiskController()
        self.bus = DeviceBus(self.timer, self.console, self.disk)
        self.phys = PhysMem(self.bus)
        self.mem = MemSystem(self.phys, cache_enabled=cfg.cache, buffer_enabled=cfg.fetch_buffer,
                             miss_penalty=cfg.miss_penalty, store_latency=cfg.store_latency,
                             mmio_latency=cfg.mmio_latency)
        self.disk.mem = self.mem
        self.core = TimingCore(self.state, self.mem, Mmu(cfg.tlb))
        if firmware is None:
            firmware = _read(cfg.firmware, 0) if cfg.firmware else _default_firmware()
        if len(firmware) > RVUC_MEM_SIZE:
            raise ImageError(f"firmware is {len(firmware)} bytes; RVuc local memory is {RVUC_MEM_SIZE}")
        self.rvuc = Rvuc(self.mem, firmware)
        self.console.doorbell = self._doorbell
        self.records = 0
        self.trace_lines: list[str] | None = None
        self.trace_file = None
        self.oracle: Oracle | None = None
        self.replay: ReplayBus | None = None
        if cfg.ram:
            self.load_image(cfg.ram, "ram")
        if cfg.disk:
            self.load_image(cfg.disk, "disk")

    # -- images ----------------------------------------------------------
    def load_image(self, path_or_bytes, region: str = "ram", offset: int = 0) -> None:
        if isinstance(path_or_bytes, (bytes, bytearray)):
            data = path_or_bytes
        else:
            base = {"ram": RAM_BASE, "disk": DISK_BASE}.get(region, 0)
            data = _read(path_or_bytes, base + offset)
        if region == "firmware":
            if offset + len(data) > RVUC_MEM_SIZE:
                raise ImageError(f"firmware image of {len(data)} bytes exceeds {RVUC_MEM_SIZE}")
            self.rvuc.local[offset:offset + len(data)] = data
            return
        if region == "ram" and data[:4] == b"\x7fELF":
            self.load_elf(data)
            return
        base, size = {"ram": (RAM_BASE, RAM_SIZE), "disk": (DISK_BASE, DISK_SIZE)}[region]
        if offset < 0 or offset + len(data) > size:
            raise ImageError(f"{region} image of {len(data)} bytes at offset {offset:#x} exceeds {size:#x}")
        self.phys.load(base + offset, data)
        self.mem.cache.invalidate_range(base + offset, len(data))

    def load_elf(self, data: bytes) -> None:
        """Place PT_LOAD segments of a little-endian ELF32 image and jump to its entry."""
        if data[4] != 1 or data[5] != 1:
            raise ImageError("only little-endian ELF32 images are supported")
        entry, phoff = struct.unpack_from("<II", data, 24)
        phentsize, phnum = struct.unpack_from("<HH", data, 42)
        for i in range(phnum):
            p_type, p_off, _vaddr, p_paddr, p_filesz, p_memsz = struct.unpack_from(
                "<6I", data, phoff + i * phentsize)
            if p_type != 1:
                continue
            if not RAM_BASE <= p_paddr <= p_paddr + p_memsz <= RAM_BASE + RAM_SIZE:
                raise ImageError(f"ELF segment at {p_paddr:#010x} outside RAM")
            seg = data[p_off:p_off + p_filesz] + bytes(p_memsz - p_filesz)
            self.phys.load(p_paddr, seg)
        self.state.pc = entry

    # -- devices -----------------------------------------------------------
    def _doorbell(self, cause):
        if cause is None:
            self.rvuc.stop()
        elif not self.rvuc.busy:
            self.rvuc.start()

    def _start_lockstep(self):
        self.replay = ReplayBus()
        self.oracle = Oracle(self.state.copy(), self.phys.clone(self.replay))
        self.mem.external_log = []

    # -- driving -----------------------------------------------------------
    def step(self) -> RetireRecord:
        """Advance until the next retirement/trap record (RVuc stalls included)."""
        core = self.core
        rvuc = self.rvuc
        cnt = core.counters
        while True:
            rec = core.run_instruction(rvuc)
            if rec is not None:
                break
            while rvuc.busy:
                cnt.excluded += rvuc.step()
        if self.oracle is not None:
            self._check(rec)
        st = self.state
        csr = st.csr
        if st.retired >= self.timer.mtimecmp:
            csr[A.MIP] |= MTIP
        elif csr[A.MIP] & MTIP:
            csr[A.MIP] &= ~MTIP
        console = self.console
        if console.script_pos < len(console.script):
            console.tick(st.retired)
        if self.trace_lines is not None or self.trace_file is not None:
            line = format_record(self.records, rec)
            if self.trace_lines is not None:
                self.trace_lines.append(line)
            if self.trace_file is not None:
                self.trace_file.write(line + "\n")
        self.records += 1
        return rec

    def _check(self, rec):
        oracle = self.oracle
        ost = oracle.state
        ost.csr[A.MIP] = (ost.csr[A.MIP] & ~MTIP) | (self.state.csr[A.MIP] & MTIP)
        pending = self.replay.pending
        pending.clear()
        is_mmio = self.phys.is_mmio
        for kind, pa, _w, v in rec.mem_ops:
            if kind == "r" and is_mmio(pa):
                pending.append((pa, v))
        try:
            orec = oracle.step()
        except SimulationFault as e:
            raise divergence(self.records, rec, None, f"oracle fault: {e}") from None
        log = self.mem.external_log
        if log:
            for pa, data in log:
                oracle.mem.load(pa, data)
            log.clear()
        if orec != rec:
            raise divergence(self.records, rec, orec)
        if not ost.same_as(self.state):
            raise divergence(self.records, rec, orec, "architectural state differs")

    def run(self, max_insns: int | None = None, trace=None) -> str:
        """Run until ``max_insns`` more retirements, power-off, or a host diagnostic.

        Returns the stop reason: ``"limit"``, ``"poweroff"``.  Host diagnostics
        propagate as exceptions.
        """
        if self.config.lockstep and self.oracle is None:
            self._start_lockstep()
        if max_insns is None:
            max_insns = self.config.max_insns
        target = None if max_insns is None else self.state.retired + max_insns
        own_file = None
        if trace is not None:
            if isinstance(trace, (str, Path)):
                own_file = self.trace_file = open(trace, "a")
            else:
                self.trace_file = trace
        elif self.config.trace and self.trace_file is None:
            own_file = self.trace_file = open(self.config.trace, "a")
        st = self.state
        console = self.console
        storm = 0
        try:
            while target is None or st.retired < target:
                if console.poweroff is not None:
                    return "poweroff"
                rec = self.step()
                if rec.trap is None:
                    storm = 0
                else:
                    storm += 1
                    if storm > TRAP_STORM_LIMIT:
                        raise SimulationFault(f"{TRAP_STORM_LIMIT} consecutive traps without retirement")
            return "poweroff" if console.poweroff is not None else "limit"
        finally:
            if own_file is not None:
                own_file.close()
                self.trace_file = None

    def stats(self) -> StatsReport:
        cnt = self.core.counters
        c = self.mem.cache
        return stats_report(cnt.retired, cnt.cycles, c.accesses, c.hits, self.core.mmu.walks, cnt.excluded)

    # -- checkpoints ---------------------------------------------------------
    def checkpoint_save(self, path) -> None:
        Path(path).write_bytes(save_checkpoint(self))

    def checkpoint_restore(self, path) -> None:
        restore_checkpoint(self, Path(path).read_bytes())


def _read(path, base: int = 0) -> bytes:
    """Raw image bytes; ``.S``/``.s`` sources are assembled to run at ``base``."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise ImageError(f"cannot read image {path}: {e}") from None
    if Path(path).suffix in (".S", ".s"):
        from .asm import AsmError, assemble
        try:
            return assemble(data.decode(), base)[0]
        except AsmError as e:
            raise ImageError(f"{path}: {e}") from None
    return data


# -- checkpoint container ------------------------------------------------------
MAGIC = b"RVSOCKPT"
VERSION = 1


def _sect(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


def save_checkpoint(m: Machine) -> bytes:
    """Serialize ``m`` (which must sit at a retirement boundary)."""
    core = m.core
    if core.step != INI:
        raise CheckpointError("checkpoints are taken between instructions")
    st = m.state
    out = [MAGIC, struct.pack("<I", VERSION), m.config.timing_hash()]
    out.append(_sect(b"ARCH", struct.pack("<IBBIQ32I", st.pc, int(st.mode), st.res_valid, st.res_addr,
                                          st.retired, *st.x)))
    csrs = sorted(st.csr.items())
    out.append(_sect(b"CSRS", struct.pack("<I", len(csrs)) + b"".join(struct.pack("<HI", a, v) for a, v in csrs)))
    mmu = core.mmu
    tl = b"".join(struct.pack("<iIBB", t.tag[i], t.ppn[i], t.flags[i], t.mega[i])
                  for t in mmu.tlbs for i in range(len(t.tag)))
    out.append(_sect(b"TLBS", tl))
    cache = m.mem.cache
    lines = [(i, tag, cache.data[i]) for i, tag in enumerate(cache.tags) if tag >= 0]
    out.append(_sect(b"CACH", struct.pack("<I", len(lines))
                     + b"".join(struct.pack("<II", i, tag) + d for i, tag, d in lines)))
    fb = m.mem.fbuf
    out.append(_sect(b"FBUF", struct.pack("<BHI", fb.valid, fb.half, fb.holder)))
    con, disk = m.console, m.disk
    devs = {
        "mtimecmp": m.timer.mtimecmp, "rx": list(con.rx), "overflow": con.overflow,
        "script": con.script.hex(), "script_pos": con.script_pos, "args": con.args,
        "cause": con.cause, "result": con.result, "poweroff": con.poweroff,
        "disk": [disk.sector, disk.ramaddr, disk.status],
    }
    out.append(_sect(b"DEVS", json.dumps(devs, sort_keys=True).encode()))
    r = m.rvuc
    out.append(_sect(b"RVUC", struct.pack("<IBQQQQ32I", r.pc, r.busy, r.budget, r.executed, r.requests,
                                          r.cycles, *r.x) + bytes(r.local)))
    out.append(_sect(b"DRAM", zlib.compress(bytes(m.phys.dram), 1)))
    cnt = core.counters
    mem = m.mem
    out.append(_sect(b"CNTR", struct.pack(
        "<9Q12Q12Q9Q", cnt.cycles, cnt.retired, cnt.trapped, cnt.excluded, m.records,
        mem.fetch_accesses, mem.straddles, mem.dram_reads, cache.accesses,
        *cnt.per_step, *cnt.visits, cache.hits, *mmu.walks, mmu.walk_reads, mmu.max_walk_reads,
        *mmu.tlb_hits)))
    blob = b"".join(out)
    return blob + struct.pack("<I", zlib.crc32(blob))


def restore_checkpoint(m: Machine, blob: bytes) -> None:
    if len(blob) < 48 or blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if zlib.crc32(blob[:-4]) != struct.unpack_from("<I", blob, len(blob) - 4)[0]:
        raise CheckpointError("checkpoint is truncated or corrupt")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != VERSION:
        raise CheckpointError(f"checkpoint version {version}, expected {VERSION}")
    if blob[12:44] != m.config.timing_hash():
        raise CheckpointError("checkpoint was taken under a different timing configuration")
    sections = {}
    pos = 44
    end = len(blob) - 4
    while pos < end:
        tag = blob[pos:pos + 4]
        (n,) = struct.unpack_from("<Q", blob, pos + 4)
        sections[tag] = blob[pos + 12:pos + 12 + n]
        pos += 12 + n
    try:
        _apply(m, sections)
    except (KeyError, struct.error) as e:
        raise CheckpointError(f"malformed checkpoint: {e}") from None


def _apply(m: Machine, s: dict) -> None:
    st = m.state
    v = struct.unpack_from("<IBBIQ32I", s[b"ARCH"])
    st.pc, mode, res_valid, st.res_addr, st.retired = v[:5]
    st.mode = PrivMode(mode)
    st.res_valid = bool(res_valid)
    st.x = list(v[5:])
    raw = s[b"CSRS"]
    (n,) = struct.unpack_from("<I", raw)
    st.csr = dict(struct.unpack_from("<HI", raw, 4 + 6 * i) for i in range(n))
    core = m.core
    core.step = INI
    mmu = core.mmu
    raw = s[b"TLBS"]
    k = 0
    for t in mmu.tlbs:
        for i in range(len(t.tag)):
            t.tag[i], t.ppn[i], t.flags[i], mega = struct.unpack_from("<iIBB", raw, k)
            t.mega[i] = bool(mega)
            k += 10
    cache = m.mem.cache
    cache.flush()
    raw = s[b"CACH"]
    (n,) = struct.unpack_from("<I", raw)
    for j in range(n):
        off = 4 + j * 24
        i, tag = struct.unpack_from("<II", raw, off)
        cache.tags[i] = tag
        cache.data[i] = bytes(raw[off + 8:off + 24])
    fb = m.mem.fbuf
    valid, fb.half, fb.holder = struct.unpack_from("<BHI", s[b"FBUF"])
    fb.valid = bool(valid)
    d = json.loads(s[b"DEVS"])
    con = m.console
    m.timer.mtimecmp = d["mtimecmp"]
    con.rx.clear()
    con.rx.extend(d["rx"])
    con.overflow = d["overflow"]
    con.script = bytes.fromhex(d["script"])
    con.script_pos = d["script_pos"]
    con.args = list(d["args"])
    con.cause, con.result, con.poweroff = d["cause"], d["result"], d["poweroff"]
    m.disk.sector, m.disk.ramaddr, m.disk.status = d["disk"]
    r = m.rvuc
    raw = s[b"RVUC"]
    v = struct.unpack_from("<IBQQQQ32I", raw)
    r.pc, busy, r.budget, r.executed, r.requests, r.cycles = v[:6]
    r.busy = bool(busy)
    r.x = list(v[6:])
    r.local[:] = raw[struct.calcsize("<IBQQQQ32I"):]
    dram = zlib.decompress(s[b"DRAM"])
    m.phys.dram[:] = dram
    v = struct.unpack("<9Q12Q12Q9Q", s[b"CNTR"])
    cnt = core.counters
    (cnt.cycles, cnt.retired, cnt.trapped, cnt.excluded, m.records, m.mem.fetch_accesses,
     m.mem.straddles, m.mem.dram_reads, cache.accesses) = v[:9]
    cnt.per_step = list(v[9:21])
    cnt.visits = list(v[21:33])
    cache.hits = v[33]
    mmu.walks = list(v[34:37])
    mmu.walk_reads, mmu.max_walk_reads = v[37:39]
    mmu.tlb_hits = list(v[39:42])
    m.oracle = None
    if m.config.lockstep:
        m._start_lockstep()
