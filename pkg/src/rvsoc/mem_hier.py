"""Physical memory map, write-through cache, 16-bit fetch buffer and MMIO routing."""

import struct
from typing import NamedTuple

from .mmu_sv32 import AccessFault

RAM_BASE = 0x8000_0000
RAM_SIZE = 64 << 20
DISK_BASE = 0x8400_0000
DISK_SIZE = 64 << 20
DRAM_BASE = RAM_BASE
DRAM_SIZE = RAM_SIZE + DISK_SIZE

TIMER_BASE = 0x0200_0000
TIMER_SIZE = 0x1_0000
CONSOLE_BASE = 0x4000_0000
DISK_CTRL_BASE = 0x4100_0000
MMIO_BLOCK_SIZE = 0x1000

LINE_SIZE = 16
CACHE_SIZE = 128 << 10
CACHE_LINES = CACHE_SIZE // LINE_SIZE

_U8, _U16, _U32 = struct.Struct("<B"), struct.Struct("<H"), struct.Struct("<I")
_FMT = {1: _U8, 2: _U16, 4: _U32}


def cache_index(pa: int) -> int:
    return (pa >> 4) & (CACHE_LINES - 1)


def cache_tag(pa: int) -> int:
    return pa >> 17


class PhysMem:
    """Flat backing store for the 128MB DRAM plus MMIO dispatch.

    ``bus`` is any object with ``mmio_read(pa, width)`` / ``mmio_write(pa,
    width, value)``; it is consulted for the timer, console and disk-control
    blocks.
    """

    def __init__(self, bus=None, dram: bytearray | None = None):
        self.dram = dram if dram is not None else bytearray(DRAM_SIZE)
        self.bus = bus

    def clone(self, bus=None) -> "PhysMem":
        return PhysMem(bus, bytearray(self.dram))

    @staticmethod
    def is_mmio(pa: int) -> bool:
        return (TIMER_BASE <= pa < TIMER_BASE + TIMER_SIZE
                or CONSOLE_BASE <= pa < CONSOLE_BASE + MMIO_BLOCK_SIZE
                or DISK_CTRL_BASE <= pa < DISK_CTRL_BASE + MMIO_BLOCK_SIZE)

    def is_mapped(self, pa: int) -> bool:
        return 0 <= pa - DRAM_BASE < DRAM_SIZE or self.is_mmio(pa)

    def read(self, pa: int, width: int) -> int:
        off = pa - DRAM_BASE
        if 0 <= off <= DRAM_SIZE - width:
            return _FMT[width].unpack_from(self.dram, off)[0]
        if self.is_mmio(pa) and self.bus is not None:
            return self.bus.mmio_read(pa, width) & ((1 << (8 * width)) - 1)
        raise AccessFault(pa)

    def write(self, pa: int, width: int, value: int) -> None:
        off = pa - DRAM_BASE
        if 0 <= off <= DRAM_SIZE - width:
            _FMT[width].pack_into(self.dram, off, value & ((1 << (8 * width)) - 1))
            return
        if self.is_mmio(pa) and self.bus is not None:
            self.bus.mmio_write(pa, width, value & ((1 << (8 * width)) - 1))
            return
        raise AccessFault(pa)

    def read_word(self, pa: int) -> int:
        return self.read(pa, 4)

    def write_word(self, pa: int, value: int) -> None:
        self.write(pa, 4, value)

    def load(self, pa: int, data: bytes) -> None:
        off = pa - DRAM_BASE
        if off < 0 or off + len(data) > DRAM_SIZE:
            raise AccessFault(pa)
        self.dram[off:off + len(data)] = data


class Cache:
    """Direct-mapped write-through cache, 8192 lines of 16 bytes.

    Stores never update a line; a store to a cached line invalidates it.
    """

    def __init__(self):
        self.tags = [-1] * CACHE_LINES
        self.data: list[bytes | None] = [None] * CACHE_LINES
        self.accesses = 0
        self.hits = 0

    def invalidate(self, pa: int) -> None:
        i = (pa >> 4) & (CACHE_LINES - 1)
        if self.tags[i] == pa >> 17:
            self.tags[i] = -1
            self.data[i] = None

    def invalidate_range(self, pa: int, length: int) -> None:
        for line in range(pa & ~15, pa + length, LINE_SIZE):
            self.invalidate(line)

    def flush(self) -> None:
        self.tags = [-1] * CACHE_LINES
        self.data = [None] * CACHE_LINES

    def overlay(self, mem: PhysMem) -> bytearray:
        """Backing store with every valid line written over it."""
        image = bytearray(mem.dram)
        for i, tag in enumerate(self.tags):
            if tag >= 0:
                pa = (tag << 17) | (i << 4)
                off = pa - DRAM_BASE
                image[off:off + LINE_SIZE] = self.data[i]
        return image


class FetchBuffer:
    """Holds the upper half-word of the previous 4-byte fetch window."""

    __slots__ = ("valid", "half", "holder")

    def __init__(self):
        self.valid = False
        self.half = 0
        self.holder = 0

    def invalidate(self) -> None:
        self.valid = False


class CacheStats(NamedTuple):
    accesses: int
    hits: int
    hit_rate: float | None
    mpki: float | None


def cache_stats(accesses: int, hits: int, instructions: int) -> CacheStats:
    """Hit rate (fraction) and misses per thousand instructions; ``None`` when undefined."""
    rate = hits / accesses if accesses else None
    mpki = (accesses - hits) * 1000 / instructions if instructions else None
    return CacheStats(accesses, hits, rate, mpki)


class MemSystem:
    """Timing-side view of physical memory.

    Every access adds its latency to ``cycles``; the owner reads and clears
    the accumulator.  ``fetch_accesses`` counts cache accesses made by
    instruction fetch.
    """

    def __init__(self, phys: PhysMem, *, cache_enabled: bool = True, buffer_enabled: bool = True,
                 miss_penalty: int = 16, store_latency: int = 1, mmio_latency: int = 4):
        self.phys = phys
        self.cache = Cache()
        self.fbuf = FetchBuffer()
        self.cache_enabled = cache_enabled
        self.buffer_enabled = buffer_enabled
        self.miss_penalty = miss_penalty
        self.store_latency = store_latency
        self.mmio_latency = mmio_latency
        self.cycles = 0
        self.fetch_accesses = 0
        self.straddles = 0
        self.dram_reads = 0
        self.external_log: list[tuple[int, bytes]] | None = None

    # -- line access --------------------------------------------------
    def _line(self, pa: int) -> bytes:
        off = (pa & ~15) - DRAM_BASE
        if not 0 <= off < DRAM_SIZE:
            raise AccessFault(pa)
        if not self.cache_enabled:
            self.cycles += self.miss_penalty + 1
            self.dram_reads += 1
            return bytes(self.phys.dram[off:off + LINE_SIZE])
        cache = self.cache
        cache.accesses += 1
        i = (pa >> 4) & (CACHE_LINES - 1)
        tag = pa >> 17
        if cache.tags[i] == tag:
            cache.hits += 1
            self.cycles += 1
            return cache.data[i]
        data = bytes(self.phys.dram[off:off + LINE_SIZE])
        cache.tags[i] = tag
        cache.data[i] = data
        self.dram_reads += 1
        self.cycles += self.miss_penalty + 1
        return data

    # -- data side ----------------------------------------------------
    def read(self, pa: int, width: int) -> int:
        if 0 <= pa - DRAM_BASE < DRAM_SIZE:
            if (pa & 15) + width > LINE_SIZE:
                raise AccessFault(pa)  # callers split or trap misaligned accesses
            return _FMT[width].unpack_from(self._line(pa), pa & 15)[0]
        if self.phys.is_mmio(pa):
            self.cycles += self.mmio_latency
            return self.phys.read(pa, width)
        raise AccessFault(pa)

    def write(self, pa: int, width: int, value: int, external: bool = False) -> None:
        if 0 <= pa - DRAM_BASE < DRAM_SIZE:
            self.phys.write(pa, width, value)
            self.cache.invalidate(pa)
            self.fbuf.valid = False
            self.cycles += self.store_latency
            if external and self.external_log is not None:
                self.external_log.append((pa, self.phys.dram[pa - DRAM_BASE:pa - DRAM_BASE + width]))
            return
        if self.phys.is_mmio(pa):
            self.cycles += self.mmio_latency
            self.fbuf.valid = False
            self.phys.write(pa, width, value)
            return
        raise AccessFault(pa)

    def read_word(self, pa: int) -> int:
        return self.read(pa, 4)

    def write_word(self, pa: int, value: int) -> None:
        self.write(pa, 4, value)

    def dma_write(self, pa: int, data: bytes) -> None:
        """Device-side bulk write that keeps the cache and fetch buffer coherent."""
        self.phys.load(pa, data)
        self.cache.invalidate_range(pa, len(data))
        self.fbuf.valid = False
        if self.external_log is not None:
            self.external_log.append((pa, bytes(data)))

    def dma_read(self, pa: int, length: int) -> bytes:
        off = pa - DRAM_BASE
        if off < 0 or off + length > DRAM_SIZE:
            raise AccessFault(pa)
        return bytes(self.phys.dram[off:off + length])

    # -- instruction side ---------------------------------------------
    def fetch_half(self, pa: int) -> int:
        """One half-word of instruction, served by the fetch buffer when it holds ``pa``."""
        fb = self.fbuf
        if self.buffer_enabled and fb.valid and fb.holder == pa:
            return fb.half
        self.fetch_accesses += 1
        return _U16.unpack_from(self._line(pa), pa & 15)[0]

    def latch(self, pa: int, half: int) -> None:
        fb = self.fbuf
        fb.valid = True
        fb.half = half
        fb.holder = pa

    def fetch(self, pa: int) -> int:
        """4-byte window at ``pa`` using the cache and the fetch buffer."""
        if not 0 <= pa - DRAM_BASE < DRAM_SIZE:
            raise AccessFault(pa)
        off = pa & 15
        if off != 14:
            self.fetch_accesses += 1
            window = _U32.unpack_from(self._line(pa), off)[0]
        else:
            self.straddles += 1
            lo = self.fetch_half(pa)
            self.fetch_accesses += 1
            hi = _U16.unpack_from(self._line(pa + 2), 0)[0]
            window = lo | (hi << 16)
        self.latch(pa + 2, window >> 16)
        return window

    # -- (value, cycles) wrappers -------------------------------------------
    def mem_read(self, pa: int, width: int) -> tuple[int, int]:
        start = self.cycles
        if width == LINE_SIZE:
            data = self._line(pa)
            return int.from_bytes(data, "little"), self.cycles - start
        return self.read(pa, width), self.cycles - start

    def mem_write(self, pa: int, width: int, value: int) -> int:
        start = self.cycles
        self.write(pa, width, value)
        return self.cycles - start

    def fetch_window(self, pc: int) -> tuple[int, int, int]:
        start_c, start_a = self.cycles, self.fetch_accesses
        window = self.fetch(pc)
        return window, self.fetch_accesses - start_a, self.cycles - start_c

    def stats(self, instructions: int) -> CacheStats:
        return cache_stats(self.cache.accesses, self.cache.hits, instructions)
