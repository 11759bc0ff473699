"""STM32F0xx memory map: flash, its boot alias at 0, and SRAM.

Every access is classified by region, direction and purpose so the counter
module can tell RAM data reads, RAM writes and flash data reads apart.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import (
    FlashWriteFault,
    MalformedImage,
    MemoryFault,
    SegmentOutOfRange,
    UnalignedAccess,
)

FLASH_BASE = 0x0800_0000
ALIAS_BASE = 0x0000_0000
RAM_BASE = 0x2000_0000


class Region(enum.Enum):
    FLASH = "flash"
    RAM = "ram"
    ALIAS = "alias"  # boot alias of flash; counts as flash everywhere


class Direction(enum.Enum):
    READ = "read"
    WRITE = "write"


class Purpose(enum.Enum):
    FETCH = "fetch"
    DATA = "data"


@dataclass(frozen=True, slots=True)
class AccessClass:
    region: Region
    direction: Direction
    purpose: Purpose

    def __post_init__(self):
        if self.purpose is Purpose.FETCH and self.direction is not Direction.READ:
            raise ValueError("instruction fetches are always reads")

    @property
    def is_flash(self) -> bool:
        return self.region is not Region.RAM


_CLASSES = {
    (r, d, p): AccessClass(r, d, p)
    for r in Region
    for d in Direction
    for p in Purpose
    if not (p is Purpose.FETCH and d is Direction.WRITE)
}


def _check_size(name, size):
    if size < 1024 or size & (size - 1):
        raise ValueError(f"{name} must be a power of two >= 1 KiB, got {size}")


class MemoryMap:
    """Flash + alias + RAM.  Unwritten RAM reads as zero."""

    def __init__(self, flash_size: int = 64 * 1024, ram_size: int = 8 * 1024):
        _check_size("flash_size", flash_size)
        _check_size("ram_size", ram_size)
        self.flash_base = FLASH_BASE
        self.alias_base = ALIAS_BASE
        self.ram_base = RAM_BASE
        self.flash_size = flash_size
        self.ram_size = ram_size
        self.flash = bytearray(b"\xff" * flash_size)  # erased flash
        self.ram = bytearray(ram_size)

    # -- classification ----------------------------------------------------

    def region_of(self, address: int, size: int = 1) -> Region | None:
        end = address + size
        if self.flash_base <= address and end <= self.flash_base + self.flash_size:
            return Region.FLASH
        if self.ram_base <= address and end <= self.ram_base + self.ram_size:
            return Region.RAM
        if self.alias_base <= address and end <= self.alias_base + self.flash_size:
            return Region.ALIAS
        return None

    def classify(self, address: int, direction: Direction, purpose: Purpose,
                 size: int = 1) -> AccessClass:
        region = self.region_of(address, size)
        if region is None:
            raise MemoryFault(address)
        return _CLASSES[region, direction, purpose]

    def _locate(self, address, size):
        region = self.region_of(address, size)
        if region is None:
            raise MemoryFault(address)
        if region is Region.RAM:
            return region, self.ram, address - self.ram_base
        if region is Region.FLASH:
            return region, self.flash, address - self.flash_base
        return region, self.flash, address - self.alias_base

    # -- accesses -------------------------------------------------------------

    def read(self, address: int, size: int, purpose: Purpose = Purpose.DATA):
        """Return ``(value, AccessClass)`` for a little-endian read."""
        if size not in (1, 2, 4):
            raise ValueError(f"bad access size {size}")
        region, store, off = self._locate(address, size)
        if address & (size - 1):
            raise UnalignedAccess(address, size)
        value = int.from_bytes(store[off:off + size], "little")
        return value, _CLASSES[region, Direction.READ, purpose]

    def write(self, address: int, size: int, value: int) -> AccessClass:
        if size not in (1, 2, 4):
            raise ValueError(f"bad access size {size}")
        region, store, off = self._locate(address, size)
        if region is not Region.RAM:
            raise FlashWriteFault(address)
        if address & (size - 1):
            raise UnalignedAccess(address, size)
        store[off:off + size] = (value & ((1 << (8 * size)) - 1)).to_bytes(size, "little")
        return _CLASSES[region, Direction.WRITE, Purpose.DATA]

    def peek(self, address: int, size: int) -> int:
        """Side-effect free read used by analysis code; no alignment check."""
        _, store, off = self._locate(address, size)
        return int.from_bytes(store[off:off + size], "little")

    def load(self, address: int, data: bytes) -> None:
        """Place raw bytes, bypassing flash write protection."""
        if not data:
            return
        region = self.region_of(address, len(data))
        if region is None:
            raise SegmentOutOfRange(address, len(data))
        _, store, off = self._locate(address, len(data))
        store[off:off + len(data)] = data


@dataclass(frozen=True)
class LoadReport:
    segments: tuple[tuple[int, int], ...]   # (address, size)
    entry: int | None
    initial_sp: int | None


def _vector_sp(mem: MemoryMap, segments) -> int | None:
    for addr, size in segments:
        if addr <= mem.flash_base and mem.flash_base + 8 <= addr + size:
            return mem.peek(mem.flash_base, 4)
    return None


def load_raw(mem: MemoryMap, data: bytes, base: int = FLASH_BASE) -> LoadReport:
    mem.load(base, bytes(data))
    segments = ((base, len(data)),)
    entry = None
    sp = _vector_sp(mem, segments)
    if sp is not None:
        entry = mem.peek(mem.flash_base + 4, 4) & ~1
    return LoadReport(segments, entry, sp)


_ELF_HDR = struct.Struct("<16sHHIIIIIHHHHHH")
_PHDR = struct.Struct("<IIIIIIII")
PT_LOAD = 1
EM_ARM = 40


def load_elf(mem: MemoryMap, data: bytes) -> LoadReport:
    """Load a little-endian ELF32 executable.  Segments go to their load
    (physical) address, so initialised data sits in flash for startup code to
    copy, as on hardware."""
    if len(data) < _ELF_HDR.size:
        raise MalformedImage("file too short for an ELF header")
    (ident, e_type, machine, _version, entry, phoff, _shoff, _flags,
     _ehsize, phentsize, phnum, *_rest) = _ELF_HDR.unpack_from(data)
    if ident[:4] != b"\x7fELF":
        raise MalformedImage("bad ELF magic")
    if ident[4] != 1 or ident[5] != 1:
        raise MalformedImage("only little-endian ELF32 is supported")
    if machine != EM_ARM:
        raise MalformedImage(f"not an ARM executable (e_machine={machine})")
    if phnum and phentsize < _PHDR.size:
        raise MalformedImage("bad program header size")
    segments = []
    for i in range(phnum):
        off = phoff + i * phentsize
        if off + _PHDR.size > len(data):
            raise MalformedImage("program header table truncated")
        p_type, p_offset, _vaddr, paddr, filesz, memsz, _pflags, _align = \
            _PHDR.unpack_from(data, off)
        if p_type != PT_LOAD or memsz == 0:
            continue
        if p_offset + filesz > len(data) or filesz > memsz:
            raise MalformedImage(f"segment {i} extends past end of file")
        if mem.region_of(paddr, memsz) is None:
            raise SegmentOutOfRange(paddr, memsz)
        payload = data[p_offset:p_offset + filesz]
        mem.load(paddr, payload)
        if memsz > filesz and mem.region_of(paddr) is Region.RAM:
            mem.load(paddr + filesz, bytes(memsz - filesz))
        segments.append((paddr, memsz))
    if not segments:
        raise MalformedImage("no loadable segments")
    segments = tuple(segments)
    return LoadReport(segments, entry & ~1, _vector_sp(mem, segments))


def load_image(mem: MemoryMap, data: bytes, base: int | None = None) -> LoadReport:
    """Load ELF when the magic matches, otherwise a raw image at ``base``."""
    if data[:4] == b"\x7fELF":
        return load_elf(mem, data)
    return load_raw(mem, data, FLASH_BASE if base is None else base)
