import pytest
from hypothesis import given, strategies as st

from elfutil import make_elf
from em0.errors import (FlashWriteFault, MalformedImage, MemoryFault, SegmentOutOfRange,
                        UnalignedAccess)
from em0.memory import (AccessClass, Direction, MemoryMap, Purpose, Region, load_elf,
                        load_image, load_raw)

RAM = 0x2000_0000
FLASH = 0x0800_0000


@pytest.fixture
def mem():
    return MemoryMap()


def test_read_after_write(mem):
    mem.write(RAM, 4, 0xDEADBEEF)
    value, cls = mem.read(RAM, 4, Purpose.DATA)
    assert value == 0xDEADBEEF
    assert cls == AccessClass(Region.RAM, Direction.READ, Purpose.DATA)


def test_alias_fetch_matches_flash(mem):
    mem.load(FLASH, bytes(range(64)))
    a, acls = mem.read(0x10, 2, Purpose.FETCH)
    f, fcls = mem.read(FLASH + 0x10, 2, Purpose.FETCH)
    assert a == f == 0x1110
    assert acls.is_flash and fcls.region is Region.FLASH


def test_peripheral_space_unmapped(mem):
    with pytest.raises(MemoryFault):
        mem.read(0x4000_0000, 4)


def test_write_ram(mem):
    cls = mem.write(RAM + 4, 4, 7)
    assert cls == AccessClass(Region.RAM, Direction.WRITE, Purpose.DATA)
    assert mem.read(RAM + 4, 4)[0] == 7


@pytest.mark.parametrize("addr", [FLASH, 0x0])
def test_flash_is_read_only(mem, addr):
    with pytest.raises(FlashWriteFault):
        mem.write(addr, 4, 0)


def test_one_past_ram(mem):
    with pytest.raises(MemoryFault) as exc:
        mem.write(RAM + mem.ram_size, 1, 0)
    assert not isinstance(exc.value, FlashWriteFault)


def test_straddling_end_of_ram(mem):
    with pytest.raises(MemoryFault):
        mem.read(RAM + mem.ram_size - 2, 4)


@pytest.mark.parametrize("size,addr", [(2, RAM + 1), (4, RAM + 2), (4, RAM + 1)])
def test_unaligned(mem, size, addr):
    with pytest.raises(UnalignedAccess):
        mem.read(addr, size)
    with pytest.raises(UnalignedAccess):
        mem.write(addr, size, 0)


def test_fetch_cannot_be_a_write():
    with pytest.raises(ValueError):
        AccessClass(Region.RAM, Direction.WRITE, Purpose.FETCH)


@pytest.mark.parametrize("flash,ram", [(1000, 8192), (65536, 512), (3 * 1024, 8192)])
def test_sizes_must_be_powers_of_two(flash, ram):
    with pytest.raises(ValueError):
        MemoryMap(flash_size=flash, ram_size=ram)


def test_erased_flash_and_zeroed_ram(mem):
    assert mem.read(FLASH + 0x100, 4)[0] == 0xFFFFFFFF
    assert mem.read(RAM + 0x100, 4)[0] == 0


def test_configurable_sizes():
    m = MemoryMap(flash_size=128 * 1024, ram_size=16 * 1024)
    m.write(RAM + 16 * 1024 - 4, 4, 1)
    assert m.region_of(FLASH + 100 * 1024) is Region.FLASH
    assert m.region_of(RAM + 16 * 1024) is None


# -- properties ------------------------------------------------------------

mapped = st.one_of(
    st.integers(FLASH, FLASH + 0xFFFF),
    st.integers(0, 0xFFFF),
    st.integers(RAM, RAM + 0x1FFF),
)


@given(mapped, st.sampled_from(list(Direction)), st.sampled_from(list(Purpose)))
def test_classification_is_pure(addr, direction, purpose):
    if purpose is Purpose.FETCH and direction is Direction.WRITE:
        return
    m1, m2 = MemoryMap(), MemoryMap()
    m2.write(RAM, 4, 123)
    a = m1.classify(addr, direction, purpose)
    assert a == m1.classify(addr, direction, purpose) == m2.classify(addr, direction, purpose)
    expected = Region.RAM if addr >= RAM else Region.FLASH if addr >= FLASH else Region.ALIAS
    assert a.region is expected


@given(st.binary(min_size=1, max_size=256), st.integers(0, 0xFFFF - 256))
def test_alias_transparency(blob, offset):
    m = MemoryMap()
    m.load(FLASH + offset, blob)
    for i in range(len(blob)):
        assert m.peek(offset + i, 1) == m.peek(FLASH + offset + i, 1) == blob[i]


@given(st.sampled_from([1, 2, 4]), st.integers(0, 0x1FFF), st.integers(0, 2**32 - 1))
def test_ram_round_trip(size, offset, value):
    offset -= offset % size
    if offset + size > 0x2000:
        return
    m = MemoryMap()
    m.write(RAM + offset, size, value)
    assert m.read(RAM + offset, size)[0] == value & ((1 << 8 * size) - 1)


# -- loading ---------------------------------------------------------------

def test_raw_read_back(mem):
    load_raw(mem, b"\x01\x02\x03\x04", FLASH)
    assert bytes(mem.peek(FLASH + i, 1) for i in range(4)) == b"\x01\x02\x03\x04"


def test_raw_with_vector_table(mem):
    rep = load_raw(mem, bytes.fromhex("00200020" "09000008" "00be"))
    assert rep.initial_sp == 0x2000_2000 and rep.entry == 0x0800_0008


def test_raw_into_ram_has_no_vectors(mem):
    rep = load_image(mem, b"\x00\xbe", base=RAM)
    assert rep.entry is None and rep.initial_sp is None
    assert mem.peek(RAM, 2) == 0xBE00


def test_raw_out_of_range(mem):
    with pytest.raises(SegmentOutOfRange):
        load_raw(mem, bytes(16), 0x6000_0000)


def test_elf_entry_clears_thumb_bit(mem):
    img = make_elf([(FLASH, bytes.fromhex("00200020" "09000008" "00be"), None)], 0x0800_0009)
    rep = load_image(mem, img)
    assert rep.entry == 0x0800_0008
    assert rep.segments == ((FLASH, 10),)
    assert rep.initial_sp == 0x2000_2000


def test_elf_bss_zero_filled(mem):
    mem.write(RAM + 8, 4, 0xFFFFFFFF)
    img = make_elf([(FLASH, b"\x00\xbe", None), (RAM, b"\x01\x02\x03\x04", 16)], FLASH | 1)
    load_elf(mem, img)
    assert mem.peek(RAM, 4) == 0x04030201
    assert mem.peek(RAM + 8, 4) == 0


def test_elf_segment_out_of_range(mem):
    img = make_elf([(0x6000_0000, b"\x00\xbe", None)], 0x6000_0001)
    with pytest.raises(SegmentOutOfRange):
        load_elf(mem, img)


@pytest.mark.parametrize("mutate", [
    lambda b: b[:20],                                # truncated
    lambda b: b[:5] + b"\x02" + b[6:],               # big-endian
    lambda b: b[:18] + b"\x03\x00" + b[20:],         # x86
])
def test_malformed_elf(mem, mutate):
    img = make_elf([(FLASH, b"\x00\xbe", None)], FLASH | 1)
    with pytest.raises(MalformedImage):
        load_elf(mem, mutate(img))
