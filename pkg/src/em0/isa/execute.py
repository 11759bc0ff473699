"""Architectural semantics of the decoded ARMv6-M instructions."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..memory import AccessClass, Direction, MemoryMap, Purpose, Region
from .decode import Instruction

MASK = 0xFFFFFFFF
SP, LR, PC = 13, 14, 15


@dataclass
class MachineState:
    regs: list[int] = field(default_factory=lambda: [0] * 16)
    n: bool = False
    z: bool = False
    c: bool = False
    v: bool = False
    halted: bool = False
    instr_retired: int = 0

    @property
    def pc(self) -> int:
        return self.regs[PC]

    @property
    def sp(self) -> int:
        return self.regs[SP]

    @property
    def xpsr_flags(self) -> int:
        return (self.n << 31) | (self.z << 30) | (self.c << 29) | (self.v << 28)

    def snapshot(self) -> dict:
        names = [f"r{i}" for i in range(13)] + ["sp", "lr", "pc"]
        out = {name: value for name, value in zip(names, self.regs)}
        out.update(n=self.n, z=self.z, c=self.c, v=self.v)
        return out


@dataclass(frozen=True, slots=True)
class DataAccess:
    address: int
    size: int
    access: AccessClass

    @property
    def direction(self) -> Direction:
        return self.access.direction

    @property
    def region(self) -> Region:
        return self.access.region


@dataclass(frozen=True, slots=True)
class FetchAccess:
    address: int
    size: int
    access: AccessClass


@dataclass(frozen=True, slots=True)
class StepEvents:
    instruction: Instruction
    branch_taken: bool
    data_accesses: tuple[DataAccess, ...] = ()
    fetch_accesses: tuple[FetchAccess, ...] = ()


class _Bus:
    """Wraps the memory map and records every data access of one step."""

    __slots__ = ("mem", "log")

    def __init__(self, mem: MemoryMap):
        self.mem = mem
        self.log: list[DataAccess] = []

    def read(self, address, size):
        address &= MASK
        value, cls = self.mem.read(address, size, Purpose.DATA)
        self.log.append(DataAccess(address, size, cls))
        return value

    def write(self, address, size, value):
        address &= MASK
        cls = self.mem.write(address, size, value)
        self.log.append(DataAccess(address, size, cls))


# -- arithmetic helpers -----------------------------------------------------

def add_with_carry(x, y, carry):
    unsigned = x + y + carry
    result = unsigned & MASK
    sx = x - (1 << 32) if x & 0x80000000 else x
    sy = y - (1 << 32) if y & 0x80000000 else y
    signed = sx + sy + carry
    sr = result - (1 << 32) if result & 0x80000000 else result
    return result, result != unsigned, sr != signed


def _nz(st, result):
    st.n = bool(result & 0x80000000)
    st.z = result == 0


def _nzcv(st, result, c, v):
    st.n = bool(result & 0x80000000)
    st.z = result == 0
    st.c = c
    st.v = v


def _sx(value, bits):
    sign = 1 << (bits - 1)
    return ((value & (sign - 1)) - (value & sign)) & MASK


def cond_passed(st, cond):
    if cond == 0:
        return st.z
    if cond == 1:
        return not st.z
    if cond == 2:
        return st.c
    if cond == 3:
        return not st.c
    if cond == 4:
        return st.n
    if cond == 5:
        return not st.n
    if cond == 6:
        return st.v
    if cond == 7:
        return not st.v
    if cond == 8:
        return st.c and not st.z
    if cond == 9:
        return not st.c or st.z
    if cond == 10:
        return st.n == st.v
    if cond == 11:
        return st.n != st.v
    if cond == 12:
        return not st.z and st.n == st.v
    if cond == 13:
        return st.z or st.n != st.v
    return True


def _shift(kind, value, amount, carry_in):
    """Register-controlled shift; returns (result, carry)."""
    if amount == 0:
        return value, carry_in
    if kind == "lsl":
        if amount < 32:
            return (value << amount) & MASK, bool((value >> (32 - amount)) & 1)
        return 0, bool(value & 1) if amount == 32 else False
    if kind == "lsr":
        if amount < 32:
            return value >> amount, bool((value >> (amount - 1)) & 1)
        return 0, bool(value >> 31) if amount == 32 else False
    if kind == "asr":
        signed = value - (1 << 32) if value & 0x80000000 else value
        if amount < 32:
            return (signed >> amount) & MASK, bool((value >> (amount - 1)) & 1)
        return (MASK if signed < 0 else 0), bool(value >> 31)
    # ror
    amount &= 31
    if amount == 0:
        return value, bool(value >> 31)
    result = ((value >> amount) | (value << (32 - amount))) & MASK
    return result, bool(result >> 31)


def _reg(st, ins, r):
    """Register read where pc reads as the instruction address + 4."""
    return (ins.address + 4) & MASK if r == PC else st.regs[r]


# -- handlers ---------------------------------------------------------------
# Each handler returns the new pc when it redirects control flow, else None.

def _movs_reg(st, ins, bus):
    st.regs[ins.rd] = st.regs[ins.rm]
    _nz(st, st.regs[ins.rd])


def _shift_imm(kind):
    def handler(st, ins, bus):
        result, c = _shift(kind, st.regs[ins.rm], ins.imm, st.c)
        st.regs[ins.rd] = result
        _nz(st, result)
        st.c = c
    return handler


def _adds_reg(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], st.regs[ins.rm], 0)
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _subs_reg(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], ~st.regs[ins.rm] & MASK, 1)
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _adds_imm(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], ins.imm, 0)
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _subs_imm(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], ~ins.imm & MASK, 1)
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _movs_imm(st, ins, bus):
    st.regs[ins.rd] = ins.imm
    _nz(st, ins.imm)


def _cmp_imm(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], ~ins.imm & MASK, 1)
    _nzcv(st, r, c, v)


def _logic(fn):
    def handler(st, ins, bus):
        r = fn(st.regs[ins.rn], st.regs[ins.rm]) & MASK
        st.regs[ins.rd] = r
        _nz(st, r)
    return handler


def _shift_reg(kind):
    def handler(st, ins, bus):
        r, c = _shift(kind, st.regs[ins.rn], st.regs[ins.rm] & 0xFF, st.c)
        st.regs[ins.rd] = r
        _nz(st, r)
        st.c = c
    return handler


def _adcs(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], st.regs[ins.rm], int(st.c))
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _sbcs(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], ~st.regs[ins.rm] & MASK, int(st.c))
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _tst(st, ins, bus):
    _nz(st, st.regs[ins.rn] & st.regs[ins.rm])


def _rsbs(st, ins, bus):
    # RSBS Rd, Rm, #0 (the ALU group's source register is held in rm)
    r, c, v = add_with_carry(~st.regs[ins.rm] & MASK, 0, 1)
    st.regs[ins.rd] = r
    _nzcv(st, r, c, v)


def _cmp_reg(st, ins, bus):
    r, c, v = add_with_carry(_reg(st, ins, ins.rn), ~_reg(st, ins, ins.rm) & MASK, 1)
    _nzcv(st, r, c, v)


def _cmn(st, ins, bus):
    r, c, v = add_with_carry(st.regs[ins.rn], st.regs[ins.rm], 0)
    _nzcv(st, r, c, v)


def _muls(st, ins, bus):
    r = (st.regs[ins.rn] * st.regs[ins.rm]) & MASK
    st.regs[ins.rd] = r
    _nz(st, r)


def _mvns(st, ins, bus):
    r = ~st.regs[ins.rm] & MASK
    st.regs[ins.rd] = r
    _nz(st, r)


def _add_hi(st, ins, bus):
    r = (_reg(st, ins, ins.rn) + _reg(st, ins, ins.rm)) & MASK
    if ins.rd == PC:
        return r & ~1
    st.regs[ins.rd] = r


def _mov_hi(st, ins, bus):
    r = _reg(st, ins, ins.rm)
    if ins.rd == PC:
        return r & ~1
    st.regs[ins.rd] = r


def _bx(st, ins, bus):
    return _reg(st, ins, ins.rm) & ~1


def _blx(st, ins, bus):
    target = st.regs[ins.rm] & ~1
    st.regs[LR] = ((ins.address + 2) | 1) & MASK
    return target


def _ldr_lit(st, ins, bus):
    st.regs[ins.rd] = bus.read(((ins.address + 4) & ~3) + ins.imm, 4)


def _load(size, signed, offset_reg):
    def handler(st, ins, bus):
        off = st.regs[ins.rm] if offset_reg else ins.imm
        v = bus.read(st.regs[ins.rn] + off, size)
        st.regs[ins.rd] = _sx(v, 8 * size) if signed else v
    return handler


def _store(size, offset_reg):
    def handler(st, ins, bus):
        off = st.regs[ins.rm] if offset_reg else ins.imm
        bus.write(st.regs[ins.rn] + off, size, st.regs[ins.rd])
    return handler


def _adr(st, ins, bus):
    st.regs[ins.rd] = (((ins.address + 4) & ~3) + ins.imm) & MASK


def _add_rd_sp(st, ins, bus):
    st.regs[ins.rd] = (st.regs[SP] + ins.imm) & MASK


def _add_sp(st, ins, bus):
    st.regs[SP] = (st.regs[SP] + ins.imm) & MASK


def _sub_sp(st, ins, bus):
    st.regs[SP] = (st.regs[SP] - ins.imm) & MASK


def _extend(bits, signed):
    def handler(st, ins, bus):
        v = st.regs[ins.rm] & ((1 << bits) - 1)
        st.regs[ins.rd] = _sx(v, bits) if signed else v
    return handler


def _rev(st, ins, bus):
    st.regs[ins.rd] = int.from_bytes(st.regs[ins.rm].to_bytes(4, "little"), "big")


def _rev16(st, ins, bus):
    v = st.regs[ins.rm]
    st.regs[ins.rd] = ((v & 0x00FF00FF) << 8) | ((v >> 8) & 0x00FF00FF)


def _revsh(st, ins, bus):
    v = st.regs[ins.rm]
    st.regs[ins.rd] = _sx(((v & 0xFF) << 8) | ((v >> 8) & 0xFF), 16)


def _push(st, ins, bus):
    sp = (st.regs[SP] - 4 * len(ins.reglist)) & MASK
    addr = sp
    for r in ins.reglist:
        bus.write(addr, 4, st.regs[r])
        addr += 4
    st.regs[SP] = sp


def _pop(st, ins, bus):
    addr = st.regs[SP]
    values = []
    for _ in ins.reglist:
        values.append(bus.read(addr, 4))
        addr += 4
    target = None
    for r, v in zip(ins.reglist, values):
        if r == PC:
            target = v & ~1
        else:
            st.regs[r] = v
    st.regs[SP] = addr & MASK
    return target


def _stm(st, ins, bus):
    addr = st.regs[ins.rn]
    for r in ins.reglist:
        bus.write(addr, 4, st.regs[r])
        addr += 4
    st.regs[ins.rn] = addr & MASK


def _ldm(st, ins, bus):
    addr = st.regs[ins.rn]
    values = []
    for _ in ins.reglist:
        values.append(bus.read(addr, 4))
        addr += 4
    for r, v in zip(ins.reglist, values):
        st.regs[r] = v
    if ins.rn not in ins.reglist:
        st.regs[ins.rn] = addr & MASK


def _b_cond(st, ins, bus):
    if cond_passed(st, ins.cond):
        return (ins.address + 4 + ins.imm) & MASK


def _b(st, ins, bus):
    return (ins.address + 4 + ins.imm) & MASK


def _bl(st, ins, bus):
    st.regs[LR] = ((ins.address + 4) | 1) & MASK
    return (ins.address + 4 + ins.imm) & MASK


def _nop(st, ins, bus):
    return None


def _bkpt(st, ins, bus):
    st.halted = True


HANDLERS = {
    "movs_reg": _movs_reg,
    "lsls_imm": _shift_imm("lsl"), "lsrs_imm": _shift_imm("lsr"), "asrs_imm": _shift_imm("asr"),
    "adds_reg": _adds_reg, "subs_reg": _subs_reg,
    "adds_imm3": _adds_imm, "subs_imm3": _subs_imm,
    "movs_imm": _movs_imm, "cmp_imm": _cmp_imm,
    "adds_imm8": _adds_imm, "subs_imm8": _subs_imm,
    "ands": _logic(lambda a, b: a & b), "eors": _logic(lambda a, b: a ^ b),
    "orrs": _logic(lambda a, b: a | b), "bics": _logic(lambda a, b: a & ~b),
    "lsls_reg": _shift_reg("lsl"), "lsrs_reg": _shift_reg("lsr"),
    "asrs_reg": _shift_reg("asr"), "rors": _shift_reg("ror"),
    "adcs": _adcs, "sbcs": _sbcs, "tst": _tst, "rsbs": _rsbs,
    "cmp_reg": _cmp_reg, "cmn": _cmn, "muls": _muls, "mvns": _mvns,
    "add_hi": _add_hi, "cmp_hi": _cmp_reg, "mov_hi": _mov_hi,
    "bx": _bx, "blx": _blx,
    "ldr_lit": _ldr_lit,
    "str_reg": _store(4, True), "strh_reg": _store(2, True), "strb_reg": _store(1, True),
    "ldrsb_reg": _load(1, True, True), "ldr_reg": _load(4, False, True),
    "ldrh_reg": _load(2, False, True), "ldrb_reg": _load(1, False, True),
    "ldrsh_reg": _load(2, True, True),
    "str_imm": _store(4, False), "ldr_imm": _load(4, False, False),
    "strb_imm": _store(1, False), "ldrb_imm": _load(1, False, False),
    "strh_imm": _store(2, False), "ldrh_imm": _load(2, False, False),
    "str_sp": _store(4, False), "ldr_sp": _load(4, False, False),
    "adr": _adr, "add_rd_sp": _add_rd_sp, "add_sp": _add_sp, "sub_sp": _sub_sp,
    "sxth": _extend(16, True), "sxtb": _extend(8, True),
    "uxth": _extend(16, False), "uxtb": _extend(8, False),
    "rev": _rev, "rev16": _rev16, "revsh": _revsh,
    "push": _push, "pop": _pop, "stm": _stm, "ldm": _ldm,
    "b_cond": _b_cond, "b": _b, "bl": _bl, "bkpt": _bkpt,
    # system instructions retire as no-ops: no exception or privilege model
    "cps": _nop, "nop": _nop, "yield": _nop, "wfe": _nop, "wfi": _nop, "sev": _nop,
    "svc": _nop, "msr": _nop, "mrs": _nop, "dmb": _nop, "dsb": _nop, "isb": _nop,
}


def execute(state: MachineState, instr: Instruction, mem: MemoryMap) -> StepEvents:
    """Apply ``instr`` to ``state``.  Memory faults propagate to the caller."""
    bus = _Bus(mem)
    new_pc = HANDLERS[instr.op](state, instr, bus)
    fetch_cls = mem.classify(instr.address, Direction.READ, Purpose.FETCH, instr.width)
    fetch = (FetchAccess(instr.address, instr.width, fetch_cls),)
    if new_pc is None:
        state.regs[PC] = (instr.address + instr.width) & MASK
        taken = False
    else:
        state.regs[PC] = new_pc & MASK
        taken = True
    return StepEvents(instr, taken, tuple(bus.log), fetch)

