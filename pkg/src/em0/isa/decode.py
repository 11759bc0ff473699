"""ARMv6-M Thumb decoder.

All 16-bit Thumb-1 encodings of ARMv6-M are decoded, plus the 32-bit BL and
the 32-bit system instructions (MSR, MRS, DMB, DSB, ISB).  Anything else
raises :class:`UndefinedEncoding`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

from ..errors import UndefinedEncoding


class Kind(enum.Enum):
    DATA = "data-processing"
    MULS = "muls"
    LOAD = "load"
    STORE = "store"
    BRANCH_COND = "branch-conditional"
    BRANCH = "branch-unconditional"
    BL = "bl"
    BX = "bx/blx"
    PUSH_POP = "push/pop"
    MISC = "misc"


COND_NAMES = ("EQ", "NE", "CS", "CC", "MI", "PL", "VS", "VC",
              "HI", "LS", "GE", "LT", "GT", "LE")
REG_NAMES = tuple(f"r{i}" for i in range(13)) + ("sp", "lr", "pc")


@dataclass(frozen=True, slots=True)
class Instruction:
    address: int
    width: int
    kind: Kind
    op: str            # handler key, e.g. "adds_imm3"
    mnemonic: str      # architectural name, e.g. "ADDS"
    raw: int
    rd: int = 0
    rn: int = 0
    rm: int = 0
    imm: int = 0
    reglist: tuple[int, ...] = ()
    cond: int = 14

    @property
    def writes_pc(self) -> bool:
        if self.op in ("add_hi", "mov_hi"):
            return self.rd == 15
        return self.op == "pop" and 15 in self.reglist

    @property
    def is_control(self) -> bool:
        """True for every instruction that can redirect the pc."""
        return self.kind in (Kind.BRANCH_COND, Kind.BRANCH, Kind.BL, Kind.BX) \
            or self.writes_pc

    @property
    def branch_target(self) -> int | None:
        """Static target of a direct branch (B, B<c>, BL)."""
        if self.op in ("b", "b_cond", "bl"):
            return (self.address + 4 + self.imm) & 0xFFFFFFFF
        return None

    def __str__(self):
        return disassemble(self)


def _sx(value, bits):
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


def _ins(address, raw, kind, op, mnemonic, width=2, **kw):
    return Instruction(address, width, kind, op, mnemonic, raw, **kw)


_ALU = (
    ("ands", "ANDS"), ("eors", "EORS"), ("lsls_reg", "LSLS"), ("lsrs_reg", "LSRS"),
    ("asrs_reg", "ASRS"), ("adcs", "ADCS"), ("sbcs", "SBCS"), ("rors", "RORS"),
    ("tst", "TST"), ("rsbs", "RSBS"), ("cmp_reg", "CMP"), ("cmn", "CMN"),
    ("orrs", "ORRS"), ("muls", "MULS"), ("bics", "BICS"), ("mvns", "MVNS"),
)

_LDST_REG = (
    ("str_reg", "STR", Kind.STORE), ("strh_reg", "STRH", Kind.STORE),
    ("strb_reg", "STRB", Kind.STORE), ("ldrsb_reg", "LDRSB", Kind.LOAD),
    ("ldr_reg", "LDR", Kind.LOAD), ("ldrh_reg", "LDRH", Kind.LOAD),
    ("ldrb_reg", "LDRB", Kind.LOAD), ("ldrsh_reg", "LDRSH", Kind.LOAD),
)

_HINTS = {0: ("nop", "NOP"), 1: ("yield", "YIELD"), 2: ("wfe", "WFE"),
          3: ("wfi", "WFI"), 4: ("sev", "SEV")}


def is_wide_prefix(hw: int) -> bool:
    """True when ``hw`` is the first halfword of a 32-bit encoding."""
    return (hw >> 11) in (0b11101, 0b11110, 0b11111)


def decode(data: bytes, address: int) -> Instruction:
    """Decode the instruction held in ``data`` (little-endian) at ``address``."""
    if address & 1:
        raise ValueError(f"instruction address {address:#x} is not halfword aligned")
    if len(data) < 2:
        raise ValueError("need at least two bytes")
    hw = data[0] | (data[1] << 8)
    if is_wide_prefix(hw):
        if len(data) < 4:
            # no second halfword available; only a real 32-bit decode can succeed
            if (hw >> 11) == 0b11110:
                raise ValueError("32-bit encoding needs four bytes")
            raise UndefinedEncoding(address, hw)
        return decode_wide(hw, data[2] | (data[3] << 8), address)
    return decode16(hw, address)


@lru_cache(maxsize=65536)
def decode_wide(hw1: int, hw2: int, address: int) -> Instruction:
    raw = (hw1 << 16) | hw2
    if (hw1 >> 11) == 0b11110 and (hw2 >> 14) == 0b11:
        if hw2 & 0x1000:
            s = (hw1 >> 10) & 1
            i1 = 1 - (((hw2 >> 13) & 1) ^ s)
            i2 = 1 - (((hw2 >> 11) & 1) ^ s)
            imm = (s << 24) | (i1 << 23) | (i2 << 22) | ((hw1 & 0x3FF) << 12) \
                | ((hw2 & 0x7FF) << 1)
            return _ins(address, raw, Kind.BL, "bl", "BL", 4, imm=_sx(imm, 25))
    elif (hw1 >> 11) == 0b11110 and (hw2 >> 14) == 0b10 and not hw2 & 0x1000:
        if (hw1 & 0xFFF0) == 0xF380 and (hw2 & 0xFF00) == 0x8800:
            return _ins(address, raw, Kind.MISC, "msr", "MSR", 4,
                        rn=hw1 & 0xF, imm=hw2 & 0xFF)
        if hw1 == 0xF3EF and (hw2 & 0xF000) == 0x8000:
            return _ins(address, raw, Kind.MISC, "mrs", "MRS", 4,
                        rd=(hw2 >> 8) & 0xF, imm=hw2 & 0xFF)
        if hw1 == 0xF3BF and (hw2 & 0xFF00) == 0x8F00:
            op = (hw2 >> 4) & 0xF
            names = {4: ("dsb", "DSB"), 5: ("dmb", "DMB"), 6: ("isb", "ISB")}
            if op in names:
                key, name = names[op]
                return _ins(address, raw, Kind.MISC, key, name, 4, imm=hw2 & 0xF)
    raise UndefinedEncoding(address, raw)


@lru_cache(maxsize=65536 * 4)
def decode16(hw: int, address: int) -> Instruction:
    top = hw >> 11
    rd = hw & 7
    rn = (hw >> 3) & 7

    if top <= 0b00010:                      # shift by immediate
        imm5 = (hw >> 6) & 0x1F
        if top == 0:
            if imm5 == 0:
                return _ins(address, hw, Kind.DATA, "movs_reg", "MOVS", rd=rd, rm=rn)
            return _ins(address, hw, Kind.DATA, "lsls_imm", "LSLS", rd=rd, rm=rn, imm=imm5)
        op, name = ("lsrs_imm", "LSRS") if top == 1 else ("asrs_imm", "ASRS")
        return _ins(address, hw, Kind.DATA, op, name, rd=rd, rm=rn, imm=imm5 or 32)

    if top == 0b00011:                      # add/sub register or imm3
        sub = (hw >> 9) & 3
        rm = (hw >> 6) & 7
        op, name = [("adds_reg", "ADDS"), ("subs_reg", "SUBS"),
                    ("adds_imm3", "ADDS"), ("subs_imm3", "SUBS")][sub]
        if sub < 2:
            return _ins(address, hw, Kind.DATA, op, name, rd=rd, rn=rn, rm=rm)
        return _ins(address, hw, Kind.DATA, op, name, rd=rd, rn=rn, imm=rm)

    if top >> 2 == 0b001:                   # imm8 forms
        r = (hw >> 8) & 7
        op, name = [("movs_imm", "MOVS"), ("cmp_imm", "CMP"),
                    ("adds_imm8", "ADDS"), ("subs_imm8", "SUBS")][top & 3]
        return _ins(address, hw, Kind.DATA, op, name, rd=r, rn=r, imm=hw & 0xFF)

    if hw >> 10 == 0b010000:                # data processing
        op, name = _ALU[(hw >> 6) & 0xF]
        kind = Kind.MULS if op == "muls" else Kind.DATA
        return _ins(address, hw, kind, op, name, rd=rd, rn=rd, rm=rn)

    if hw >> 10 == 0b010001:                # special data / branch exchange
        sub = (hw >> 8) & 3
        rm = (hw >> 3) & 0xF
        rdn = ((hw >> 4) & 8) | rd
        if sub == 0:
            if rdn == 15 and rm == 15:
                raise UndefinedEncoding(address, hw)
            return _ins(address, hw, Kind.DATA, "add_hi", "ADD", rd=rdn, rn=rdn, rm=rm)
        if sub == 1:
            if (rdn < 8 and rm < 8) or rdn == 15 or rm == 15:
                raise UndefinedEncoding(address, hw)
            return _ins(address, hw, Kind.DATA, "cmp_hi", "CMP", rn=rdn, rm=rm)
        if sub == 2:
            return _ins(address, hw, Kind.DATA, "mov_hi", "MOV", rd=rdn, rm=rm)
        if hw & 7:
            raise UndefinedEncoding(address, hw)
        if hw & 0x80:
            if rm == 15:
                raise UndefinedEncoding(address, hw)
            return _ins(address, hw, Kind.BX, "blx", "BLX", rm=rm)
        return _ins(address, hw, Kind.BX, "bx", "BX", rm=rm)

    if top == 0b01001:                      # LDR literal
        return _ins(address, hw, Kind.LOAD, "ldr_lit", "LDR",
                    rd=(hw >> 8) & 7, rn=15, imm=(hw & 0xFF) << 2)

    if hw >> 12 == 0b0101:                  # load/store register offset
        op, name, kind = _LDST_REG[(hw >> 9) & 7]
        return _ins(address, hw, kind, op, name, rd=rd, rn=rn, rm=(hw >> 6) & 7)

    if hw >> 13 == 0b011 or hw >> 12 == 0b1000:   # load/store immediate offset
        imm5 = (hw >> 6) & 0x1F
        load = bool(hw & 0x800)
        kind = Kind.LOAD if load else Kind.STORE
        if hw >> 12 == 0b0110:
            op, name, imm = ("ldr_imm", "LDR", imm5 << 2) if load else ("str_imm", "STR", imm5 << 2)
        elif hw >> 12 == 0b0111:
            op, name, imm = ("ldrb_imm", "LDRB", imm5) if load else ("strb_imm", "STRB", imm5)
        else:
            op, name, imm = ("ldrh_imm", "LDRH", imm5 << 1) if load else ("strh_imm", "STRH", imm5 << 1)
        return _ins(address, hw, kind, op, name, rd=rd, rn=rn, imm=imm)

    if hw >> 12 == 0b1001:                  # sp-relative load/store
        load = bool(hw & 0x800)
        op, name, kind = ("ldr_sp", "LDR", Kind.LOAD) if load else ("str_sp", "STR", Kind.STORE)
        return _ins(address, hw, kind, op, name, rd=(hw >> 8) & 7, rn=13,
                    imm=(hw & 0xFF) << 2)

    if top == 0b10100:
        return _ins(address, hw, Kind.DATA, "adr", "ADR", rd=(hw >> 8) & 7, rn=15,
                    imm=(hw & 0xFF) << 2)
    if top == 0b10101:
        return _ins(address, hw, Kind.DATA, "add_rd_sp", "ADD", rd=(hw >> 8) & 7, rn=13,
                    imm=(hw & 0xFF) << 2)

    if hw >> 12 == 0b1011:                  # miscellaneous
        return _decode_misc(hw, address)

    if hw >> 12 == 0b1100:                  # STM / LDM
        base = (hw >> 8) & 7
        regs = tuple(i for i in range(8) if hw & (1 << i))
        if not regs:
            raise UndefinedEncoding(address, hw)
        if hw & 0x800:
            return _ins(address, hw, Kind.LOAD, "ldm", "LDM", rn=base, reglist=regs)
        return _ins(address, hw, Kind.STORE, "stm", "STM", rn=base, reglist=regs)

    if hw >> 12 == 0b1101:                  # B<c>, UDF, SVC
        cond = (hw >> 8) & 0xF
        if cond == 0xE:
            raise UndefinedEncoding(address, hw)
        if cond == 0xF:
            return _ins(address, hw, Kind.MISC, "svc", "SVC", imm=hw & 0xFF)
        return _ins(address, hw, Kind.BRANCH_COND, "b_cond", "B" + COND_NAMES[cond],
                    imm=_sx(hw & 0xFF, 8) << 1, cond=cond)

    if top == 0b11100:
        return _ins(address, hw, Kind.BRANCH, "b", "B", imm=_sx(hw & 0x7FF, 11) << 1)

    raise UndefinedEncoding(address, hw)


def _decode_misc(hw, address):
    sub = (hw >> 8) & 0xF
    if sub == 0b0000:
        op, name = ("sub_sp", "SUB") if hw & 0x80 else ("add_sp", "ADD")
        return _ins(address, hw, Kind.DATA, op, name, rd=13, rn=13, imm=(hw & 0x7F) << 2)
    if sub == 0b0010:
        op, name = [("sxth", "SXTH"), ("sxtb", "SXTB"),
                    ("uxth", "UXTH"), ("uxtb", "UXTB")][(hw >> 6) & 3]
        return _ins(address, hw, Kind.DATA, op, name, rd=hw & 7, rm=(hw >> 3) & 7)
    if sub in (0b0100, 0b0101):
        regs = tuple(i for i in range(8) if hw & (1 << i)) + ((14,) if hw & 0x100 else ())
        if not regs:
            raise UndefinedEncoding(address, hw)
        return _ins(address, hw, Kind.PUSH_POP, "push", "PUSH", reglist=regs)
    if sub in (0b1100, 0b1101):
        regs = tuple(i for i in range(8) if hw & (1 << i)) + ((15,) if hw & 0x100 else ())
        if not regs:
            raise UndefinedEncoding(address, hw)
        return _ins(address, hw, Kind.PUSH_POP, "pop", "POP", reglist=regs)
    if sub == 0b0110 and (hw & 0xEF) == 0x62:
        return _ins(address, hw, Kind.MISC, "cps", "CPSID" if hw & 0x10 else "CPSIE")
    if sub == 0b1010:
        op = (hw >> 6) & 3
        if op == 2:
            raise UndefinedEncoding(address, hw)
        key, name = [("rev", "REV"), ("rev16", "REV16"), None, ("revsh", "REVSH")][op]
        return _ins(address, hw, Kind.DATA, key, name, rd=hw & 7, rm=(hw >> 3) & 7)
    if sub == 0b1110:
        return _ins(address, hw, Kind.MISC, "bkpt", "BKPT", imm=hw & 0xFF)
    if sub == 0b1111 and (hw & 0xF) == 0:
        hint = (hw >> 4) & 0xF
        if hint in _HINTS:
            key, name = _HINTS[hint]
            return _ins(address, hw, Kind.MISC, key, name)
    raise UndefinedEncoding(address, hw)


def _reglist_str(regs):
    return "{" + ", ".join(REG_NAMES[r] for r in regs) + "}"


def disassemble(ins: Instruction) -> str:
    """Render a UAL-flavoured listing line (for reports and debugging)."""
    op, m = ins.op, ins.mnemonic.lower()
    r = REG_NAMES
    if op in ("movs_reg",):
        return f"{m} {r[ins.rd]}, {r[ins.rm]}"
    if op.endswith("_imm") and op[:4] in ("lsls", "lsrs", "asrs"):
        return f"{m} {r[ins.rd]}, {r[ins.rm]}, #{ins.imm}"
    if op in ("adds_reg", "subs_reg"):
        return f"{m} {r[ins.rd]}, {r[ins.rn]}, {r[ins.rm]}"
    if op in ("adds_imm3", "subs_imm3"):
        return f"{m} {r[ins.rd]}, {r[ins.rn]}, #{ins.imm}"
    if op in ("movs_imm", "adds_imm8", "subs_imm8"):
        return f"{m} {r[ins.rd]}, #{ins.imm}"
    if op == "cmp_imm":
        return f"{m} {r[ins.rn]}, #{ins.imm}"
    if ins.kind in (Kind.DATA, Kind.MULS) and op in {k for k, _ in _ALU}:
        return f"{m} {r[ins.rd]}, {r[ins.rm]}"
    if op in ("add_hi", "mov_hi"):
        return f"{m} {r[ins.rd]}, {r[ins.rm]}"
    if op == "cmp_hi":
        return f"{m} {r[ins.rn]}, {r[ins.rm]}"
    if op in ("bx", "blx"):
        return f"{m} {r[ins.rm]}"
    if op == "ldr_lit":
        return f"{m} {r[ins.rd]}, [pc, #{ins.imm}]"
    if op.endswith("_reg"):
        return f"{m} {r[ins.rd]}, [{r[ins.rn]}, {r[ins.rm]}]"
    if op.endswith("_imm") or op in ("ldr_sp", "str_sp"):
        return f"{m} {r[ins.rd]}, [{r[ins.rn]}, #{ins.imm}]"
    if op == "adr":
        return f"{m} {r[ins.rd]}, pc, #{ins.imm}"
    if op == "add_rd_sp":
        return f"{m} {r[ins.rd]}, sp, #{ins.imm}"
    if op in ("add_sp", "sub_sp"):
        return f"{m} sp, #{ins.imm}"
    if op in ("sxth", "sxtb", "uxth", "uxtb", "rev", "rev16", "revsh"):
        return f"{m} {r[ins.rd]}, {r[ins.rm]}"
    if op in ("push", "pop"):
        return f"{m} {_reglist_str(ins.reglist)}"
    if op in ("ldm", "stm"):
        wb = "" if op == "ldm" and ins.rn in ins.reglist else "!"
        return f"{m} {r[ins.rn]}{wb}, {_reglist_str(ins.reglist)}"
    if op in ("b", "b_cond", "bl"):
        return f"{m} {ins.branch_target:#x}"
    if op in ("bkpt", "svc"):
        return f"{m} #{ins.imm}"
    if op == "msr":
        return f"{m} {ins.imm}, {r[ins.rn]}"
    if op == "mrs":
        return f"{m} {r[ins.rd]}, {ins.imm}"
    return m
