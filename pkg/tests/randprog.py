"""Random valid Thumb programs that always terminate with BKPT.

The generator emits raw halfwords, so it needs no assembler.  Shape:

    r7 <- 0x20000000           RAM scratch pointer, never clobbered
    segments of random ALU ops, RAM loads/stores via r7, literal-style flash
    reads (ldr rX, [pc, #imm] into the code itself), balanced push/pop,
    forward conditional skips and counted loops on r6
    optional BL to a leaf function appended after the BKPT

Registers r0-r5 are scratch; r6 is the loop counter, r7 the RAM base.
"""

from __future__ import annotations

import random
import struct

SCRATCH = range(6)
CODE_BASE = 0x0800_0008
INITIAL_SP = 0x2000_2000


def movs(rd, imm):
    return [0x2000 | rd << 8 | imm]


def alu(op, rdn, rm):
    return [0x4000 | op << 6 | rm << 3 | rdn]


def _random_simple(rng: random.Random, allow_mem=True):
    kind = rng.randrange(10 if allow_mem else 6)
    rd, rn, rm = (rng.choice(SCRATCH) for _ in range(3))
    if kind == 0:
        return movs(rd, rng.randrange(256))
    if kind == 1:
        op = rng.choice([0x1800, 0x1A00])                    # adds/subs reg
        return [op | rm << 6 | rn << 3 | rd]
    if kind == 2:
        op = rng.choice([0x1C00, 0x1E00])                    # adds/subs imm3
        return [op | rng.randrange(8) << 6 | rn << 3 | rd]
    if kind == 3:
        op = rng.choice([0x3000, 0x3800, 0x2800])            # adds/subs/cmp imm8
        return [op | rd << 8 | rng.randrange(256)]
    if kind == 4:
        op = rng.choice([0x0000, 0x0800, 0x1000])            # lsl/lsr/asr imm
        return [op | rng.randrange(32) << 6 | rm << 3 | rd]
    if kind == 5:
        op = 13 if rng.random() < 0.3 else rng.randrange(16)  # 13 = MULS
        return alu(op, rd, rm)
    if kind == 6:                                            # word str/ldr via r7
        op = rng.choice([0x6000, 0x6800])
        return [op | rng.randrange(32) << 6 | 7 << 3 | rd]
    if kind == 7:                                            # byte/half via r7
        op = rng.choice([0x7000, 0x7800, 0x8000, 0x8800])
        return [op | rng.randrange(32) << 6 | 7 << 3 | rd]
    if kind == 8:                                            # literal read of code
        return [0x4800 | rd << 8 | rng.randrange(16)]
    lo = rng.randrange(1, 1 << 6)                            # balanced push/pop
    return [0xB400 | lo, 0xBC00 | lo]


def _segment(rng, n, allow_mem=True):
    """Straight-line halfwords, possibly with forward conditional skips."""
    out = []
    while len(out) < n:
        if rng.random() < 0.15:
            body = []
            for _ in range(rng.randint(1, 3)):
                body += _random_simple(rng, allow_mem)
            cond = rng.randrange(14)
            off = (len(body) * 2 - 4 + 2) // 2                 # target = after body
            out += [0xD000 | cond << 8 | (off & 0xFF)] + body
        elif rng.random() < 0.05:
            body = _random_simple(rng, allow_mem)
            out += [0xE000 | ((len(body) * 2 - 2) // 2 & 0x7FF)] + body
        else:
            out += _random_simple(rng, allow_mem)
    return out


def _bl(offset):
    """BL with byte offset relative to the address of the BL + 4."""
    off = offset & 0x1FFFFFF
    s = (off >> 24) & 1
    i1 = (off >> 23) & 1
    i2 = (off >> 22) & 1
    j1 = (~i1 ^ s) & 1
    j2 = (~i2 ^ s) & 1
    imm10 = (off >> 12) & 0x3FF
    imm11 = (off >> 1) & 0x7FF
    return [0xF000 | s << 10 | imm10, 0xD000 | j1 << 13 | j2 << 11 | imm11]


def random_program(seed: int) -> list[int]:
    rng = random.Random(seed)
    code = movs(7, 0x20) + [0x0000 | 24 << 6 | 7 << 3 | 7]     # r7 = 0x20000000
    call_sites = []
    for _ in range(rng.randint(1, 4)):
        roll = rng.random()
        if roll < 0.35:
            code += movs(6, rng.randint(1, 6))
            start = len(code)
            code += _segment(rng, rng.randint(1, 8))
            code += [0x3E01]                                  # subs r6, #1
            off = (start - (len(code) + 2)) * 2               # pc-relative, bytes
            code += [0xD100 | ((off >> 1) & 0xFF)]            # bne start
        elif roll < 0.5:
            call_sites.append(len(code))
            code += [0, 0]                                    # BL placeholder
        else:
            code += _segment(rng, rng.randint(1, 10))
    code += [0xBE00]
    if call_sites:
        func = len(code)
        code += [0xB500]                                      # push {lr}
        code += _segment(rng, rng.randint(1, 6))
        code += [0xBD00]                                      # pop {pc}
        for site in call_sites:
            code[site:site + 2] = _bl((func - (site + 2)) * 2)
    return code


def image(code: list[int]) -> bytes:
    return struct.pack("<II", INITIAL_SP, CODE_BASE | 1) + struct.pack(f"<{len(code)}H", *code)


def random_image(seed: int) -> bytes:
    return image(random_program(seed))
