"""Basic-block CFG extraction and static counter prediction.

Blocks are found by recursive descent from the entry point (and any extra
roots), so literal pools are never decoded as code.  Each block carries the
counters of one execution that leaves by fallthrough, plus the increment paid
when it leaves by a taken edge.  Given block and edge execution counts, the
energy of a run is composed from the blocks without simulating it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .counters import EventCounters, ZERO, merge
from .energy import EnergyModel, estimate
from .errors import MemoryFault, UndefinedEncoding, UnknownBlock
from .isa.decode import Instruction, Kind, decode16, decode_wide, disassemble, is_wide_prefix
from .memory import MemoryMap, Region
from .timing import not_taken_cycles, refill_cycles

FALLTHROUGH, TAKEN, CALL, RETURN, INDIRECT = "fallthrough", "taken-branch", "call", "return", "indirect"
_STACK = "stack"   # abstract value: a pointer into the stack (RAM)


@dataclass(frozen=True)
class Exit:
    kind: str
    target: int | None

    def to_json(self):
        return {"kind": self.kind,
                "target": None if self.target is None else f"{self.target:#010x}"}


@dataclass(frozen=True)
class BasicBlock:
    start: int
    end: int                                  # exclusive
    instructions: tuple[Instruction, ...]
    exits: tuple[Exit, ...]
    static_counters_base: EventCounters
    taken_exit_delta: EventCounters
    flags: tuple[str, ...] = ()

    @property
    def terminator(self) -> Instruction:
        return self.instructions[-1]

    def to_json(self) -> dict:
        return {
            "start": f"{self.start:#010x}",
            "end": f"{self.end:#010x}",
            "instr_count": len(self.instructions),
            "base": self.static_counters_base.to_json(),
            "taken_delta": self.taken_exit_delta.to_json(),
            "exits": [e.to_json() for e in self.exits],
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class StaticCFG:
    blocks: dict[int, BasicBlock]
    entry: int
    errors: tuple[tuple[int, str], ...] = ()

    def block_at(self, address: int) -> BasicBlock:
        try:
            return self.blocks[address]
        except KeyError:
            raise UnknownBlock(f"no basic block starts at {address:#010x}") from None


def _fetch(mem: MemoryMap, address: int) -> Instruction:
    if mem.region_of(address, 2) is None:
        raise MemoryFault(address)
    hw = mem.peek(address, 2)
    if is_wide_prefix(hw):
        if mem.region_of(address + 2, 2) is None:
            raise UndefinedEncoding(address, hw)
        return decode_wide(hw, mem.peek(address + 2, 2), address)
    return decode16(hw, address)


def _ends_block(ins: Instruction) -> bool:
    return ins.is_control or ins.op == "bkpt"


def _successors(ins: Instruction):
    """(exits, addresses to explore) for a block terminator."""
    nxt = ins.address + ins.width
    op = ins.op
    if op == "b_cond":
        return [Exit(FALLTHROUGH, nxt), Exit(TAKEN, ins.branch_target)], [nxt, ins.branch_target]
    if op == "b":
        return [Exit(TAKEN, ins.branch_target)], [ins.branch_target]
    if op == "bl":
        return [Exit(CALL, ins.branch_target)], [ins.branch_target, nxt]
    if op == "blx":
        return [Exit(CALL, None)], [nxt]
    if op == "bx":
        return [Exit(RETURN if ins.rm == 14 else INDIRECT, None)], []
    if op == "pop":
        return [Exit(RETURN, None)], []
    if ins.writes_pc:
        return [Exit(INDIRECT, None)], []
    return [], []    # bkpt


def extract_cfg(memory: MemoryMap, entry: int, roots=()) -> StaticCFG:
    entry &= ~1
    leaders = {entry} | {r & ~1 for r in roots}
    insns: dict[int, Instruction] = {}
    errors: dict[int, str] = {}
    work = sorted(leaders, reverse=True)
    seen = set()
    while work:
        addr = work.pop()
        if addr in seen:
            continue
        seen.add(addr)
        while addr not in insns and addr not in errors:
            try:
                ins = _fetch(memory, addr)
            except (UndefinedEncoding, MemoryFault) as exc:
                errors[addr] = str(exc)
                break
            insns[addr] = ins
            if _ends_block(ins):
                _, targets = _successors(ins)
                for t in targets:
                    leaders.add(t)
                    work.append(t)
                break
            addr += ins.width

    blocks = {}
    for start in sorted(a for a in leaders if a in insns):
        body = []
        flags = []
        addr = start
        exits: list[Exit] = []
        while True:
            ins = insns[addr]
            body.append(ins)
            nxt = addr + ins.width
            if _ends_block(ins):
                exits, _ = _successors(ins)
                break
            if nxt in leaders and nxt in insns:
                exits = [Exit(FALLTHROUGH, nxt)]
                break
            if nxt not in insns:
                flags.append(f"decode-error@{nxt:#010x}")
                break
            addr = nxt
        base, taken, mem_flags = predict_block_counters(body, memory)
        blocks[start] = BasicBlock(start, body[-1].address + body[-1].width, tuple(body),
                                   tuple(exits), base, taken, tuple(flags + mem_flags))
    return StaticCFG(blocks, entry, tuple(sorted(errors.items())))


# -- per-block counter prediction ------------------------------------------------

def _region(memory, address):
    if memory is None:
        return None
    return memory.region_of(address & 0xFFFFFFFF)


def _written(ins: Instruction):
    op = ins.op
    if op in ("cmp_imm", "cmp_reg", "cmp_hi", "cmn", "tst") or ins.kind in (
            Kind.STORE, Kind.MISC, Kind.BRANCH, Kind.BRANCH_COND):
        if op == "stm":
            return (ins.rn,)
        return ()
    if op == "push":
        return (13,)
    if op in ("pop", "ldm"):
        return ins.reglist + ((13,) if op == "pop" else (ins.rn,))
    if op in ("bl", "blx"):
        return (14,)
    if op == "bx":
        return ()
    return (ins.rd,)


def predict_block_counters(block, memory: MemoryMap | None = None):
    """Return ``(base, taken_delta, flags)`` for a block or instruction list.

    Memory regions are resolved from a small constant propagation inside the
    block: literal loads, MOVS/ADDS/SUBS immediates, ADR and sp-derived
    pointers.  Accesses through unresolved base registers count as RAM and are
    flagged.
    """
    body = block.instructions if isinstance(block, BasicBlock) else tuple(block)
    known: dict[int, object] = {13: _STACK}
    c = [0] * 6
    cycles = 0
    hist = Counter()
    flags = []

    def account(address, n_regs, write, ins):
        if address is _STACK:
            region = Region.RAM
        else:
            region = None if address is None else _region(memory, address)
            if region is None:
                flags.append(f"unresolved@{ins.address:#010x}")
                region = Region.RAM
        if write:
            c[4] += n_regs if region is Region.RAM else 0
        elif region is Region.RAM:
            c[3] += n_regs
        else:
            c[5] += n_regs

    for ins in body:
        op = ins.op
        if ins.kind is Kind.MULS:
            c[1] += 1
        else:
            c[0] += 1
        hist[ins.mnemonic] += 1
        cycles += not_taken_cycles(ins)

        value = None
        if op == "ldr_lit":
            lit = ((ins.address + 4) & ~3) + ins.imm
            account(lit, 1, False, ins)
            if memory is not None and memory.region_of(lit, 4) is not None:
                value = memory.peek(lit, 4)
        elif op in ("push", "pop"):
            account(_STACK, len(ins.reglist), op == "push", ins)
        elif op in ("ldm", "stm"):
            base = known.get(ins.rn)
            account(base, len(ins.reglist), op == "stm", ins)
        elif ins.kind in (Kind.LOAD, Kind.STORE):
            base = known.get(ins.rn)
            if op.endswith("_reg"):
                off = known.get(ins.rm)
                addr = base + off if isinstance(base, int) and isinstance(off, int) else \
                    (_STACK if base is _STACK else None)
            else:
                addr = base + ins.imm if isinstance(base, int) else base
            account(addr, 1, ins.kind is Kind.STORE, ins)
        elif op == "movs_imm":
            value = ins.imm
        elif op in ("adds_imm3", "adds_imm8", "subs_imm3", "subs_imm8"):
            src = known.get(ins.rn)
            if isinstance(src, int):
                value = (src + ins.imm if op.startswith("adds") else src - ins.imm) & 0xFFFFFFFF
            elif src is _STACK:
                value = _STACK
        elif op == "adr":
            value = ((ins.address + 4) & ~3) + ins.imm
        elif op in ("add_rd_sp",):
            value = _STACK
        elif op in ("movs_reg", "mov_hi") and ins.rd != 15:
            value = known.get(ins.rm)

        for r in _written(ins):
            known.pop(r, None)
        if value is not None and op not in ("ldm", "pop"):
            known[ins.rd] = value
        if op in ("add_sp", "sub_sp") or (op in ("mov_hi", "add_hi") and ins.rd == 13):
            known[13] = _STACK
        if op in ("push", "pop"):
            known[13] = _STACK

    base = EventCounters(*c, cycles=cycles, opcode_histogram=dict(hist))
    term = body[-1]
    if term.is_control:
        taken = EventCounters(c3=1, cycles=refill_cycles(term))
    else:
        taken = ZERO
    return base, taken, flags


# -- composition -------------------------------------------------------------

@dataclass(frozen=True)
class StaticEstimate:
    energy_nj: float
    counters: EventCounters
    per_block_nj: dict[int, float] = field(default_factory=dict)


def _edge_source(key):
    return key[0] if isinstance(key, tuple) else key


def compose_counters(cfg: StaticCFG, execution_counts, taken_counts=None) -> EventCounters:
    taken_counts = taken_counts or {}
    total = ZERO
    for start, n in execution_counts.items():
        total = merge(total, cfg.block_at(start).static_counters_base.scaled(int(n)))
    for key, n in taken_counts.items():
        total = merge(total, cfg.block_at(_edge_source(key)).taken_exit_delta.scaled(int(n)))
    return total


def estimate_static(cfg: StaticCFG, execution_counts, taken_counts, model: EnergyModel) -> StaticEstimate:
    """Compose a program estimate from block counts.

    ``execution_counts`` maps block start -> executions; ``taken_counts`` maps
    a taken edge, given as its source block start or ``(source, target)``,
    to the number of times it was followed.
    """
    taken_counts = taken_counts or {}
    per_block: dict[int, float] = {}
    for start, n in execution_counts.items():
        blk = cfg.block_at(start)
        per_block[start] = per_block.get(start, 0.0) + n * estimate(blk.static_counters_base, model)
    for key, n in taken_counts.items():
        src = _edge_source(key)
        blk = cfg.block_at(src)
        per_block[src] = per_block.get(src, 0.0) + n * estimate(blk.taken_exit_delta, model)
    counters = compose_counters(cfg, execution_counts, taken_counts)
    return StaticEstimate(estimate(counters, model), counters, per_block)


def profile_blocks(cfg: StaticCFG, sim, max_instructions: int = 10_000_000):
    """Run ``sim`` and count block entries and taken exits.

    Returns ``(execution_counts, taken_counts, run_report)``.
    """
    last_to_start = {blk.terminator.address: s for s, blk in cfg.blocks.items()}
    executions: Counter[int] = Counter()
    taken: Counter[int] = Counter()
    starts = cfg.blocks.keys()

    def on_step(report):
        addr = report.events.instruction.address
        if addr in starts:
            executions[addr] += 1
        if report.events.branch_taken and addr in last_to_start:
            taken[last_to_start[addr]] += 1

    run_report = sim.run(max_instructions, on_step=on_step)
    return dict(executions), dict(taken), run_report


def listing(block: BasicBlock) -> list[str]:
    return [f"{i.address:#010x}: {disassemble(i)}" for i in block.instructions]
