"""Fetch/decode/execute loop tying the core to the timing and counter models."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .counters import CounterAccumulator, EventCounters, classify
from .errors import Halted, MemoryFault, UndefinedEncoding
from .memory import MemoryMap, Purpose, load_image
from .timing import EMPTY_FETCH, HardwareConfig, cycles_for
from .isa.decode import decode16, decode_wide, is_wide_prefix
from .isa.execute import PC, SP, MachineState, StepEvents, execute


class ExitReason(enum.Enum):
    BREAKPOINT = "breakpoint"
    UNDEFINED = "undefined-encoding"
    MEMORY_FAULT = "memory-fault"
    BUDGET = "budget-exhausted"


@dataclass(frozen=True)
class StepReport:
    events: StepEvents
    cycles: int
    counters: EventCounters     # this step's increments, cycles included


@dataclass(frozen=True)
class RunReport:
    config: HardwareConfig
    exit_reason: ExitReason
    counters: EventCounters
    instructions: int
    registers: dict = field(default_factory=dict)
    fault_address: int | None = None
    diagnostic: str = ""

    @property
    def cycles(self) -> int:
        return self.counters.cycles

    @property
    def wall_time_s(self) -> float:
        return self.cycles / (self.config.freq_mhz * 1e6)


class Simulator:
    """One simulated Cortex-M0 with its memory, timing state and counters.

    Without ``entry`` the core resets from the vector table at the flash base
    (initial sp at +0, reset handler at +4).  With ``entry`` the pc starts
    there and sp defaults to the top of RAM unless ``sp`` is given.
    """

    def __init__(self, memory: MemoryMap, config: HardwareConfig,
                 entry: int | None = None, sp: int | None = None):
        self.memory = memory
        self.config = config
        self.state = MachineState()
        self.fetch_state = EMPTY_FETCH
        self.totals = CounterAccumulator()
        self.reset(entry, sp)

    @classmethod
    def from_image(cls, data: bytes, config: HardwareConfig, base: int | None = None,
                   entry: int | None = None, memory: MemoryMap | None = None) -> Simulator:
        mem = memory or MemoryMap()
        report = load_image(mem, data, base)
        if entry is None and report.initial_sp is None:
            entry = report.entry if report.entry is not None else mem.flash_base
        return cls(mem, config, entry=entry, sp=report.initial_sp)

    def reset(self, entry=None, sp=None):
        st = self.state
        st.regs = [0] * 16
        st.n = st.z = st.c = st.v = False
        st.halted = False
        st.instr_retired = 0
        mem = self.memory
        if entry is None:
            st.regs[SP] = (mem.peek(mem.flash_base, 4) if sp is None else sp) & ~3
            st.regs[PC] = mem.peek(mem.flash_base + 4, 4) & ~1
        else:
            st.regs[SP] = (mem.ram_base + mem.ram_size if sp is None else sp) & ~3
            st.regs[PC] = entry & ~1
        st.regs[14] = 0xFFFFFFFF
        self.fetch_state = EMPTY_FETCH
        self.totals = CounterAccumulator()

    @property
    def halted(self) -> bool:
        return self.state.halted

    def fetch_decode(self, address: int):
        mem = self.memory
        hw, _ = mem.read(address, 2, Purpose.FETCH)
        if is_wide_prefix(hw):
            hw2, _ = mem.read(address + 2, 2, Purpose.FETCH)
            return decode_wide(hw, hw2, address)
        return decode16(hw, address)

    def step(self) -> StepReport:
        st = self.state
        if st.halted:
            raise Halted("simulator is halted")
        instr = self.fetch_decode(st.regs[PC])
        events = execute(st, instr, self.memory)
        cycles, self.fetch_state = cycles_for(instr, events, self.config, self.fetch_state)
        delta = classify(events)
        delta = replace(delta, cycles=cycles)
        st.instr_retired += 1
        self.totals.add(delta)
        return StepReport(events, cycles, delta)

    def counters(self) -> EventCounters:
        return self.totals.freeze()

    def run(self, max_instructions: int = 10_000_000, on_step=None) -> RunReport:
        """Run until BKPT, a fault, an undefined encoding, or the budget."""
        st = self.state
        fault_address = None
        diagnostic = ""
        reason = ExitReason.BREAKPOINT if st.halted else None
        while reason is None:
            if st.instr_retired >= max_instructions:
                reason = ExitReason.BUDGET
                break
            try:
                report = self.step()
            except UndefinedEncoding as exc:
                reason, fault_address, diagnostic = ExitReason.UNDEFINED, exc.address, str(exc)
                st.halted = True
                break
            except MemoryFault as exc:
                reason, fault_address, diagnostic = ExitReason.MEMORY_FAULT, exc.address, str(exc)
                st.halted = True
                break
            if on_step is not None:
                on_step(report)
            if st.halted:
                reason = ExitReason.BREAKPOINT
        return RunReport(self.config, reason, self.counters(), st.instr_retired,
                         st.snapshot(), fault_address, diagnostic)


def step(sim: Simulator) -> StepReport:
    return sim.step()


def run(sim: Simulator, max_instructions: int = 10_000_000) -> RunReport:
    return sim.run(max_instructions)
