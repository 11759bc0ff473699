"""Cycle model for the Cortex-M0 on STM32F0xx flash.

Base costs follow the Cortex-M0 instruction timing table.  Flash wait states
are added per instruction fetch and per flash data read; the optional
prefetch buffer holds one 32-bit word fetched ahead on sequential flow and
hides the wait state of fetches that hit it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import UnsupportedConfig
from .isa.decode import Instruction, Kind
from .memory import Direction, Region

FREQUENCIES_MHZ = (20, 24, 48)


@dataclass(frozen=True, order=True)
class HardwareConfig:
    """``[frequency MHz, PreFetch ON/OFF, WaitStates 0/1]``."""

    freq_mhz: int
    prefetch: bool
    waitstates: int

    def __post_init__(self):
        if self.freq_mhz not in FREQUENCIES_MHZ:
            raise UnsupportedConfig(f"frequency must be one of {FREQUENCIES_MHZ} MHz, "
                                    f"got {self.freq_mhz}")
        if self.waitstates not in (0, 1):
            raise UnsupportedConfig(f"waitstates must be 0 or 1, got {self.waitstates}")
        if not isinstance(self.prefetch, bool):
            raise UnsupportedConfig("prefetch must be a boolean")
        if self.freq_mhz == 48 and self.waitstates == 0:
            raise UnsupportedConfig("48 MHz requires 1 flash wait state")

    @property
    def key(self) -> str:
        return f"[{self.freq_mhz}, {'ON' if self.prefetch else 'OFF'}, {self.waitstates}]"

    def __str__(self):
        return self.key

    @classmethod
    def parse(cls, text: str) -> HardwareConfig:
        """Accept ``24,ON,1`` or ``[24, ON, 1]``."""
        parts = [p.strip() for p in text.strip().strip("[]").split(",")]
        if len(parts) != 3:
            raise UnsupportedConfig(f"expected FREQ,ON|OFF,WS, got {text!r}")
        freq, pf, ws = parts
        if not re.fullmatch(r"\d+", freq) or not re.fullmatch(r"\d+", ws):
            raise UnsupportedConfig(f"bad config {text!r}")
        if pf.upper() not in ("ON", "OFF"):
            raise UnsupportedConfig(f"prefetch must be ON or OFF, got {pf!r}")
        return cls(int(freq), pf.upper() == "ON", int(ws))

    def to_json(self) -> dict:
        return {"freq_mhz": self.freq_mhz, "prefetch": self.prefetch,
                "waitstates": self.waitstates}

    @classmethod
    def from_json(cls, obj: dict) -> HardwareConfig:
        return cls(int(obj["freq_mhz"]), bool(obj["prefetch"]), int(obj["waitstates"]))


ALL_CONFIGS = tuple(
    HardwareConfig(f, pf, ws)
    for f in FREQUENCIES_MHZ for pf in (False, True) for ws in (0, 1)
    if not (f == 48 and ws == 0)
)


@dataclass(frozen=True, slots=True)
class FetchUnitState:
    buffer_valid: bool = False
    buffer_tag: int = 0


EMPTY_FETCH = FetchUnitState()


def base_cycles(instr: Instruction, taken: bool) -> int:
    """Zero-wait-state cost from the Cortex-M0 timing table."""
    op = instr.op
    kind = instr.kind
    if kind is Kind.BRANCH_COND:
        return 3 if taken else 1
    if kind in (Kind.BRANCH, Kind.BX):
        return 3
    if kind is Kind.BL:
        return 4
    if op in ("push", "ldm", "stm"):
        return 1 + len(instr.reglist)
    if op == "pop":
        return 1 + len(instr.reglist) + (2 if 15 in instr.reglist else 0)
    if kind in (Kind.LOAD, Kind.STORE):
        return 2
    if op in ("add_hi", "mov_hi") and instr.rd == 15:
        return 3
    return 1


def not_taken_cycles(instr: Instruction) -> int:
    """Cost when the instruction leaves by fallthrough, used by block analysis."""
    if instr.kind is Kind.BRANCH_COND:
        return 1
    return base_cycles(instr, True) - refill_cycles(instr)


def refill_cycles(instr: Instruction) -> int:
    """Pipeline refill cost of a taken control transfer."""
    return 2 if instr.is_control else 0


def cycles_for(instr: Instruction, events, cfg: HardwareConfig,
               fetch: FetchUnitState) -> tuple[int, FetchUnitState]:
    """Cycles spent on one executed instruction and the next prefetch state."""
    ws = cfg.waitstates
    cycles = base_cycles(instr, events.branch_taken)

    for acc in events.fetch_accesses:
        if acc.access.region is Region.RAM:
            fetch = EMPTY_FETCH
            continue
        word = acc.address & ~3
        hit = cfg.prefetch and fetch.buffer_valid and fetch.buffer_tag == word
        if not hit:
            cycles += ws
        if cfg.prefetch:
            fetch = FetchUnitState(True, (acc.address + acc.size) & ~3)

    for acc in events.data_accesses:
        if acc.access.direction is Direction.READ and acc.access.region is not Region.RAM:
            cycles += ws

    if events.branch_taken:
        fetch = EMPTY_FETCH
    return cycles, fetch


def run_cycles(report) -> tuple[int, float]:
    """Total cycles and wall-clock seconds of a finished run."""
    cycles = report.cycles
    return cycles, cycles / (report.config.freq_mhz * 1e6)


__all__ = [
    "ALL_CONFIGS", "FetchUnitState", "HardwareConfig", "base_cycles", "cycles_for",
    "not_taken_cycles", "refill_cycles", "run_cycles",
]
