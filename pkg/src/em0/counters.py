"""The six energy-model event counters.

==== ==========================================
c1   executed instructions, MULS excluded
c2   MULS instructions
c3   taken branches (any redirected pc)
c4   RAM data reads
c5   RAM writes
c6   flash data reads (boot alias included)
==== ==========================================
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .isa.decode import Kind
from .memory import Direction, Purpose, Region

FIELDS = ("c1", "c2", "c3", "c4", "c5", "c6")


@dataclass(frozen=True)
class EventCounters:
    c1: int = 0
    c2: int = 0
    c3: int = 0
    c4: int = 0
    c5: int = 0
    c6: int = 0
    cycles: int = 0
    opcode_histogram: dict[str, int] = field(default_factory=dict, compare=True)

    def __post_init__(self):
        for name in FIELDS + ("cycles",):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def vector(self) -> tuple[int, int, int, int, int, int]:
        return (self.c1, self.c2, self.c3, self.c4, self.c5, self.c6)

    @property
    def instructions(self) -> int:
        return self.c1 + self.c2

    def scaled(self, k: int) -> EventCounters:
        return EventCounters(*(k * v for v in self.vector), cycles=k * self.cycles,
                             opcode_histogram={m: k * n for m, n in self.opcode_histogram.items()
                                               if k * n})

    def to_json(self) -> dict:
        out = {name: getattr(self, name) for name in FIELDS}
        out["cycles"] = self.cycles
        return out

    @classmethod
    def from_vector(cls, values, cycles: int = 0) -> EventCounters:
        return cls(*(int(v) for v in values), cycles=cycles)


# CounterDelta shares the representation: one instruction's increments.
CounterDelta = EventCounters
ZERO = EventCounters()


def merge(a: EventCounters, b: EventCounters) -> EventCounters:
    hist = Counter(a.opcode_histogram)
    hist.update(b.opcode_histogram)
    return EventCounters(*(x + y for x, y in zip(a.vector, b.vector)),
                         cycles=a.cycles + b.cycles, opcode_histogram=dict(hist))


def total(items) -> EventCounters:
    acc = CounterAccumulator()
    for item in items:
        acc.add(item)
    return acc.freeze()


def classify(events) -> CounterDelta:
    """Counter increments caused by one executed instruction."""
    ins = events.instruction
    muls = ins.kind is Kind.MULS
    c4 = c5 = c6 = 0
    for acc in events.data_accesses:
        cls = acc.access
        if cls.purpose is not Purpose.DATA:
            continue
        if cls.direction is Direction.WRITE:
            if cls.region is Region.RAM:
                c5 += 1
        elif cls.region is Region.RAM:
            c4 += 1
        else:
            c6 += 1
    return EventCounters(0 if muls else 1, 1 if muls else 0, int(events.branch_taken),
                         c4, c5, c6, opcode_histogram={ins.mnemonic: 1})


class CounterAccumulator:
    """Mutable running totals; :meth:`freeze` yields an immutable snapshot."""

    __slots__ = ("values", "cycles", "histogram")

    def __init__(self):
        self.values = [0] * 6
        self.cycles = 0
        self.histogram: Counter[str] = Counter()

    def add(self, delta: EventCounters) -> None:
        v = self.values
        for i, x in enumerate(delta.vector):
            v[i] += x
        self.cycles += delta.cycles
        self.histogram.update(delta.opcode_histogram)

    def freeze(self) -> EventCounters:
        return EventCounters(*self.values, cycles=self.cycles,
                             opcode_histogram=dict(self.histogram))
