"""ARMv6-M Thumb decoding and architectural execution."""

from .decode import Instruction, Kind, decode, disassemble
from .execute import DataAccess, FetchAccess, MachineState, StepEvents, execute

__all__ = [
    "DataAccess", "FetchAccess", "Instruction", "Kind", "MachineState", "StepEvents",
    "decode", "disassemble", "execute",
]
