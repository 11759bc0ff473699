"""Exception hierarchy shared by the simulator, models and CLI."""


class Em0Error(Exception):
    pass


# -- memory ---------------------------------------------------------------

class MemoryFault(Em0Error):
    def __init__(self, address, message=None):
        self.address = address
        super().__init__(message or f"unmapped access at {address:#010x}")


class UnalignedAccess(MemoryFault):
    def __init__(self, address, size):
        self.size = size
        super().__init__(address, f"unaligned {size}-byte access at {address:#010x}")


class FlashWriteFault(MemoryFault):
    def __init__(self, address):
        super().__init__(address, f"write to read-only flash at {address:#010x}")


class MalformedImage(Em0Error):
    pass


class SegmentOutOfRange(Em0Error):
    def __init__(self, address, size):
        self.address = address
        self.size = size
        super().__init__(f"segment {address:#010x}+{size:#x} is outside mapped memory")


# -- isa ------------------------------------------------------------------

class UndefinedEncoding(Em0Error):
    def __init__(self, address, bits):
        self.address = address
        self.bits = bits
        super().__init__(f"undefined encoding {bits:#06x} at {address:#010x}")


class Halted(Em0Error):
    pass


# -- models ---------------------------------------------------------------

class UnsupportedConfig(Em0Error, ValueError):
    pass


class SchemaError(Em0Error, ValueError):
    pass


class NegativeCoefficient(SchemaError):
    pass


class InsufficientData(Em0Error, ValueError):
    pass


class DegenerateDesign(Em0Error, ValueError):
    pass


class ZeroVariance(Em0Error, ValueError):
    pass


class UnknownBlock(Em0Error, KeyError):
    def __str__(self):
        return Exception.__str__(self)
