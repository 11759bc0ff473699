"""Bundled bare-metal micro-benchmarks (raw flash images with vector table).

Each ``NAME.bin`` sits next to its ``NAME.s`` source and loads at the flash
base; run one with ``em0 simulate builtin:NAME``.
"""

from importlib import resources


def names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files(__name__).iterdir()
                  if p.name.endswith(".bin"))


def load(name: str) -> bytes:
    path = resources.files(__name__) / f"{name}.bin"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled program {name!r}; available: {', '.join(names())}")
    return path.read_bytes()


def source(name: str) -> str:
    return (resources.files(__name__) / f"{name}.s").read_text()
