"""Dev-time assembler for the bundled programs and the test corpus.

Needs keystone-engine (``pip install keystone-engine``); nothing at runtime
or test time imports this file.

    python tools/assemble.py programs   # rebuild src/em0/programs/*.bin
    python tools/assemble.py corpus     # rebuild tests/data/corpus_bytes.json
"""

import importlib.util
import json
import struct
import sys
from pathlib import Path

import keystone

ROOT = Path(__file__).resolve().parents[1]
CODE_BASE = 0x0800_0008
INITIAL_SP = 0x2000_2000


def assemble(src: str, base: int = CODE_BASE) -> bytes:
    ks = keystone.Ks(keystone.KS_ARCH_ARM, keystone.KS_MODE_THUMB)
    encoding, _ = ks.asm(src, base)
    return bytes(encoding)


def image(src: str) -> bytes:
    """Vector table (initial sp, reset handler) followed by the code."""
    return struct.pack("<II", INITIAL_SP, CODE_BASE | 1) + assemble(src)


def build_programs():
    pdir = ROOT / "src" / "em0" / "programs"
    for s in sorted(pdir.glob("*.s")):
        s.with_suffix(".bin").write_bytes(image(s.read_text()))
        print("built", s.with_suffix(".bin").name)


def build_corpus():
    spec = importlib.util.spec_from_file_location("corpus", ROOT / "tests" / "corpus.py")
    corpus = importlib.util.module_from_spec(spec)
    sys.modules["corpus"] = corpus
    spec.loader.exec_module(corpus)
    out = {p.name: image(p.asm).hex() for p in corpus.ALL_PROGRAMS}
    dest = ROOT / "tests" / "data" / "corpus_bytes.json"
    dest.parent.mkdir(exist_ok=True)
    dest.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(out)} programs to {dest}")


if __name__ == "__main__":
    {"programs": build_programs, "corpus": build_corpus}[sys.argv[1]]()
