import pytest
from hypothesis import given, settings, strategies as st

import corpus
import randprog
from em0.errors import Halted, UnalignedAccess
from em0.isa.decode import decode16
from em0.isa.execute import MachineState, execute
from em0.memory import Direction, MemoryMap, Region
from em0.simulator import ExitReason, Simulator, run, step
from em0.timing import HardwareConfig

CFG = HardwareConfig(20, False, 0)
CODE = 0x0800_0008


def state_at(pc, **regs):
    st_ = MachineState()
    st_.regs[15] = pc
    st_.regs[13] = 0x2000_1000
    for name, value in regs.items():
        st_.regs[int(name[1:])] = value
    return st_


def test_movs_immediate_semantics():
    mem = MemoryMap()
    s = state_at(CODE)
    ev = execute(s, decode16(0x2005, CODE), mem)
    assert s.regs[0] == 5 and not s.z and not s.n
    assert not ev.branch_taken and ev.data_accesses == ()
    assert s.pc == CODE + 2


def test_beq_taken():
    mem = MemoryMap()
    s = state_at(CODE)
    s.z = True
    ev = execute(s, decode16(0xD002, CODE), mem)     # beq +4
    assert ev.branch_taken and s.pc == CODE + 4 + 4


def test_beq_not_taken_advances():
    s = state_at(CODE)
    ev = execute(s, decode16(0xD002, CODE), MemoryMap())
    assert not ev.branch_taken and s.pc == CODE + 2


def test_ldr_sp_offset_single_read():
    mem = MemoryMap()
    s = state_at(CODE)
    mem.write(0x2000_1004, 4, 0xCAFEF00D)
    ev = execute(s, decode16(0x9901, CODE), mem)     # ldr r1, [sp, #4]
    assert s.regs[1] == 0xCAFEF00D
    (acc,) = ev.data_accesses
    assert (acc.address, acc.size, acc.direction, acc.region) == \
        (0x2000_1004, 4, Direction.READ, Region.RAM)


def test_unaligned_word_load_faults():
    s = state_at(CODE, r0=0x2000_0002)
    with pytest.raises(UnalignedAccess):
        execute(s, decode16(0x6801, CODE), MemoryMap())   # ldr r1, [r0]


def test_muls_keeps_carry_and_overflow():
    s = state_at(CODE, r0=0, r1=5)
    s.c = s.v = True
    execute(s, decode16(0x4348, CODE), MemoryMap())       # muls r0, r1, r0
    assert s.regs[0] == 0 and s.z and not s.n and s.c and s.v


def test_push_store_list():
    s = state_at(CODE, r4=4, r5=5, r14=0x0800_0101)
    ev = execute(s, decode16(0xB530, CODE), MemoryMap())  # push {r4, r5, lr}
    assert [a.address for a in ev.data_accesses] == [0x2000_0FF4, 0x2000_0FF8, 0x2000_0FFC]
    assert all(a.direction is Direction.WRITE for a in ev.data_accesses)
    assert s.sp == 0x2000_0FF4


@given(st.integers(0, 0xFFFF))
def test_non_control_advances_by_width(hw):
    from em0.errors import MemoryFault, UndefinedEncoding
    from em0.isa.decode import is_wide_prefix
    if is_wide_prefix(hw):
        return
    try:
        ins = decode16(hw, CODE)
    except UndefinedEncoding:
        return
    if ins.is_control or ins.op in ("bkpt",):
        return
    s = state_at(CODE, **{f"r{i}": 0x2000_0100 for i in range(13)})
    try:
        ev = execute(s, ins, MemoryMap())
    except MemoryFault:
        return
    assert not ev.branch_taken
    assert s.pc == CODE + ins.width


# -- step / run --------------------------------------------------------------

def test_step_adds_costs_one_cycle():
    sim = Simulator.from_image(corpus.BY_NAME["ten_adds"].image, CFG)
    rep = step(sim)
    assert rep.cycles == 1 and rep.counters.c1 == 1


def test_step_bkpt_halts_then_raises():
    sim = Simulator.from_image(corpus.BY_NAME["immediate_bkpt"].image, CFG)
    step(sim)
    assert sim.halted
    with pytest.raises(Halted):
        step(sim)


def test_ten_adds_run():
    rep = run(Simulator.from_image(corpus.BY_NAME["ten_adds"].image, CFG))
    assert rep.instructions == 11 and rep.exit_reason is ExitReason.BREAKPOINT


def test_budget_exhausted():
    rep = run(Simulator.from_image(corpus.BY_NAME["infinite_loop"].image, CFG), 1000)
    assert rep.exit_reason is ExitReason.BUDGET and rep.instructions == 1000


def test_unmapped_load_reports_address():
    rep = run(Simulator.from_image(corpus.BY_NAME["unmapped_load"].image, CFG))
    assert rep.exit_reason is ExitReason.MEMORY_FAULT
    assert rep.fault_address == 0xF000_0000


@pytest.mark.parametrize("name,reason", [(p.name, p.exit) for p in corpus.FAULT_PROGRAMS])
def test_fault_programs(name, reason):
    rep = run(Simulator.from_image(corpus.BY_NAME[name].image, CFG), 1000)
    assert rep.exit_reason.value == reason
    assert rep.diagnostic or reason == "budget-exhausted"


def test_reset_from_vector_table():
    sim = Simulator.from_image(corpus.BY_NAME["ten_adds"].image, CFG)
    assert sim.state.pc == CODE and sim.state.sp == 0x2000_2000


def test_explicit_entry_overrides_vectors():
    img = corpus.BY_NAME["ten_adds"].image
    mem = MemoryMap()
    mem.load(0x0800_0000, img)
    sim = Simulator(mem, CFG, entry=CODE + 2)
    assert run(sim).instructions == 10
    assert sim.state.sp == mem.ram_base + mem.ram_size


def test_instr_retired_equals_step_reports():
    seen = []
    sim = Simulator.from_image(corpus.BY_NAME["nested_loop"].image, CFG)
    rep = sim.run(on_step=seen.append)
    assert rep.instructions == len(seen)


def test_code_runs_from_alias():
    img = corpus.BY_NAME["countdown10"].image
    mem = MemoryMap()
    mem.load(0x0800_0000, img)
    alias = run(Simulator(mem, CFG, entry=0x8))
    flash = run(Simulator.from_image(img, CFG))
    assert alias.counters == flash.counters
    assert alias.registers["r0"] == flash.registers["r0"]


def test_code_runs_from_ram():
    code = corpus.BY_NAME["muls_loop"].image[8:]
    mem = MemoryMap()
    mem.load(0x2000_0000, code)
    rep = run(Simulator(mem, CFG, entry=0x2000_0000, sp=0x2000_2000))
    assert rep.registers["r2"] == 120
    assert rep.counters.vector == (13, 5, 4, 0, 0, 0)


def test_independent_instances_in_threads():
    from concurrent.futures import ThreadPoolExecutor
    img = corpus.BY_NAME["nested_loop"].image

    def go(_):
        return run(Simulator.from_image(img, CFG)).counters

    with ThreadPoolExecutor(4) as pool:
        results = list(pool.map(go, range(8)))
    assert all(r == results[0] for r in results)


# -- differential check against a reference emulator -----------------------------

def _reference(image, budget=200_000):
    unicorn = pytest.importorskip("unicorn")
    from unicorn import arm_const as A
    uc = unicorn.Uc(unicorn.UC_ARCH_ARM, unicorn.UC_MODE_THUMB | unicorn.UC_MODE_MCLASS)
    uc.mem_map(0x0800_0000, 64 * 1024)
    uc.mem_map(0x2000_0000, 8 * 1024)
    uc.mem_write(0x0800_0000, b"\xff" * 64 * 1024)
    uc.mem_write(0x0800_0000, image)
    uc.reg_write(A.UC_ARM_REG_SP, 0x2000_2000)
    uc.reg_write(A.UC_ARM_REG_LR, 0xFFFF_FFFF)
    uc.reg_write(A.UC_ARM_REG_XPSR, 1 << 24)     # flags are UNKNOWN at reset; start clear

    def on_code(uc, address, size, _):
        if uc.mem_read(address, 2)[1] == 0xBE:
            uc.emu_stop()

    uc.hook_add(unicorn.UC_HOOK_CODE, on_code)
    uc.emu_start(CODE | 1, 0x0801_0000, count=budget)
    regs = {f"r{i}": uc.reg_read(A.UC_ARM_REG_R0 + i) for i in range(13)}
    regs["sp"] = uc.reg_read(A.UC_ARM_REG_SP)
    regs["lr"] = uc.reg_read(A.UC_ARM_REG_LR)
    apsr = uc.reg_read(A.UC_ARM_REG_APSR)
    flags = {k: bool(apsr >> b & 1) for k, b in (("n", 31), ("z", 30), ("c", 29), ("v", 28))}
    return regs, flags, bytes(uc.mem_read(0x2000_0000, 8 * 1024))


def _mine(image):
    sim = Simulator.from_image(image, CFG)
    rep = sim.run(200_000)
    assert rep.exit_reason is ExitReason.BREAKPOINT
    regs = {k: rep.registers[k] for k in [f"r{i}" for i in range(13)] + ["sp", "lr"]}
    flags = {k: rep.registers[k] for k in "nzcv"}
    return regs, flags, bytes(sim.memory.ram)


@pytest.mark.parametrize("name", [p.name for p in corpus.PROGRAMS if p.unicorn])
def test_corpus_matches_reference(name):
    img = corpus.BY_NAME[name].image
    assert _mine(img) == _reference(img)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_programs_match_reference(seed):
    img = randprog.random_image(seed)
    assert _mine(img) == _reference(img)
