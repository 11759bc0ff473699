"""``em0`` command line: simulate, profile, estimate, train, blocks, models."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import programs
from .counters import FIELDS, EventCounters
from .energy import (REGISTRY, EnergyModel, estimate, load_model, lookup, model_to_json,
                     save_model)
from .errors import Em0Error, UnknownBlock, UnsupportedConfig
from .simulator import ExitReason, Simulator
from .memory import MemoryMap, load_image
from .static import estimate_static, extract_cfg, profile_blocks
from .timing import HardwareConfig
from .trainer import kfold_cv, fit_nnls, read_csv

EXIT_OK, EXIT_FAULT, EXIT_USAGE = 0, 1, 2
PROFILE_FIELDS = ("name",) + FIELDS + ("cycles",)


class UsageError(Exception):
    pass


def fmt_nj(value: float) -> str:
    return f"{value:.6f}"


def _json_nj(value: float) -> float:
    return float(fmt_nj(value))


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _config(text: str) -> HardwareConfig:
    try:
        return HardwareConfig.parse(text)
    except UnsupportedConfig as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- inputs -------------------------------------------------------------------

def read_image(spec: str) -> tuple[str, bytes]:
    """Image path, or ``builtin:NAME`` for a bundled micro-benchmark."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        try:
            return name, programs.load(name)
        except FileNotFoundError as exc:
            raise UsageError(str(exc)) from None
    path = Path(spec)
    try:
        return path.stem, path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read image {spec}: {exc.strerror}") from None


def resolve_model(selector: str) -> EnergyModel:
    """Model file path (also searched in ``EM0_MODEL_DIR``) or a builtin
    configuration key such as ``24,ON,1``."""
    candidates = [Path(selector)]
    extra = os.environ.get("EM0_MODEL_DIR")
    if extra:
        candidates.append(Path(extra) / selector)
        candidates.append(Path(extra) / f"{selector}.json")
    for path in candidates:
        if path.is_file():
            with path.open() as fh:
                return load_model(fh)
    try:
        return lookup(HardwareConfig.parse(selector))
    except UnsupportedConfig as exc:
        raise UnsupportedConfig(f"unknown model {selector!r}: {exc}") from None


def _simulator(spec, args):
    name, data = read_image(spec)
    mem = MemoryMap(flash_size=args.flash_size, ram_size=args.ram_size)
    report = load_image(mem, data, args.base)
    entry = args.entry
    if entry is None and report.initial_sp is None:
        entry = report.entry if report.entry is not None else mem.flash_base
    return name, mem, Simulator(mem, args.config, entry=entry, sp=report.initial_sp)


def read_counters(stream) -> list[tuple[str, EventCounters]]:
    text = stream.read()
    stripped = text.lstrip()
    if stripped.startswith(("{", "[")):
        obj = json.loads(text)
        rows = obj if isinstance(obj, list) else [obj]
    else:
        rows = list(csv.DictReader(text.splitlines()))
    out = []
    for i, row in enumerate(rows):
        try:
            counters = EventCounters(*(int(row[f]) for f in FIELDS),
                                     cycles=int(row.get("cycles") or 0))
        except KeyError as exc:
            raise UsageError(f"counter row {i} is missing {exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise UsageError(f"counter row {i}: {exc}") from None
        out.append((str(row.get("name", f"row{i}")), counters))
    return out


def _open_in(path):
    if path in (None, "-"):
        return sys.stdin
    try:
        return open(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _emit_rows(rows, fields, fmt, out):
    if fmt == "json":
        json.dump(rows, out, indent=2)
        out.write("\n")
    else:
        w = csv.DictWriter(out, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


# -- commands -----------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    name, _, sim = _simulator(args.image, args)
    report = sim.run(args.max_instructions)
    doc = {
        "name": name,
        "config": report.config.key,
        "exit": report.exit_reason.value,
        "instructions": report.instructions,
        "cycles": report.cycles,
        "wall_time_s": report.wall_time_s,
        "counters": report.counters.to_json(),
        "opcode_histogram": dict(sorted(report.counters.opcode_histogram.items())),
        "registers": {k: (f"{v:#010x}" if isinstance(v, int) and not isinstance(v, bool) else v)
                      for k, v in report.registers.items()},
    }
    if report.fault_address is not None:
        doc["fault_address"] = f"{report.fault_address:#010x}"
        doc["diagnostic"] = report.diagnostic
    if args.model:
        doc["energy_nj"] = _json_nj(estimate(report.counters, resolve_model(args.model)))
    if args.format == "json":
        json.dump(doc, out, indent=2)
        out.write("\n")
    else:
        row = {"name": name, "exit": doc["exit"], **doc["counters"],
               "wall_time_s": doc["wall_time_s"]}
        fields = ["name", "exit", *FIELDS, "cycles", "wall_time_s"]
        if "energy_nj" in doc:
            row["energy_nj"] = fmt_nj(estimate(report.counters, resolve_model(args.model)))
            fields.append("energy_nj")
        _emit_rows([row], fields, "csv", out)
    if report.exit_reason is not ExitReason.BREAKPOINT:
        print(f"em0: simulation ended with {report.exit_reason.value}"
              + (f": {report.diagnostic}" if report.diagnostic else ""), file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def _profile_one(spec, args):
    name, _, sim = _simulator(spec, args)
    report = sim.run(args.max_instructions)
    row = {"name": args.name or name, **report.counters.to_json()}
    return row, report.exit_reason.value, report.diagnostic


def cmd_profile(args, out) -> int:
    if args.jobs > 1 and len(args.images) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_profile_one, args.images, [args] * len(args.images)))
    else:
        results = [_profile_one(spec, args) for spec in args.images]
    _emit_rows([r for r, _, _ in results], PROFILE_FIELDS, args.format, out)
    status = EXIT_OK
    for (row, reason, diag) in results:
        if reason != ExitReason.BREAKPOINT.value:
            print(f"em0: {row['name']}: simulation ended with {reason} {diag}".rstrip(),
                  file=sys.stderr)
            status = EXIT_FAULT
    return status


def cmd_estimate(args, out) -> int:
    model = resolve_model(args.model)
    stream = _open_in(args.counters)
    try:
        rows = read_counters(stream)
    finally:
        if stream is not sys.stdin:
            stream.close()
    result = [{"name": name, "energy_nj": fmt_nj(estimate(c, model))} for name, c in rows]
    if args.format == "json":
        for r in result:
            r["energy_nj"] = float(r["energy_nj"])
    _emit_rows(result, ["name", "energy_nj"], args.format, out)
    return EXIT_OK


def cmd_train(args, out) -> int:
    stream = _open_in(args.csv)
    try:
        dataset = read_csv(stream)
    finally:
        if stream is not sys.stdin:
            stream.close()
    model = fit_nnls(dataset, args.config)
    report = kfold_cv(dataset, k=args.k, shuffle_seed=args.seed,
                      centered=not args.uncentered, jobs=args.jobs)
    if args.output:
        with open(args.output, "w") as fh:
            save_model(model, fh)
    json.dump({"model": model_to_json(model), "evaluation": report.to_json()}, out, indent=2)
    out.write("\n")
    return EXIT_OK


def _parse_counts(obj):
    def keyed(d):
        return {int(k, 0) if isinstance(k, str) else int(k): int(v) for k, v in d.items()}
    if not isinstance(obj, dict) or "blocks" not in obj:
        raise UsageError('counts file must be {"blocks": {...}, "taken": {...}}')
    return keyed(obj["blocks"]), keyed(obj.get("taken", {}))


def cmd_blocks(args, out) -> int:
    name, mem, sim = _simulator(args.image, args)
    entry = sim.state.pc if args.entry is None else args.entry
    cfg = extract_cfg(mem, entry, args.root)
    doc = {
        "name": name,
        "entry": f"{cfg.entry:#010x}",
        "blocks": [cfg.blocks[s].to_json() for s in sorted(cfg.blocks)],
        "errors": [{"address": f"{a:#010x}", "message": m} for a, m in cfg.errors],
    }
    counts = None
    if args.profile:
        execs, taken, _ = profile_blocks(cfg, sim, args.max_instructions)
        counts = execs, taken
    elif args.counts:
        with _open_in(args.counts) as fh:
            counts = _parse_counts(json.load(fh))
    if counts is not None:
        doc["counts"] = {
            "blocks": {f"{k:#010x}": v for k, v in sorted(counts[0].items())},
            "taken": {f"{k:#010x}": v for k, v in sorted(counts[1].items())},
        }
        if args.model:
            est = estimate_static(cfg, counts[0], counts[1], resolve_model(args.model))
            doc["estimate"] = {
                "energy_nj": _json_nj(est.energy_nj),
                "counters": est.counters.to_json(),
                "per_block_nj": {f"{k:#010x}": _json_nj(v)
                                 for k, v in sorted(est.per_block_nj.items())},
            }
    json.dump(doc, out, indent=2)
    out.write("\n")
    return EXIT_OK


def models_rows():
    rows = []
    for cfg in sorted(REGISTRY, key=lambda c: (c.freq_mhz, c.prefetch, c.waitstates)):
        entry = REGISTRY[cfg]
        rows.append({"config": cfg.key,
                     **dict(zip(FIELDS, entry.beta_text)),
                     "mape_percent": entry.mape_percent,
                     "measured_energy_j": entry.measured_energy_j})
    return rows


def cmd_models_list(args, out) -> int:
    rows = models_rows()
    fields = ["config", *FIELDS, "mape_percent", "measured_energy_j"]
    if args.format in ("json", "csv"):
        _emit_rows(rows, fields, args.format, out)
        return EXIT_OK
    widths = {f: max(len(f), *(len(r[f]) for r in rows)) for f in fields}
    out.write("  ".join(f.ljust(widths[f]) for f in fields).rstrip() + "\n")
    for r in rows:
        out.write("  ".join(r[f].ljust(widths[f]) for f in fields).rstrip() + "\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _image_options(p):
    p.add_argument("--base", type=_int, default=None,
                   help="load address for raw images (default: flash base 0x08000000)")
    p.add_argument("--entry", type=_int, default=None,
                   help="start address; default is the reset vector or ELF entry")
    p.add_argument("--config", type=_config, default=HardwareConfig(20, False, 0),
                   help="hardware configuration FREQ,ON|OFF,WS (default 20,OFF,0)")
    p.add_argument("--max-instructions", type=int, default=10_000_000)
    p.add_argument("--flash-size", type=_int, default=64 * 1024)
    p.add_argument("--ram-size", type=_int, default=8 * 1024)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="em0", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run an image and report registers, cycles, counters")
    p.add_argument("image")
    _image_options(p)
    p.add_argument("--model", help="builtin config key or model JSON file for an energy figure")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("profile", help="emit c1..c6 and cycles for one or more images")
    p.add_argument("images", nargs="+")
    _image_options(p)
    p.add_argument("--name", help="row name (default: image file stem)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("estimate", help="energy of counter rows (CSV or JSON; '-' is stdin)")
    p.add_argument("counters", nargs="?", default="-")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="fit an NNLS model and cross-validate it")
    p.add_argument("csv")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=_config, default=HardwareConfig(20, False, 0),
                   help="configuration the trained model is bound to")
    p.add_argument("--output", help="also write the model JSON here")
    p.add_argument("--uncentered", action="store_true", help="report uncentered R^2")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("blocks", help="static basic-block analysis")
    p.add_argument("image")
    _image_options(p)
    p.add_argument("--root", type=_int, action="append", default=[],
                   help="extra code address to explore (repeatable)")
    p.add_argument("--model")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--counts", help="JSON block/taken-edge execution counts")
    src.add_argument("--profile", action="store_true",
                     help="obtain counts by simulating the image")
    p.set_defaults(func=cmd_blocks)

    p = sub.add_parser("models", help="builtin energy models")
    msub = p.add_subparsers(dest="models_command", required=True)
    pl = msub.add_parser("list")
    pl.add_argument("--format", choices=("table", "json", "csv"), default="table")
    pl.set_defaults(func=cmd_models_list)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except (UsageError, Em0Error, json.JSONDecodeError) as exc:
        label = type(exc).__name__ if isinstance(exc, (Em0Error, UnknownBlock)) else "error"
        print(f"em0: {label}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
