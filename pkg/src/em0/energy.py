"""Per-configuration energy models: E = sum(beta_i * c_i), no intercept, nJ."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .counters import FIELDS, EventCounters
from .errors import NegativeCoefficient, SchemaError, UnsupportedConfig
from .timing import HardwareConfig


@dataclass(frozen=True)
class EnergyModel:
    config: HardwareConfig
    beta: tuple[float, float, float, float, float, float]   # nJ per event, c1..c6
    provenance: str = "builtin"

    def __post_init__(self):
        if len(self.beta) != 6:
            raise SchemaError("an energy model has exactly six coefficients")
        for name, b in zip(FIELDS, self.beta):
            if not math.isfinite(b):
                raise SchemaError(f"coefficient {name} is not finite")
            if b < 0:
                raise NegativeCoefficient(f"coefficient {name} = {b} is negative")

    def estimate(self, counters: EventCounters) -> float:
        return estimate(counters, self)


def estimate(counters: EventCounters, model: EnergyModel) -> float:
    """Predicted energy in nJ.  Zero counters give exactly zero."""
    b = model.beta
    c = counters.vector
    return b[0] * c[0] + b[1] * c[1] + b[2] * c[2] + b[3] * c[3] + b[4] * c[4] + b[5] * c[5]


@dataclass(frozen=True)
class RegistryEntry:
    model: EnergyModel
    beta_text: tuple[str, ...]      # published digits
    mape_percent: str
    measured_energy_j: str


# [freq, prefetch, ws] -> (c1..c6 nJ, MAPE %, measured benchmark-set energy J)
_PUBLISHED = (
    ((20, False, 0), ("0.964258", "1.652455", "2.091986", "1.109833", "0.650563", "0.633621"), "2.80", "221.4"),
    ((20, False, 1), ("1.282474", "2.110668", "2.191545", "1.185609", "0.416602", "1.178991"), "2.97", "274.9"),
    ((20, True, 0), ("1.003378", "1.885309", "1.802974", "1.122833", "0.849223", "0.475831"), "2.86", "226.38"),
    ((20, True, 1), ("0.895879", "2.185851", "2.001178", "1.493364", "1.076354", "1.573758"), "3.68", "227.9"),
    ((24, False, 0), ("0.959172", "1.888565", "1.357556", "1.089427", "0.993145", "0.562952"), "3.22", "214.62"),
    ((24, False, 1), ("1.178558", "2.540429", "2.042475", "1.190892", "0.979651", "0.891088"), "3.16", "264.88"),
    ((24, True, 0), ("0.985415", "1.933276", "1.448160", "1.075671", "1.011891", "0.617510"), "3.36", "220.03"),
    ((24, True, 1), ("0.883755", "2.156046", "1.633465", "1.436556", "1.152560", "1.455166"), "4.15", "220.05"),
    ((48, False, 1), ("1.096677", "2.364495", "1.627854", "1.173680", "0.681475", "0.652665"), "3.65", "243.44"),
    ((48, True, 1), ("0.816331", "2.014612", "1.372157", "1.402116", "0.835035", "1.250446"), "4.33", "202.5"),
)


def _build_registry():
    out = {}
    for (f, pf, ws), betas, mape, meas in _PUBLISHED:
        cfg = HardwareConfig(f, pf, ws)
        model = EnergyModel(cfg, tuple(float(b) for b in betas), "builtin")
        out[cfg] = RegistryEntry(model, betas, mape, meas)
    return out


REGISTRY: dict[HardwareConfig, RegistryEntry] = _build_registry()


def lookup(config: HardwareConfig | str) -> EnergyModel:
    if isinstance(config, str):
        config = HardwareConfig.parse(config)
    try:
        return REGISTRY[config].model
    except KeyError:
        raise UnsupportedConfig(f"no builtin energy model for {config}") from None


def format_coefficient(value: float) -> str:
    # repr is the shortest string that round-trips a double exactly
    return repr(float(value))


def model_to_json(model: EnergyModel) -> dict:
    return {
        "config": model.config.to_json(),
        "beta_nj": {name: format_coefficient(b) for name, b in zip(FIELDS, model.beta)},
        "provenance": model.provenance,
    }


def model_from_json(obj) -> EnergyModel:
    if not isinstance(obj, dict):
        raise SchemaError("model must be a JSON object")
    for key in ("config", "beta_nj", "provenance"):
        if key not in obj:
            raise SchemaError(f"missing key {key!r}")
    cfg_obj = obj["config"]
    if not isinstance(cfg_obj, dict) or set(cfg_obj) != {"freq_mhz", "prefetch", "waitstates"}:
        raise SchemaError("config must have freq_mhz, prefetch and waitstates")
    if not isinstance(cfg_obj["prefetch"], bool):
        raise SchemaError("config.prefetch must be a boolean")
    for key in ("freq_mhz", "waitstates"):
        if not isinstance(cfg_obj[key], int) or isinstance(cfg_obj[key], bool):
            raise SchemaError(f"config.{key} must be an integer")
    try:
        cfg = HardwareConfig.from_json(cfg_obj)
    except UnsupportedConfig as exc:
        raise SchemaError(str(exc)) from exc
    beta_obj = obj["beta_nj"]
    if not isinstance(beta_obj, dict):
        raise SchemaError("beta_nj must be an object")
    beta = []
    for name in FIELDS:
        if name not in beta_obj:
            raise SchemaError(f"beta_nj is missing {name!r}")
        text = beta_obj[name]
        if not isinstance(text, str):
            raise SchemaError(f"beta_nj.{name} must be a decimal string")
        try:
            Decimal(text)
        except InvalidOperation:
            raise SchemaError(f"beta_nj.{name} is not a decimal: {text!r}") from None
        beta.append(float(text))
    extra = set(beta_obj) - set(FIELDS)
    if extra:
        raise SchemaError(f"unexpected coefficients {sorted(extra)}")
    if not isinstance(obj["provenance"], str):
        raise SchemaError("provenance must be a string")
    return EnergyModel(cfg, tuple(beta), obj["provenance"])


def save_model(model: EnergyModel, stream) -> None:
    json.dump(model_to_json(model), stream, indent=2)
    stream.write("\n")


def load_model(stream) -> EnergyModel:
    try:
        obj = json.load(stream)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return model_from_json(obj)
