"""Fit and evaluate no-intercept NNLS energy models."""

from __future__ import annotations

import csv
import hashlib
import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .counters import FIELDS, EventCounters
from .energy import EnergyModel
from .errors import DegenerateDesign, InsufficientData, SchemaError, ZeroVariance
from .timing import HardwareConfig

MIN_SAMPLES = 6
CSV_HEADER = ("name",) + FIELDS + ("energy_nj",)
DEFAULT_CONFIG = HardwareConfig(20, False, 0)


@dataclass(frozen=True)
class TrainingSample:
    name: str
    counters: EventCounters
    energy_nj: float

    def __post_init__(self):
        if not self.energy_nj > 0:
            raise ValueError(f"sample {self.name!r}: energy must be positive")
        if self.counters.instructions <= 0:
            raise ValueError(f"sample {self.name!r}: no instructions executed")


@dataclass(frozen=True)
class EvaluationReport:
    k: int
    seed: int
    centered: bool
    r2_per_fold: tuple[float, ...]
    r2_mean: float
    r2_std: float
    mape_percent: float                   # out-of-fold predictions
    residuals: tuple[tuple[str, float], ...]   # (name, predicted - measured) nJ
    folds: tuple[tuple[int, ...], ...]    # sample indices per fold

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "r2_definition": "centered" if self.centered else "uncentered",
            "r2_per_fold": list(self.r2_per_fold),
            "r2_mean": self.r2_mean,
            "r2_std": self.r2_std,
            "mape_percent": self.mape_percent,
            "residuals_nj": [{"name": n, "residual": r} for n, r in self.residuals],
        }


def design(dataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([s.counters.vector for s in dataset], dtype=np.float64).reshape(-1, 6)
    y = np.array([s.energy_nj for s in dataset], dtype=np.float64)
    return X, y


def solve_nnls(X, y, backend=None) -> np.ndarray:
    """NNLS without intercept.  Columns are scaled to unit norm before solving
    (the optimum is invariant to positive column scaling) and all-zero
    columns are pinned to zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    norms = np.sqrt((X ** 2).sum(axis=0))
    live = norms > 0
    if not live.any():
        raise DegenerateDesign("every regressor column is zero")
    if not live.all():
        dead = [FIELDS[i] for i in np.flatnonzero(~live)]
        warnings.warn(f"counters {dead} are zero in every sample; their coefficients are 0",
                      stacklevel=3)
    scaled = X[:, live] / norms[live]
    z = _kernels.nnls(scaled, y, backend=backend)
    beta = np.zeros(X.shape[1])
    beta[live] = z / norms[live]
    return np.maximum(beta, 0.0)


def fingerprint(dataset) -> str:
    buf = io.StringIO()
    write_csv(dataset, buf)
    return hashlib.sha256(buf.getvalue().encode()).hexdigest()[:16]


def fit_nnls(dataset, config: HardwareConfig = DEFAULT_CONFIG, backend=None) -> EnergyModel:
    dataset = list(dataset)
    if len(dataset) < MIN_SAMPLES:
        raise InsufficientData(f"need at least {MIN_SAMPLES} samples, got {len(dataset)}")
    X, y = design(dataset)
    beta = solve_nnls(X, y, backend=backend)
    return EnergyModel(config, tuple(float(b) for b in beta),
                       f"trained:sha256:{fingerprint(dataset)}")


def predict(model: EnergyModel, dataset) -> np.ndarray:
    X, _ = design(dataset)
    return X @ np.asarray(model.beta)


def mape(model: EnergyModel, dataset) -> float:
    dataset = list(dataset)
    _, y = design(dataset)
    return _kernels.mape_percent(y, predict(model, dataset))


def r_squared(model: EnergyModel, samples, centered: bool = True) -> float:
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientData("R^2 needs at least two samples")
    _, y = design(samples)
    if centered and np.all(y == y[0]):
        raise ZeroVariance("all measured energies are equal")
    return _kernels.r2_score(y, predict(model, samples), centered)


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def kfold_cv(dataset, k: int = 10, shuffle_seed: int = 0, centered: bool = True,
             jobs: int = 1, backend=None) -> EvaluationReport:
    dataset = list(dataset)
    n = len(dataset)
    if k < 2:
        raise ValueError("k must be at least 2")
    if n < k:
        raise InsufficientData(f"{k}-fold cross-validation needs at least {k} samples, got {n}")
    folds = fold_indices(n, k, shuffle_seed)
    if n - max(len(f) for f in folds) < MIN_SAMPLES:
        raise InsufficientData(f"training folds need at least {MIN_SAMPLES} samples")
    X, y = design(dataset)

    def run_fold(test_idx):
        train = np.ones(n, dtype=bool)
        train[test_idx] = False
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            beta = solve_nnls(X[train], y[train], backend=backend)
        pred = X[test_idx] @ beta
        yt = y[test_idx]
        if len(yt) < 2 and centered:
            r2 = float("nan")
        else:
            r2 = _kernels.r2_score(yt, pred, centered, backend=backend)
        return r2, pred

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_fold, folds))
    else:
        results = [run_fold(f) for f in folds]

    oof = np.empty(n)
    for f, (_, pred) in zip(folds, results):
        oof[f] = pred
    r2s = np.array([r for r, _ in results])
    defined = r2s[~np.isnan(r2s)]
    if defined.size == 0:
        raise ZeroVariance("R^2 is undefined on every fold")
    if defined.size < r2s.size:
        warnings.warn("R^2 undefined on folds with fewer than two samples or constant energy",
                      stacklevel=2)
    return EvaluationReport(
        k=k, seed=shuffle_seed, centered=centered,
        r2_per_fold=tuple(float(r) for r in r2s),
        r2_mean=float(defined.mean()),
        r2_std=float(defined.std(ddof=1)) if defined.size > 1 else 0.0,
        mape_percent=_kernels.mape_percent(y, oof, backend=backend),
        residuals=tuple((s.name, float(p - s.energy_nj)) for s, p in zip(dataset, oof)),
        folds=tuple(tuple(int(i) for i in f) for f in folds),
    )


# -- CSV ------------------------------------------------------------------------

def read_csv(stream) -> list[TrainingSample]:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or tuple(h.strip() for h in reader.fieldnames) != CSV_HEADER:
        raise SchemaError(f"training CSV header must be {','.join(CSV_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            counters = EventCounters(*(int(row[f]) for f in FIELDS))
            out.append(TrainingSample(row["name"], counters, float(row["energy_nj"])))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"line {lineno}: {exc}") from exc
    return out


def write_csv(dataset, stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for s in dataset:
        w.writerow([s.name, *s.counters.vector, repr(float(s.energy_nj))])
