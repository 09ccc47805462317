"""Synthetic datasets with known distributed-lag effects.

Three dynamic covariates (``rhum``, ``pm10``, ``o3``) enter through fixed
lag-weight curves scaled by an overall effect, alongside two half-normal static
covariates. Responses are negative binomial counts or ALD-thresholded binary
outcomes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import sample_ald
from .lag_design import LagSpec, build_lag_matrix

__all__ = [
    "LagWeightCurve",
    "SimConfig",
    "SimulatedDataset",
    "almon_weights",
    "o3_weights",
    "pm10_weights",
    "rhum_weights",
    "simulate_dataset",
    "write_dataset",
    "read_dynamic_csv",
    "DYNAMIC_NAMES",
]

DYNAMIC_NAMES = ("rhum", "pm10", "o3")


@dataclass(frozen=True)
class LagWeightCurve:
    weights: np.ndarray
    shape: str

    @property
    def tau(self) -> int:
        return self.weights.size - 1


def almon_weights(theta1: float, theta2: float, tau: int) -> LagWeightCurve:
    """Exponential Almon weights ``w_k ~ exp(theta1 k + theta2 k^2)``, ``k = 0..tau``, summing to 1."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    k = np.arange(tau + 1, dtype=float)
    expo = theta1 * k + theta2 * k * k
    w = np.exp(expo - expo.max())
    return LagWeightCurve(w / w.sum(), f"almon({theta1}, {theta2})")


def rhum_weights(tau: int = 40) -> LagWeightCurve:
    return almon_weights(0.32, -0.02, tau)


def o3_weights(tau: int = 40) -> LagWeightCurve:
    """Bimodal mixture ``0.7 almon(0.2, -0.03) + 0.3 almon(6, -0.1)``."""
    w = 0.7 * almon_weights(0.2, -0.03, tau).weights + 0.3 * almon_weights(6.0, -0.1, tau).weights
    return LagWeightCurve(w, "0.7 almon(0.2, -0.03) + 0.3 almon(6, -0.1)")


def pm10_weights(tau: int = 40) -> LagWeightCurve:
    """Linearly decreasing weights ``w_k ~ tau + 1 - k``."""
    if tau < 1:
        raise ValueError("tau must be at least 1")
    w = (tau + 1.0) - np.arange(tau + 1, dtype=float)
    return LagWeightCurve(w / w.sum(), "linear decay")


_CURVES = {"rhum": rhum_weights, "pm10": pm10_weights, "o3": o3_weights}


@dataclass
class SimConfig:
    kind: str = "count"  # "count" or "binary"
    N: int = 5114
    tau: int = 40
    static_effects: tuple = (-0.5, 0.01)
    dynamic_effects: dict = field(default_factory=lambda: {"rhum": 0.5, "pm10": 0.01, "o3": -0.5})
    intercept: float | None = None  # defaults: -1 for counts, 0 for binary
    xi: float = 50.0
    q: float = 0.9
    seed: int = 0
    ar_coef: float = 0.8
    dynamic_csv: str | None = None

    def __post_init__(self):
        if self.kind not in ("count", "binary"):
            raise ValueError(f"kind must be 'count' or 'binary', got {self.kind!r}")
        if self.N < 1 or self.tau < 1:
            raise ValueError("N and tau must be positive")
        if self.intercept is None:
            self.intercept = -1.0 if self.kind == "count" else 0.0


@dataclass
class SimulatedDataset:
    y: np.ndarray  # length N, oldest to newest
    statics: np.ndarray  # N x n_statics
    dynamics: dict  # name -> length N + tau series, oldest to newest
    eta: np.ndarray
    truth: dict

    @property
    def static_names(self) -> list[str]:
        return [f"static_{j + 1}" for j in range(self.statics.shape[1])]


def read_dynamic_csv(path, names=DYNAMIC_NAMES) -> dict:
    """Read the dynamic covariate columns (case-insensitive) from a CSV file."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = {h.lower(): h for h in (reader.fieldnames or [])}
        missing = [n for n in names if n.lower() not in header]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}")
        rows = list(reader)
    out = {}
    for n in names:
        col = header[n.lower()]
        out[n] = np.array([float(r[col]) if r[col] not in ("", "NA", "nan") else np.nan for r in rows])
    return out


def _ar1(n, coef, rng):
    x = np.empty(n)
    x[0] = rng.standard_normal() / np.sqrt(1.0 - coef * coef)
    eps = rng.standard_normal(n)
    for t in range(1, n):
        x[t] = coef * x[t - 1] + eps[t]
    return x


def simulate_dataset(config: SimConfig, rng: np.random.Generator) -> SimulatedDataset:
    """Draw one dataset under ``config``.

    Each dynamic series carries ``tau`` history values before the first
    response. Row ``t`` of the response uses lags ``0..tau`` ending at the
    aligned time point.
    """
    N, tau = config.N, config.tau
    n_hist = N + tau
    if config.dynamic_csv is not None:
        raw = read_dynamic_csv(config.dynamic_csv, tuple(config.dynamic_effects))
        dynamics = {}
        for name, series in raw.items():
            if series.size < n_hist:
                raise ValueError(f"column {name!r} has {series.size} rows; {n_hist} are needed")
            series = series[:n_hist]
            if not np.all(np.isfinite(series)):
                raise ValueError(f"column {name!r} has missing values; impute them first")
            dynamics[name] = series
        source = str(config.dynamic_csv)
    else:
        dynamics = {name: _ar1(n_hist, config.ar_coef, rng) for name in config.dynamic_effects}
        source = f"AR(1) coefficient {config.ar_coef}"

    statics = np.abs(rng.standard_normal((N, len(config.static_effects))))

    eta = np.full(N, float(config.intercept)) + statics @ np.asarray(config.static_effects, dtype=float)
    weights = {}
    spec = LagSpec(tau=tau, n=N - 1)
    for name, effect in config.dynamic_effects.items():
        curve = _CURVES[name](tau) if name in _CURVES else almon_weights(0.0, 0.0, tau)
        weights[name] = curve.weights
        # lag rows are newest-first; flip back to chronological order
        lag = build_lag_matrix(dynamics[name], spec).entries[::-1]
        eta += effect * (lag @ curve.weights)

    truth = {
        "kind": config.kind,
        "N": N,
        "tau": tau,
        "seed": config.seed,
        "intercept": float(config.intercept),
        "static_effects": dict(zip([f"static_{j + 1}" for j in range(statics.shape[1])],
                                   map(float, config.static_effects))),
        "dynamic_effects": {k: float(v) for k, v in config.dynamic_effects.items()},
        "lag_weights": {k: v.tolist() for k, v in weights.items()},
        "dynamic_source": source,
    }
    if config.kind == "count":
        # NB(xi, p) with p = logistic(eta): Poisson-gamma mixture with mean xi * exp(eta)
        rate = rng.gamma(config.xi, 1.0, size=N) * np.exp(eta)
        y = rng.poisson(rate)
        truth["xi"] = float(config.xi)
    else:
        ystar = eta + sample_ald(0.0, 1.0, config.q, rng, size=N)
        y = (ystar > 0).astype(np.int64)
        truth["q"] = float(config.q)
        truth["ystar"] = ystar.tolist()
    return SimulatedDataset(y=np.asarray(y, dtype=np.int64), statics=statics, dynamics=dynamics, eta=eta,
                            truth=truth)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset(ds: SimulatedDataset, csv_path, json_path=None):
    """Write the dataset CSV and the truth-record JSON sidecar.

    The CSV has ``N + tau`` rows: the first ``tau`` carry only dynamic history
    and leave ``y`` and the statics empty.
    """
    csv_path = Path(csv_path)
    json_path = Path(json_path) if json_path is not None else csv_path.with_suffix(".truth.json")
    tau = ds.truth["tau"]
    names = list(ds.dynamics)
    n_hist = next(iter(ds.dynamics.values())).size
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", *ds.static_names, *[f"dyn_{n}" for n in names]])
        for r in range(n_hist):
            t = r - tau
            if t < 0:
                head = [""] * (1 + ds.statics.shape[1])
            else:
                head = [str(int(ds.y[t])), *map(_fmt, ds.statics[t])]
            w.writerow([*head, *[_fmt(ds.dynamics[n][r]) for n in names]])
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(ds.truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path
