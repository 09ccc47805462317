"""Lag matrices, B-spline lag bases and design-matrix assembly.

Rows of every lag matrix run backwards in time: row 0 belongs to the most
recent response ``T``, row ``i`` to response ``T - i``. Column ``k`` of the lag
matrix holds the value observed ``start_offset + k`` steps before that row's
response.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "InsufficientHistoryError",
    "TimeSeries",
    "LagSpec",
    "LagMatrix",
    "BasisMatrix",
    "ColumnInfo",
    "DesignMatrix",
    "build_lag_matrix",
    "place_knots",
    "bspline_basis",
    "assemble_design",
    "lag_response_curve",
]


class InsufficientHistoryError(ValueError):
    """The series is too short for the requested lag window."""


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    name: str = "z"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("a time series needs at least one value")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class LagSpec:
    """Lag window: ``tau`` is the largest lag and ``n + 1`` the number of rows."""

    tau: int
    n: int
    start_offset: int = 0

    def __post_init__(self):
        if self.tau < 0 or self.n < 0 or self.start_offset < 0:
            raise ValueError("tau, n and start_offset must be non-negative")

    @property
    def history_needed(self) -> int:
        return self.n + self.tau + self.start_offset + 1


@dataclass(frozen=True)
class LagMatrix:
    entries: np.ndarray
    source: str = "z"


@dataclass(frozen=True)
class BasisMatrix:
    entries: np.ndarray
    degree: int
    interior_knots: tuple = ()

    @property
    def tau(self) -> int:
        return self.entries.shape[0] - 1

    @property
    def width(self) -> int:
        return self.entries.shape[1]


class ColumnInfo(NamedTuple):
    covariate: str
    kind: str  # "intercept", "static" or "basis"
    basis_index: int = -1

    @property
    def label(self) -> str:
        if self.kind == "basis":
            return f"{self.covariate}[{self.basis_index}]"
        return self.covariate


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    group_map: tuple = field(default_factory=tuple)

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.group_map]

    @property
    def covariates(self) -> list[str]:
        """Covariate names in column order, without repeats."""
        return list(dict.fromkeys(c.covariate for c in self.group_map))

    def columns_of(self, covariate: str) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.group_map) if c.covariate == covariate], dtype=int)

    def dynamic_covariates(self) -> list[str]:
        return list(dict.fromkeys(c.covariate for c in self.group_map if c.kind == "basis"))


def build_lag_matrix(z, spec: LagSpec, name: str | None = None) -> LagMatrix:
    """Lag matrix with ``entries[i, k] = z[T - start_offset - i - k]``.

    Parameters
    ----------
    z : TimeSeries or array_like
        Values ordered oldest to newest; ``T`` is the index of the last value.
    spec : LagSpec

    Raises
    ------
    InsufficientHistoryError
        If fewer than ``n + tau + start_offset + 1`` values are available.
    """
    if isinstance(z, TimeSeries):
        values, source = z.values, z.name
    else:
        values, source = np.asarray(z, dtype=float), "z"
    if name is not None:
        source = name
    need = spec.history_needed
    if values.size < need:
        raise InsufficientHistoryError(
            f"series {source!r} has {values.size} values but tau={spec.tau}, n={spec.n}, "
            f"start_offset={spec.start_offset} need {need} (short by {need - values.size})"
        )
    last = values.size - 1 - spec.start_offset
    window = values[last - spec.n - spec.tau : last + 1]
    # each window row holds z[s .. s + tau]; reverse both axes to get newest-first
    entries = sliding_window_view(window, spec.tau + 1)[::-1, ::-1].copy()
    return LagMatrix(entries=entries, source=source)


def place_knots(tau: int, n_knots: int) -> np.ndarray:
    """Evenly spaced interior knots over the lag range ``[0, tau]``.

    Knot ``j`` sits at the ``j / (n_knots + 1)`` quantile of the lag range,
    rounded to the nearest half-integer and kept strictly inside ``(0, tau)``.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1 to place knots")
    if n_knots < 0:
        raise ValueError("n_knots must be non-negative")
    if n_knots >= tau:
        raise ValueError(f"too many knots: {n_knots} interior knots do not fit in lags 0..{tau}")
    raw = tau * np.arange(1, n_knots + 1) / (n_knots + 1)
    knots = np.round(raw * 2.0) / 2.0
    return np.clip(knots, 0.5, tau - 0.5)


def _cox_de_boor(x: np.ndarray, t: np.ndarray, degree: int) -> np.ndarray:
    n_basis = t.size - degree - 1
    # degree-0 indicators on half-open spans; the last non-empty span is closed
    B = np.zeros((x.size, t.size - 1))
    for i in range(t.size - 1):
        if t[i] < t[i + 1]:
            B[:, i] = (x >= t[i]) & (x < t[i + 1])
    last = np.max(np.nonzero(t[:-1] < t[1:])[0])
    B[x == t[-1], last] = 1.0
    for d in range(1, degree + 1):
        nxt = np.zeros((x.size, t.size - 1 - d))
        for i in range(t.size - 1 - d):
            left = t[i + d] - t[i]
            right = t[i + d + 1] - t[i + 1]
            if left > 0:
                nxt[:, i] += (x - t[i]) / left * B[:, i]
            if right > 0:
                nxt[:, i] += (t[i + d + 1] - x) / right * B[:, i + 1]
        B = nxt
    return B[:, :n_basis]


def bspline_basis(tau: int, degree: int, interior_knots: Sequence[float] = ()) -> BasisMatrix:
    """B-spline basis on the integer lags ``0..tau`` with clamped boundary knots.

    Returns a ``(tau + 1) x (degree + 1 + len(interior_knots))`` matrix whose
    rows sum to one.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    knots = np.asarray(interior_knots, dtype=float).ravel()
    if knots.size and (np.any(np.diff(knots) <= 0) or knots[0] <= 0 or knots[-1] >= tau):
        raise ValueError(f"interior knots must be strictly ascending inside (0, {tau}), got {knots.tolist()}")
    x = np.arange(tau + 1, dtype=float)
    if tau == 0:
        if knots.size:
            raise ValueError("no interior knots are possible when tau = 0")
        entries = np.zeros((1, degree + 1))
        entries[0, 0] = 1.0
        return BasisMatrix(entries=entries, degree=degree, interior_knots=())
    t = np.concatenate([np.zeros(degree + 1), knots, np.full(degree + 1, float(tau))])
    entries = _cox_de_boor(x, t, degree)
    return BasisMatrix(entries=entries, degree=degree, interior_knots=tuple(knots.tolist()))


def _static_items(statics):
    if statics is None:
        return []
    if isinstance(statics, dict):
        return list(statics.items())
    items = []
    for j, s in enumerate(statics):
        if isinstance(s, TimeSeries):
            items.append((s.name, s.values))
        elif isinstance(s, tuple) and len(s) == 2 and isinstance(s[0], str):
            items.append(s)
        else:
            items.append((f"static_{j + 1}", s))
    return items


def assemble_design(statics=None, include_intercept: bool = True, dynamics=()) -> DesignMatrix:
    """Concatenate ``[intercept | statics | Z_1 B_1 | Z_2 B_2 | ...]``.

    Parameters
    ----------
    statics : dict, or sequence of arrays / ``(name, array)`` pairs / TimeSeries
        Contemporaneous predictors, in declaration order.
    include_intercept : bool
    dynamics : sequence of ``(LagMatrix, BasisMatrix)``

    Returns
    -------
    DesignMatrix
        ``group_map`` records the covariate, kind and basis index of each column.
    """
    static_items = _static_items(statics)
    dynamics = list(dynamics)
    n_rows = set()
    for name, col in static_items:
        n_rows.add(("static", name, np.asarray(col).shape[0]))
    for lag, basis in dynamics:
        if lag.entries.shape[1] != basis.entries.shape[0]:
            raise ValueError(
                f"lag matrix {lag.source!r} has {lag.entries.shape[1]} lags but basis has {basis.entries.shape[0]} rows"
            )
        n_rows.add(("dynamic", lag.source, lag.entries.shape[0]))
    counts = {r[2] for r in n_rows}
    if len(counts) > 1:
        detail = ", ".join(f"{kind} {name!r}: {n}" for kind, name, n in sorted(n_rows))
        raise ValueError(f"row-count mismatch between design blocks ({detail})")
    if not counts:
        raise ValueError("design needs at least one static or dynamic block to fix the row count")
    n = counts.pop()

    blocks, info = [], []
    if include_intercept:
        blocks.append(np.ones((n, 1)))
        info.append(ColumnInfo("intercept", "intercept"))
    for name, col in static_items:
        blocks.append(np.asarray(col, dtype=float).reshape(n, 1))
        info.append(ColumnInfo(name, "static"))
    for lag, basis in dynamics:
        blocks.append(lag.entries @ basis.entries)
        info.extend(ColumnInfo(lag.source, "basis", j) for j in range(basis.width))
    return DesignMatrix(X=np.hstack(blocks), group_map=tuple(info))


def lag_response_curve(basis: BasisMatrix, beta_d) -> np.ndarray:
    """Lag-response ``curve[k] = sum_j basis[k, j] * beta_d[j]`` over lags ``0..tau``.

    ``beta_d`` may be a single coefficient vector or a 2-d array of draws
    (one per row), in which case one curve per draw is returned.
    """
    beta_d = np.asarray(beta_d, dtype=float)
    if beta_d.shape[-1] != basis.width:
        raise ValueError(f"expected {basis.width} coefficients, got {beta_d.shape[-1]}")
    return beta_d @ basis.entries.T
