"""Posterior summaries and mixing diagnostics for stored chains."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SummaryRow",
    "autocorrelation",
    "inefficiency_factor",
    "hpd_interval",
    "inclusion_probabilities",
    "posterior_summary",
    "pearson",
    "lag_response_summary",
    "MIN_IF_LENGTH",
]

MIN_IF_LENGTH = 100


@dataclass(frozen=True)
class SummaryRow:
    label: str
    mean: float
    sd: float
    q025: float
    q50: float
    q975: float
    hpd_lower: float
    hpd_upper: float
    inefficiency: float  # nan when the chain is too short

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Sample autocorrelations ``rho_0..rho_max_lag`` (biased autocovariance / lag-0).

    A constant series has ``rho_0 = 1`` and zero beyond.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if max_lag is None:
        max_lag = n - 1
    if max_lag >= n:
        raise ValueError(f"series of length {n} is too short for max_lag={max_lag}")
    xc = x - x.mean()
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    c0 = xc @ xc
    if c0 <= 0:
        return out
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return acov / acov[0]


def inefficiency_factor(x) -> float:
    """``1 + 2 sum_k rho_k`` truncated by the initial positive sequence rule.

    Autocorrelations are summed in consecutive pairs ``rho_{2m} + rho_{2m+1}``
    while the pair sums stay positive.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < MIN_IF_LENGTH:
        raise ValueError(f"inefficiency factor needs at least {MIN_IF_LENGTH} draws, got {n}")
    rho = autocorrelation(x)
    if rho.size % 2:
        rho = np.append(rho, 0.0)
    pairs = rho[0::2] + rho[1::2]
    stop = np.flatnonzero(pairs <= 0)
    m = stop[0] if stop.size else pairs.size
    return float(max(-1.0 + 2.0 * pairs[:m].sum(), 0.0))


def hpd_interval(x, prob: float = 0.95) -> tuple[float, float]:
    """Shortest interval containing ``ceil(prob * n)`` of the sorted draws."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no draws")
    k = int(np.ceil(prob * n))
    k = min(max(k, 1), n)
    widths = x[k - 1 :] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def inclusion_probabilities(gamma_draws) -> np.ndarray:
    g = np.asarray(gamma_draws, dtype=float)
    if g.size == 0:
        raise ValueError("no inclusion draws")
    return g.mean(axis=0)


def posterior_summary(draws, labels, prob: float = 0.95) -> list[SummaryRow]:
    """One :class:`SummaryRow` per column of ``draws``."""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] == 0:
        raise ValueError("no draws")
    if len(labels) != draws.shape[1]:
        raise ValueError("one label per parameter is required")
    alpha = (1.0 - prob) / 2.0
    rows = []
    for j, label in enumerate(labels):
        col = draws[:, j]
        lo, hi = hpd_interval(col, prob)
        q = np.quantile(col, [alpha, 0.5, 1.0 - alpha])
        ineff = inefficiency_factor(col) if col.size >= MIN_IF_LENGTH else float("nan")
        rows.append(SummaryRow(label, float(col.mean()), float(col.std(ddof=1)) if col.size > 1 else 0.0,
                               float(q[0]), float(q[1]), float(q[2]), lo, hi, ineff))
    return rows


def pearson(a, b) -> float:
    """Pearson correlation; ``nan`` when either input is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or a.size != b.size:
        raise ValueError("inputs must be non-empty and of equal length")
    ac, bc = a - a.mean(), b - b.mean()
    denom = np.sqrt((ac @ ac) * (bc @ bc))
    if denom == 0:
        return float("nan")
    return float(np.clip((ac @ bc) / denom, -1.0, 1.0))


def lag_response_summary(curves, prob: float = 0.95):
    """Pointwise mean and equal-tailed band of lag-response curve draws (rows = draws)."""
    curves = np.asarray(curves, dtype=float)
    alpha = (1.0 - prob) / 2.0
    lo, hi = np.quantile(curves, [alpha, 1.0 - alpha], axis=0)
    return curves.mean(axis=0), lo, hi
