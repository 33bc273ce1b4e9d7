"""Technical indicators and Fourier-truncated trends for the GAN-with-indicators model.

Warm-up positions of trailing indicators are returned as NaN and trimmed by
:func:`feature_matrix`.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataprep import WindowedDataset, minmax_apply, minmax_fit, train_test_split, window_count

COLUMNS = ("adj_close", "ma7", "ma21", "ema", "momentum", "fourier_3", "fourier_6", "fourier_9")
DEFAULT_EMA_SPAN = 12
DEFAULT_MOMENTUM_LAG = 10
DEFAULT_FOURIER = (3, 6, 9)


def _series(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float).ravel()
    if not np.all(np.isfinite(p)):
        raise ValueError("prices must be finite")
    return p


def moving_average(prices, w: int) -> np.ndarray:
    p = _series(prices)
    if w < 1:
        raise ValueError(f"window must be >= 1, got {w}")
    if w > p.size:
        raise ValueError(f"window {w} longer than series of length {p.size}")
    out = np.full(p.size, np.nan)
    csum = np.concatenate([[0.0], np.cumsum(p)])
    out[w - 1:] = (csum[w:] - csum[:-w]) / w
    return out


def ema(prices, span: int = DEFAULT_EMA_SPAN) -> np.ndarray:
    p = _series(prices)
    if span < 1:
        raise ValueError(f"span must be >= 1, got {span}")
    alpha = 2.0 / (span + 1)
    out = np.empty_like(p)
    if p.size:
        out[0] = p[0]
    for t in range(1, p.size):
        out[t] = alpha * p[t] + (1 - alpha) * out[t - 1]
    return out


def momentum(prices, k: int = DEFAULT_MOMENTUM_LAG) -> np.ndarray:
    p = _series(prices)
    if k < 1:
        raise ValueError(f"lag must be >= 1, got {k}")
    if k >= p.size:
        raise ValueError(f"lag {k} must be shorter than the series ({p.size})")
    out = np.full(p.size, np.nan)
    out[k:] = p[k:] - p[:-k]
    return out


def fourier_trends(prices, components=DEFAULT_FOURIER) -> list[np.ndarray]:
    """Low-pass reconstructions keeping the DC term and the c lowest conjugate frequency pairs."""
    p = _series(prices)
    n = p.size
    spectrum = np.fft.fft(p)
    freq = np.minimum(np.arange(n), n - np.arange(n))
    out = []
    for c in components:
        c = int(c)
        if c < 1 or c > n / 2:
            raise ValueError(f"component count {c} must lie in [1, {n // 2}] for length {n}")
        kept = np.where(freq <= c, spectrum, 0)
        out.append(np.fft.ifft(kept).real)
    return out


@dataclass
class FeatureMatrix:
    columns: tuple[str, ...]
    values: np.ndarray
    offset: int

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def to_csv(self, path, dates=None) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow((["date"] if dates is not None else []) + list(self.columns))
            for i, row in enumerate(self.values):
                lead = [dates[self.offset + i].isoformat()] if dates is not None else []
                w.writerow(lead + [repr(float(v)) for v in row])


def feature_matrix(prices, ema_span: int = DEFAULT_EMA_SPAN,
                   momentum_lag: int = DEFAULT_MOMENTUM_LAG,
                   fourier=DEFAULT_FOURIER) -> FeatureMatrix:
    p = _series(prices)
    warm = max(21, momentum_lag + 1)
    if p.size < warm:
        raise ValueError(f"series of length {p.size} shorter than indicator warm-up {warm}")
    cols = [p, moving_average(p, 7), moving_average(p, 21), ema(p, ema_span), momentum(p, momentum_lag)]
    cols += fourier_trends(p, fourier)
    names = COLUMNS[:5] + tuple(f"fourier_{c}" for c in fourier)
    values = np.column_stack(cols)[warm - 1:]
    return FeatureMatrix(names, values, warm - 1)


def feature_windows(prices, spec, ratio: float = 0.8, ema_span: int = DEFAULT_EMA_SPAN,
                    momentum_lag: int = DEFAULT_MOMENTUM_LAG, fourier=DEFAULT_FOURIER):
    """Train/test windows over all feature columns with an adj_close target.

    Indicators are computed on the raw series, warm-up rows are dropped, and
    every column is min-max scaled with bounds fitted on the training rows.
    Returns ``(train, test)`` datasets whose past windows have shape (n, b, 8).
    """
    if spec.overlapped:
        raise ValueError("feature windows do not support the overlapped layout")
    fm = feature_matrix(prices, ema_span, momentum_lag, fourier)
    raw = _series(prices)[fm.offset:]
    train_rows, test_rows = train_test_split(fm.values, ratio)
    scalings = tuple(minmax_fit(train_rows[:, j]) for j in range(train_rows.shape[1]))
    out = []
    for split, rows, base in (("train", train_rows, 0), ("test", test_rows, len(train_rows))):
        count = window_count(len(rows), spec.b, spec.f, spec.stride)
        if count == 0:
            raise ValueError(f"{split} segment of length {len(rows)} too short for b={spec.b}, f={spec.f}")
        scaled = np.column_stack([minmax_apply(rows[:, j], s) for j, s in enumerate(scalings)])
        starts = np.arange(count) * spec.stride
        past = np.stack([scaled[t:t + spec.b] for t in starts])
        target = np.stack([scaled[t + spec.b:t + spec.b + spec.f, 0] for t in starts])
        truth = np.stack([raw[base + t + spec.b:base + t + spec.b + spec.f] for t in starts])
        out.append(WindowedDataset(spec, past, target, scalings[0], truth, starts + base + fm.offset,
                                   split, fm.columns, scalings))
    return out[0], out[1]
