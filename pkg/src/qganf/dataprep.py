"""Price ingestion, Hodrick-Prescott smoothing, scaling, windowing and their inverses."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solveh_banded

DEFAULT_HP_LAMBDA = 1600.0
DEFAULT_SPLIT = 0.8


class DataError(ValueError):
    """Raised for malformed or invalid input data."""


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    prices: np.ndarray = field(repr=False)

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size != len(self.dates):
            raise DataError("dates and prices must have equal length")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("prices must be finite and positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return self.prices.size

    def slice(self, start: int, stop: int | None = None) -> "PriceSeries":
        return PriceSeries(self.dates[start:stop], self.prices[start:stop])


def load_csv(path) -> PriceSeries:
    path = Path(path)
    rows: dict[dt.date, float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "adj_close"]:
            raise DataError(f"{path}:1: expected header 'date,adj_close', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
                price = float(row[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not np.isfinite(price) or price <= 0:
                raise DataError(f"{path}:{lineno}: price must be positive, got {row[1].strip()}")
            if date in rows:
                raise DataError(f"{path}:{lineno}: duplicate date {date.isoformat()}")
            rows[date] = price
    if not rows:
        raise DataError(f"{path}: no data rows")
    dates = tuple(sorted(rows))
    return PriceSeries(dates, np.array([rows[d] for d in dates]))


def write_csv(series: PriceSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "adj_close"])
        for d, p in zip(series.dates, series.prices):
            w.writerow([d.isoformat(), repr(float(p))])


def hp_filter(prices, lamb: float = DEFAULT_HP_LAMBDA) -> np.ndarray:
    """Hodrick-Prescott trend.

    Solves ``(I + lamb * D'D) trend = y`` with D the (N-2) x N second-difference
    operator. The system matrix is symmetric positive definite and pentadiagonal,
    so it is handed to a banded Cholesky solver in upper-band storage. The solve
    is done for the cycle ``y - trend = (I + lamb * D'D)^-1 lamb * D'Dy``, whose
    right-hand side vanishes for linear input, so large lambda stays accurate.
    """
    y = np.asarray(prices, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("hp_filter input must be finite")
    if not np.isfinite(lamb) or lamb < 0:
        raise ValueError(f"lambda must be finite and >= 0, got {lamb}")
    if lamb == 0:
        return y.copy()
    n = y.size
    if n < 3:
        raise ValueError(f"hp_filter needs at least 3 points for lambda > 0, got {n}")

    # diagonals of D'D
    d0 = np.full(n, 6.0)
    d0[[0, -1]] = 1.0
    d0[[1, -2]] = 5.0
    if n == 3:
        d0[1] = 4.0
    d1 = np.full(n - 1, -4.0)
    d1[[0, -1]] = -2.0
    d2 = np.ones(n - 2)

    ab = np.zeros((3, n))
    ab[2] = 1.0 + lamb * d0
    ab[1, 1:] = lamb * d1
    ab[0, 2:] = lamb * d2
    dy = np.diff(y, 2)
    dtd_y = np.zeros(n)
    dtd_y[:-2] += dy
    dtd_y[1:-1] -= 2 * dy
    dtd_y[2:] += dy
    return y - solveh_banded(ab, lamb * dtd_y)


def train_test_split(series, ratio: float = DEFAULT_SPLIT):
    """Chronological split: train gets the first floor(ratio * N) points."""
    n = len(series)
    if n < 10:
        raise ValueError(f"series too short to split: {n} < 10")
    if not 0 < ratio < 1:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    cut = int(np.floor(ratio * n))
    if isinstance(series, PriceSeries):
        return series.slice(0, cut), series.slice(cut)
    arr = np.asarray(series)
    return arr[:cut], arr[cut:]


@dataclass(frozen=True)
class ScalingState:
    min: float
    max: float
    fitted_on: str = "train"

    def __post_init__(self):
        if not self.max > self.min:
            raise ValueError(f"scaling needs max > min, got min={self.min}, max={self.max}")

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max, "fitted_on": self.fitted_on}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingState":
        return cls(float(d["min"]), float(d["max"]), d.get("fitted_on", "train"))


def minmax_fit(prices, fitted_on: str = "train") -> ScalingState:
    p = np.asarray(prices, dtype=float)
    lo, hi = float(p.min()), float(p.max())
    if hi == lo:
        raise ValueError("cannot min-max scale a constant series")
    return ScalingState(lo, hi, fitted_on)


def minmax_apply(prices, state: ScalingState) -> np.ndarray:
    return (np.asarray(prices, dtype=float) - state.min) / (state.max - state.min)


def minmax_invert(scaled, state: ScalingState) -> np.ndarray:
    return np.asarray(scaled, dtype=float) * (state.max - state.min) + state.min


def l2_normalize(window) -> tuple[np.ndarray, float]:
    w = np.asarray(window, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0:
        raise ValueError("cannot L2-normalize a zero window")
    return w / norm, norm


@dataclass(frozen=True)
class WindowSpec:
    b: int
    f: int
    stride: int = 1
    overlapped: bool = False

    def __post_init__(self):
        if self.b < 1 or self.f < 1 or self.stride < 1:
            raise ValueError(f"b, f and stride must be >= 1, got {self}")
        if self.overlapped and self.f > self.b:
            raise ValueError(f"overlapped windows need f <= b, got b={self.b}, f={self.f}")

    @property
    def target_len(self) -> int:
        return 2 * self.f if self.overlapped else self.f

    def to_dict(self) -> dict:
        return {"b": self.b, "f": self.f, "stride": self.stride, "overlapped": self.overlapped}

    @classmethod
    def from_dict(cls, d: dict) -> "WindowSpec":
        return cls(int(d["b"]), int(d["f"]), int(d.get("stride", 1)), bool(d.get("overlapped", False)))


def window_count(n: int, b: int, f: int, stride: int = 1) -> int:
    if n < b + f:
        return 0
    return (n - b - f) // stride + 1


@dataclass
class WindowedDataset:
    """Windowed pairs in min-max scaled form.

    ``past`` is (n, b) for price windows or (n, b, k) for feature windows,
    ``target`` is (n, target_len). ``target_prices`` holds the untransformed
    prices at the target positions and ``starts`` the index of each past
    window's first point in the source segment.
    """

    spec: WindowSpec
    past: np.ndarray
    target: np.ndarray
    scaling: ScalingState | None
    target_prices: np.ndarray | None = None
    starts: np.ndarray | None = None
    split: str = "train"
    columns: tuple[str, ...] | None = None
    feature_scaling: tuple[ScalingState, ...] | None = None
    hp_lambda: float = 0.0

    def __post_init__(self):
        self.past = np.asarray(self.past, dtype=float)
        self.target = np.asarray(self.target, dtype=float)
        if len(self.past) != len(self.target):
            raise ValueError("past and target must have the same number of windows")
        if self.past.size and self.past.shape[1] != self.spec.b:
            raise ValueError(f"past windows have length {self.past.shape[1]}, spec says {self.spec.b}")
        if self.target.size and self.target.shape[1] != self.spec.target_len:
            raise ValueError("target window length does not match the window spec")
        if self.starts is None:
            self.starts = np.arange(len(self.past)) * self.spec.stride

    def __len__(self) -> int:
        return len(self.past)

    @property
    def past_norms(self) -> np.ndarray:
        flat = self.past.reshape(len(self.past), -1)
        return np.linalg.norm(flat, axis=1)

    @property
    def target_norms(self) -> np.ndarray:
        return np.linalg.norm(self.target, axis=1)

    def normalized(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-window unit-norm copies of past and target."""
        pn, tn = self.past_norms, self.target_norms
        if np.any(pn == 0) or np.any(tn == 0):
            raise ValueError("dataset contains an all-zero window; cannot L2-normalize")
        shape = (-1,) + (1,) * (self.past.ndim - 1)
        return self.past / pn.reshape(shape), self.target / tn[:, None]

    def to_dict(self, include_windows: bool = True) -> dict:
        d = {
            "spec": self.spec.to_dict(),
            "split": self.split,
            "count": len(self),
            "hp_lambda": self.hp_lambda,
            "scaling": self.scaling.to_dict() if self.scaling else None,
            "past_norms": self.past_norms.tolist(),
            "target_norms": self.target_norms.tolist(),
            "out_of_range": bool(
                np.any(self.target < 0) or np.any(self.target > 1)
                or np.any(self.past < 0) or np.any(self.past > 1)
            ),
        }
        if self.columns is not None:
            d["columns"] = list(self.columns)
        if self.feature_scaling is not None:
            d["feature_scaling"] = [s.to_dict() for s in self.feature_scaling]
        if include_windows:
            d["past"] = self.past.tolist()
            d["target"] = self.target.tolist()
            d["starts"] = [int(s) for s in self.starts]
            d["target_prices"] = None if self.target_prices is None else self.target_prices.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "WindowedDataset":
        spec = WindowSpec.from_dict(d["spec"])
        tp = d.get("target_prices")
        fs = d.get("feature_scaling")
        past = np.array(d["past"], dtype=float)
        target = np.array(d["target"], dtype=float)
        if past.size == 0:
            past = past.reshape(0, spec.b)
            target = target.reshape(0, spec.target_len)
        return cls(
            spec=spec,
            past=past,
            target=target,
            scaling=ScalingState.from_dict(d["scaling"]) if d.get("scaling") else None,
            target_prices=None if tp is None else np.array(tp, dtype=float),
            starts=np.array(d["starts"], dtype=int),
            split=d.get("split", "train"),
            columns=tuple(d["columns"]) if d.get("columns") else None,
            feature_scaling=tuple(ScalingState.from_dict(s) for s in fs) if fs else None,
            hp_lambda=float(d.get("hp_lambda", 0.0)),
        )


def _window_index(n: int, spec: WindowSpec) -> np.ndarray:
    count = window_count(n, spec.b, spec.f, spec.stride)
    if count == 0:
        raise ValueError(f"series of length {n} too short for b={spec.b}, f={spec.f}")
    return np.arange(count) * spec.stride


def make_windows(scaled, spec: WindowSpec, scaling: ScalingState | None = None,
                 prices=None, split: str = "train") -> WindowedDataset:
    """Sliding (past, future) pairs: (p[t:t+b], p[t+b:t+b+f]) for t = 0, stride, ..."""
    if spec.overlapped:
        return make_overlapped_windows(scaled, spec.b, spec.f, spec.stride, scaling, prices, split)
    p = np.asarray(scaled, dtype=float)
    starts = _window_index(len(p), spec)
    past = np.stack([p[t:t + spec.b] for t in starts])
    tgt_idx = [np.arange(t + spec.b, t + spec.b + spec.f) for t in starts]
    return _finish(spec, p, past, tgt_idx, starts, scaling, prices, split)


def make_overlapped_windows(scaled, b: int, f: int, stride: int = 1,
                            scaling: ScalingState | None = None, prices=None,
                            split: str = "train") -> WindowedDataset:
    """Pairs whose target p[t+b-f : t+b+f] repeats the last f past values before the f unknowns."""
    if f > b:
        raise ValueError(f"overlapped windows need f <= b, got b={b}, f={f}")
    spec = WindowSpec(b, f, stride, overlapped=True)
    p = np.asarray(scaled, dtype=float)
    starts = _window_index(len(p), spec)
    past = np.stack([p[t:t + b] for t in starts])
    tgt_idx = [np.arange(t + b - f, t + b + f) for t in starts]
    return _finish(spec, p, past, tgt_idx, starts, scaling, prices, split)


def _finish(spec, p, past, tgt_idx, starts, scaling, prices, split) -> WindowedDataset:
    target = np.stack([p[i] for i in tgt_idx])
    target_prices = None
    if prices is not None:
        raw = np.asarray(prices, dtype=float)
        target_prices = np.stack([raw[i] for i in tgt_idx])
    return WindowedDataset(spec, past, target, scaling, target_prices, starts, split)


@dataclass(frozen=True)
class NormalizationRecovery:
    a: np.ndarray
    y_hat: np.ndarray
    factor: float
    residual: float


def recover_normalization(a, y_hat) -> NormalizationRecovery:
    """Least-squares scale: argmin_s sum (a_i - s * y_hat_i)^2 = <a, y_hat> / <y_hat, y_hat>."""
    a = np.asarray(a, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if a.size != y_hat.size or a.size == 0:
        raise ValueError(f"overlap vectors must have equal nonzero length, got {a.size} and {y_hat.size}")
    denom = float(y_hat @ y_hat)
    if denom == 0:
        raise ValueError("cannot recover a normalization factor from an all-zero prediction")
    factor = float(a @ y_hat) / denom
    residual = float(np.sum((a - factor * y_hat) ** 2))
    return NormalizationRecovery(a, y_hat, factor, residual)


def inverse_pipeline(normalized, factor: float, scaling: ScalingState,
                     lamb: float = DEFAULT_HP_LAMBDA) -> np.ndarray:
    """Undo L2 normalization and min-max scaling, then re-smooth with the HP filter."""
    if not factor > 0:
        raise ValueError(f"normalization factor must be positive, got {factor}")
    prices = minmax_invert(factor * np.asarray(normalized, dtype=float), scaling)
    if prices.size < 3:
        return prices
    return hp_filter(prices, lamb)


@dataclass
class PreparedData:
    train: WindowedDataset
    test: WindowedDataset
    provenance: dict


def prepare(series: PriceSeries, spec: WindowSpec, lamb: float = DEFAULT_HP_LAMBDA,
            ratio: float = DEFAULT_SPLIT) -> PreparedData:
    """Smooth the full series, split, fit min-max on train, and window both splits."""
    smooth = hp_filter(series.prices, lamb)
    train_raw, test_raw = train_test_split(series.prices, ratio)
    train_s, test_s = train_test_split(smooth, ratio)
    scaling = minmax_fit(train_s)
    train = make_windows(minmax_apply(train_s, scaling), spec, scaling, train_raw, "train")
    test = make_windows(minmax_apply(test_s, scaling), spec, scaling, test_raw, "test")
    train.hp_lambda = test.hp_lambda = float(lamb)
    test.starts = test.starts + len(train_raw)
    provenance = {
        "hp_lambda": float(lamb),
        "split_ratio": float(ratio),
        "n_points": len(series),
        "n_train": int(len(train_raw)),
        "n_test": int(len(test_raw)),
        "first_date": series.dates[0].isoformat(),
        "last_date": series.dates[-1].isoformat(),
        "spec": spec.to_dict(),
        "train_pairs": len(train),
        "test_pairs": len(test),
        "scaling": scaling.to_dict(),
        "test_out_of_range": bool(np.any(test.past < 0) or np.any(test.past > 1)
                                  or np.any(test.target < 0) or np.any(test.target > 1)),
    }
    return PreparedData(train, test, provenance)
