"""Forecast metrics and the window-size sweep harness."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import dataprep, engines, features
from .dataprep import PriceSeries, WindowSpec
from .engines import TrainConfig

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("kind", "b", "f", "split", "n_pairs", "rmse", "mae", "r2", "error")
WINDOW_LADDER = ((4, 2), (8, 4), (16, 8), (32, 16))


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} truths")
    if p.size == 0:
        raise ValueError("metrics need at least one sample")
    return p, t


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def r2(pred, truth) -> float:
    p, t = _pair(pred, truth)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("R^2 is undefined for a constant truth series")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


@dataclass
class MetricsReport:
    rmse: float
    mae: float
    r2: float | None
    n: int
    split: str
    kind: str = ""
    b: int = 0
    f: int = 0

    @classmethod
    def compute(cls, pred, truth, split: str, kind: str = "", b: int = 0, f: int = 0) -> "MetricsReport":
        try:
            score = r2(pred, truth)
        except ValueError:
            if np.asarray(truth).size == 0:
                raise
            score = None
        return cls(rmse(pred, truth), mae(pred, truth), score, int(np.asarray(truth).size),
                   split, kind, b, f)

    def to_dict(self) -> dict:
        return asdict(self)


def cell_seed(base_seed: int, b: int, f: int, kind: str) -> int:
    digest = hashlib.sha256(f"{base_seed}:{b}:{f}:{kind}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def build_datasets(series: PriceSeries, kind: str, spec: WindowSpec, lamb: float, ratio: float):
    """Train/test datasets shaped for ``kind``."""
    if kind == "gan_ti":
        return features.feature_windows(series.prices, spec, ratio)
    if kind == "invertible_fqgan" and not spec.overlapped:
        spec = replace(spec, overlapped=True)
    prepared = dataprep.prepare(series, spec, lamb, ratio)
    return prepared.train, prepared.test


def train_and_evaluate(series: PriceSeries, config: TrainConfig, spec: WindowSpec,
                       ratio: float = dataprep.DEFAULT_SPLIT) -> list[dict]:
    """prepare -> train -> predict -> metrics on both splits; one row per split."""
    train_ds, test_ds = build_datasets(series, config.kind, spec, config.hp_lambda, ratio)
    artifact = engines.train(train_ds, config)
    rows = []
    for ds in (train_ds, test_ds):
        pred = engines.predict(artifact, ds)
        rep = MetricsReport.compute(pred.prices, pred.truth, ds.split, config.kind, spec.b, spec.f)
        rows.append({"kind": config.kind, "b": spec.b, "f": spec.f, "split": ds.split,
                     "n_pairs": len(ds), "rmse": rep.rmse, "mae": rep.mae, "r2": rep.r2, "error": ""})
    return rows


def window_sweep(series: PriceSeries, windows, kinds, configs: dict | None = None,
                 base_seed: int = 0, stride: int = 1,
                 ratio: float = dataprep.DEFAULT_SPLIT) -> list[dict]:
    """Run every (kind, window) cell with its own derived seed.

    Failures are recorded as rows with an ``error`` message and the sweep
    carries on. Rows come out ordered by kind (as given), window, then split.
    """
    windows = [tuple(int(x) for x in w) for w in windows]
    if not windows:
        raise ValueError("window list is empty")
    if not kinds:
        raise ValueError("kind list is empty")
    configs = configs or {}
    rows = []
    for kind in kinds:
        base = configs.get(kind) or TrainConfig.for_kind(kind)
        for b, f in windows:
            cfg = replace(base, kind=kind, seed=cell_seed(base_seed, b, f, kind))
            try:
                spec = WindowSpec(b, f, stride)
                rows.extend(train_and_evaluate(series, cfg, spec, ratio))
            except (ValueError, engines.TrainingAbort) as exc:
                log.warning("sweep cell %s (%d, %d) failed: %s", kind, b, f, exc)
                for split in ("train", "test"):
                    rows.append({"kind": kind, "b": b, "f": f, "split": split, "n_pairs": 0,
                                 "rmse": None, "mae": None, "r2": None, "error": str(exc)})
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                    for c in SWEEP_COLUMNS])
    return buf.getvalue()


def sweep_json(rows) -> str:
    return json.dumps(rows, indent=1, sort_keys=True) + "\n"
