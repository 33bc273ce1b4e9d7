"""qganf command-line entry point.

Configuration is a flat ``key = value`` text file (``#`` starts a comment);
any key may also be given on the command line as ``key=value`` after the
options, and ``--seed`` / ``--out`` override their keys. Recognized keys:

  input         price CSV with header ``date,adj_close``
  out           output directory (default ``out``)
  seed          integer seed for every random draw (default 0)
  hp_lambda     Hodrick-Prescott smoothing weight (default 1600)
  split_ratio   chronological train fraction (default 0.8)
  b, f          past / future window lengths (default 3, 1)
  stride        step between window starts (default 1)
  overlapped    true/false; forced true for invertible_fqgan
  kind          simple_gan | gan_ti | hybrid_qgan | fqgan | invertible_fqgan
  epochs, batch_size, g_lr, d_lr, beta1, beta2, eps
                training settings; unset ones take per-kind defaults
  layers        ansatz layers (default 3)
  noise_dim     generator noise width (default 8 classical, 0 quantum)
  windows       sweep/resources ladder, e.g. ``4:2,8:4,16:8,32:16``
  kinds         comma-separated model kinds for ``sweep``
  artifact      artifact path for ``predict`` (default OUT/artifact.json)
  dataset       dataset JSON for ``train``/``predict`` (default OUT/dataset_*.json)
  predictions   predictions CSV for ``evaluate`` (default OUT/predictions.csv)

Exit codes: 0 success, 2 configuration error, 3 data error, 4 training abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import dataprep, engines, evaluate, features, vqc
from .dataprep import DataError, WindowSpec
from .engines import KINDS, ModelArtifact, TrainConfig, TrainingAbort
from .neural import AdamConfig

log = logging.getLogger("qganf")

COMMANDS = ("prepare", "features", "train", "predict", "evaluate", "sweep", "resources")
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ABORT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _windows(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        b, _, f = item.partition(":")
        out.append((int(b), int(f)))
    return tuple(out)


def _kinds(text: str) -> tuple[str, ...]:
    return tuple(k.strip() for k in text.split(",") if k.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    input: str | None = None
    out: str = "out"
    seed: int = 0
    hp_lambda: float = dataprep.DEFAULT_HP_LAMBDA
    split_ratio: float = dataprep.DEFAULT_SPLIT
    b: int = 3
    f: int = 1
    stride: int = 1
    overlapped: bool = False
    kind: str = "simple_gan"
    epochs: int | None = None
    batch_size: int | None = None
    g_lr: float | None = None
    d_lr: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    layers: int = vqc.DEFAULT_LAYERS
    noise_dim: int | None = None
    windows: tuple[tuple[int, int], ...] = ()
    kinds: tuple[str, ...] = ()
    artifact: str | None = None
    dataset: str | None = None
    predictions: str | None = None

    _PARSERS = {
        "seed": int, "hp_lambda": float, "split_ratio": float, "b": int, "f": int,
        "stride": int, "overlapped": _bool, "epochs": int, "batch_size": int,
        "g_lr": float, "d_lr": float, "beta1": float, "beta2": float, "eps": float,
        "layers": int, "noise_dim": int, "windows": _windows, "kinds": _kinds,
    }

    @classmethod
    def from_mapping(cls, raw: dict[str, str]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        values = {}
        for key, text in raw.items():
            parse = cls._PARSERS.get(key, str)
            try:
                values[key] = parse(text)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        try:
            if self.kind not in KINDS:
                raise ValueError(f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
            for k in self.kinds:
                if k not in KINDS:
                    raise ValueError(f"unknown kind {k!r} in kinds")
            if not np.isfinite(self.hp_lambda) or self.hp_lambda < 0:
                raise ValueError(f"hp_lambda must be >= 0, got {self.hp_lambda}")
            if not 0 < self.split_ratio < 1:
                raise ValueError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
            self.window_spec()
            self.train_config()
            for b, f in self.windows:
                vqc.qubits_required(b, f)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def window_spec(self, kind: str | None = None) -> WindowSpec:
        kind = kind or self.kind
        overlapped = self.overlapped or kind == "invertible_fqgan"
        return WindowSpec(self.b, self.f, self.stride, overlapped)

    def train_config(self, kind: str | None = None) -> TrainConfig:
        kind = kind or self.kind
        base = TrainConfig.for_kind(kind)
        over = {"seed": self.seed, "hp_lambda": self.hp_lambda, "n_layers": self.layers,
                "noise_dim": self.noise_dim}
        if self.epochs is not None:
            over["epochs"] = self.epochs
        if self.batch_size is not None:
            over["batch_size"] = self.batch_size
        g_lr = self.g_lr if self.g_lr is not None else base.g_adam.lr
        d_lr = self.d_lr if self.d_lr is not None else base.d_adam.lr
        over["g_adam"] = AdamConfig(g_lr, self.beta1, self.beta2, self.eps)
        over["d_adam"] = AdamConfig(d_lr, self.beta1, self.beta2, self.eps)
        return replace(base, **over)


def read_config_file(path) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        raw[key.strip()] = value.strip()
    return raw


# -- helpers ---------------------------------------------------------------------

def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_series(cfg: ExperimentConfig) -> dataprep.PriceSeries:
    if not cfg.input:
        raise ConfigError("this command needs 'input' (price CSV path)")
    path = Path(cfg.input)
    if not path.is_file():
        raise DataError(f"input file {path} does not exist")
    return dataprep.load_csv(path)


def _dataset_path(cfg: ExperimentConfig, split: str) -> Path:
    return Path(cfg.dataset) if cfg.dataset else Path(cfg.out) / f"dataset_{split}.json"


def _load_dataset(path: Path) -> dataprep.WindowedDataset:
    if not path.is_file():
        raise DataError(f"dataset {path} not found; run `qganf prepare` first")
    return dataprep.WindowedDataset.from_dict(json.loads(path.read_text()))


# -- commands ---------------------------------------------------------------------

def cmd_prepare(cfg: ExperimentConfig) -> None:
    series = _load_series(cfg)
    spec = cfg.window_spec()
    train, test = evaluate.build_datasets(series, cfg.kind, spec, cfg.hp_lambda, cfg.split_ratio)
    n_train = int(np.floor(cfg.split_ratio * len(series)))
    provenance = {
        "kind": cfg.kind,
        "hp_lambda": cfg.hp_lambda,
        "split_ratio": cfg.split_ratio,
        "n_points": len(series),
        "n_train": n_train,
        "n_test": len(series) - n_train,
        "spec": spec.to_dict(),
        "train_pairs": len(train),
        "test_pairs": len(test),
        "scaling": train.scaling.to_dict(),
        "scaling_fitted_on": "train",
    }
    if cfg.kind == "gan_ti":
        provenance["note"] = "feature windows; split counts refer to warm-up-trimmed rows"
    out = Path(cfg.out)
    _write(out / "dataset_train.json", _dump(train.to_dict()))
    _write(out / "dataset_test.json", _dump(test.to_dict()))
    _write(out / "provenance.json", _dump(provenance))
    log.info("prepared %d train / %d test pairs", len(train), len(test))


def cmd_features(cfg: ExperimentConfig) -> None:
    series = _load_series(cfg)
    fm = features.feature_matrix(series.prices)
    path = Path(cfg.out) / "features.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    fm.to_csv(path, series.dates)


def cmd_train(cfg: ExperimentConfig) -> None:
    dataset = _load_dataset(_dataset_path(cfg, "train"))
    tcfg = cfg.train_config()
    spec = cfg.window_spec()
    if (dataset.spec.b, dataset.spec.f, dataset.spec.overlapped) != (spec.b, spec.f, spec.overlapped):
        raise ConfigError(f"dataset spec {dataset.spec.to_dict()} does not match config {spec.to_dict()}; "
                          "rerun `qganf prepare`")
    artifact = engines.train(dataset, tcfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    artifact.save(out / "artifact.json")
    artifact.write_loss_csv(out / "loss_history.csv")


def predictions_csv(preds, with_factor: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["split", "window", "horizon", "predicted", "truth"] + (["factor"] if with_factor else [])
    w.writerow(header)
    for p in preds:
        for i, row in enumerate(p.prices):
            for h, value in enumerate(row):
                truth = "" if p.truth is None else repr(float(p.truth[i, h]))
                line = [p.split, i, h, repr(float(value)), truth]
                if with_factor:
                    line.append(repr(float(p.factors[i])))
                w.writerow(line)
    return buf.getvalue()


def cmd_predict(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out)
    art_path = Path(cfg.artifact) if cfg.artifact else out / "artifact.json"
    if not art_path.is_file():
        raise DataError(f"artifact {art_path} not found; run `qganf train` first")
    artifact = ModelArtifact.load(art_path)
    paths = [Path(cfg.dataset)] if cfg.dataset else [out / "dataset_train.json", out / "dataset_test.json"]
    preds = []
    for path in paths:
        dataset = _load_dataset(path)
        try:
            preds.append(engines.predict(artifact, dataset))
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
    _write(out / "predictions.csv", predictions_csv(preds, with_factor=artifact.invertible))


def read_predictions(path: Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    if not path.is_file():
        raise DataError(f"predictions file {path} not found; run `qganf predict` first")
    groups: dict[str, tuple[list, list]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            if not row.get("truth"):
                raise DataError(f"{path}:{lineno}: missing truth value")
            pred, truth = groups.setdefault(row["split"], ([], []))
            pred.append(float(row["predicted"]))
            truth.append(float(row["truth"]))
    return {k: (np.array(p), np.array(t)) for k, (p, t) in groups.items()}


def cmd_evaluate(cfg: ExperimentConfig) -> None:
    out = Path(cfg.out)
    path = Path(cfg.predictions) if cfg.predictions else out / "predictions.csv"
    groups = read_predictions(path)
    report = {}
    for split in sorted(groups):
        pred, truth = groups[split]
        report[split] = evaluate.MetricsReport.compute(pred, truth, split, cfg.kind, cfg.b, cfg.f).to_dict()
    _write(out / "metrics.json", _dump(report))


def cmd_sweep(cfg: ExperimentConfig) -> None:
    if not cfg.windows:
        raise ConfigError("sweep needs a non-empty 'windows' list, e.g. windows=4:2,8:4")
    kinds = cfg.kinds or (cfg.kind,)
    series = _load_series(cfg)
    configs = {k: cfg.train_config(k) for k in kinds}
    rows = evaluate.window_sweep(series, cfg.windows, kinds, configs, cfg.seed, cfg.stride,
                                 cfg.split_ratio)
    out = Path(cfg.out)
    _write(out / "sweep.csv", evaluate.sweep_csv(rows))
    _write(out / "sweep.json", evaluate.sweep_json(rows))


def cmd_resources(cfg: ExperimentConfig) -> None:
    windows = cfg.windows or ((cfg.b, cfg.f),)
    reports = [vqc.resource_report(b, f, cfg.layers).to_dict() for b, f in windows]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["b", "f", "qubits", "depth", "trainable_params", "n_layers"])
    for r in reports:
        w.writerow([r["b"], r["f"], r["qubits"], r["depth"], r["trainable_params"], r["n_layers"]])
    out = Path(cfg.out)
    _write(out / "resources.csv", buf.getvalue())
    _write(out / "resources.json", _dump(reports))


_COMMANDS = {
    "prepare": cmd_prepare, "features": cmd_features, "train": cmd_train,
    "predict": cmd_predict, "evaluate": cmd_evaluate, "sweep": cmd_sweep,
    "resources": cmd_resources,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qganf", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config:
        if not Path(args.config).is_file():
            raise ConfigError(f"config file {args.config} not found")
        raw = read_config_file(args.config)
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        raw[key.strip()] = value.strip()
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.out is not None:
        raw["out"] = args.out
    return ExperimentConfig.from_mapping(raw)


def main(argv=None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"qganf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingAbort as exc:
        print(f"qganf: training aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (ValueError, OSError) as exc:
        print(f"qganf: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
