"""Training engines for the classical, hybrid and fully quantum GAN forecasters."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import qsim, vqc
from .dataprep import (
    ScalingState, WindowedDataset, WindowSpec, inverse_pipeline, minmax_invert,
    recover_normalization,
)
from .neural import AdamConfig, AdamState, DenseNet, bce_grad, bce_loss

log = logging.getLogger(__name__)

KINDS = ("simple_gan", "gan_ti", "hybrid_qgan", "fqgan", "invertible_fqgan")
QUANTUM_KINDS = ("hybrid_qgan", "fqgan", "invertible_fqgan")
ARTIFACT_VERSION = 1
LOSS_TOL = 1e-9


class TrainingAbort(RuntimeError):
    """Training produced a non-finite loss or otherwise could not continue."""


@dataclass(frozen=True)
class TrainConfig:
    kind: str
    epochs: int = 150
    batch_size: int = 128
    g_adam: AdamConfig = AdamConfig(1.6e-4)
    d_adam: AdamConfig = AdamConfig(1.6e-4)
    n_layers: int = vqc.DEFAULT_LAYERS
    noise_dim: int | None = None
    seed: int = 0
    hp_lambda: float = 1600.0
    hidden: tuple[int, ...] = (64, 64)
    disc_hidden: tuple[int, ...] = (64, 32)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if self.noise_dim is not None and self.noise_dim < 0:
            raise ValueError("noise_dim must be >= 0")

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> "TrainConfig":
        """Per-kind defaults: the quantum-fidelity engines train briefly at a high rate."""
        if kind in ("fqgan", "invertible_fqgan"):
            base = dict(epochs=5, batch_size=16, g_adam=AdamConfig(0.016), d_adam=AdamConfig(0.016))
        else:
            base = {}
        base.update(overrides)
        return cls(kind=kind, **base)

    @property
    def effective_noise_dim(self) -> int:
        if self.noise_dim is not None:
            return self.noise_dim
        return 0 if self.kind in QUANTUM_KINDS else 8

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "epochs": self.epochs, "batch_size": self.batch_size,
            "g_adam": _adam_dict(self.g_adam),
            "d_adam": _adam_dict(self.d_adam), "n_layers": self.n_layers,
            "noise_dim": self.effective_noise_dim, "seed": self.seed,
            "hp_lambda": self.hp_lambda, "hidden": list(self.hidden),
            "disc_hidden": list(self.disc_hidden),
        }


def _adam_dict(c: AdamConfig) -> dict:
    return {"lr": c.lr, "beta1": c.beta1, "beta2": c.beta2, "eps": c.eps}


@dataclass
class ModelArtifact:
    kind: str
    spec: WindowSpec
    scaling: ScalingState | None
    config: dict
    theta: np.ndarray | None = None
    generator: DenseNet | None = None
    discriminator: DenseNet | None = None
    loss_history: list[dict] = field(default_factory=list)
    columns: tuple[str, ...] | None = None

    @property
    def invertible(self) -> bool:
        return self.kind == "invertible_fqgan"

    @property
    def n_layers(self) -> int:
        return int(self.config["n_layers"])

    @property
    def noise_dim(self) -> int:
        return int(self.config["noise_dim"])

    @property
    def hp_lambda(self) -> float:
        return float(self.config["hp_lambda"])

    def to_dict(self) -> dict:
        return {
            "version": ARTIFACT_VERSION,
            "kind": self.kind,
            "invertible": self.invertible,
            "spec": self.spec.to_dict(),
            "scaling": self.scaling.to_dict() if self.scaling else None,
            "config": self.config,
            "theta": None if self.theta is None else self.theta.tolist(),
            "generator": self.generator.to_dict() if self.generator else None,
            "discriminator": self.discriminator.to_dict() if self.discriminator else None,
            "loss_history": self.loss_history,
            "columns": list(self.columns) if self.columns else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArtifact":
        if d.get("version") != ARTIFACT_VERSION:
            raise ValueError(f"unsupported artifact version {d.get('version')}")
        return cls(
            kind=d["kind"],
            spec=WindowSpec.from_dict(d["spec"]),
            scaling=ScalingState.from_dict(d["scaling"]) if d.get("scaling") else None,
            config=d["config"],
            theta=None if d.get("theta") is None else np.array(d["theta"], dtype=float),
            generator=DenseNet.from_dict(d["generator"]) if d.get("generator") else None,
            discriminator=DenseNet.from_dict(d["discriminator"]) if d.get("discriminator") else None,
            loss_history=list(d.get("loss_history", [])),
            columns=tuple(d["columns"]) if d.get("columns") else None,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def write_loss_csv(self, path) -> None:
        lines = ["epoch,loss_g,loss_d"]
        for row in self.loss_history:
            ld = "" if row.get("loss_d") is None else repr(row["loss_d"])
            lines.append(f"{row['epoch']},{row['loss_g']!r},{ld}")
        Path(path).write_text("\n".join(lines) + "\n")


def noise_inject(rng: np.random.Generator, dim: int, n: int | None = None) -> np.ndarray:
    """Standard-normal noise; shape (dim,) or (n, dim)."""
    if dim < 0:
        raise ValueError(f"noise dimension must be >= 0, got {dim}")
    return rng.standard_normal(dim if n is None else (n, dim))


def _batches(rng: np.random.Generator, n: int, size: int):
    order = rng.permutation(n)
    for start in range(0, n, size):
        yield order[start:start + size]


def _check_finite(value: float, what: str, epoch: int) -> float:
    if not np.isfinite(value):
        raise TrainingAbort(f"{what} became non-finite at epoch {epoch}")
    return value


# -- classical GANs -----------------------------------------------------------

def _flat_past(dataset: WindowedDataset) -> np.ndarray:
    return dataset.past.reshape(len(dataset), -1)


def _build_nets(in_width: int, f: int, config: TrainConfig, rng) -> tuple[DenseNet, DenseNet]:
    noise = config.effective_noise_dim
    gen = DenseNet([in_width + noise, *config.hidden, f], "linear", rng)
    disc = DenseNet([in_width + f, *config.disc_hidden, 1], "sigmoid", rng)
    return gen, disc


def _adversarial_loop(past: np.ndarray, target: np.ndarray, config: TrainConfig, rng,
                      gen_step: Callable, disc: DenseNet) -> list[dict]:
    """Shared epoch/batch loop: discriminator step, then one generator step per batch.

    ``gen_step(idx, xb)`` returns ``(fake, backprop)`` where ``backprop``
    consumes dLoss/dFake and updates the generator.
    """
    n = len(past)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    history = []
    for epoch in range(1, config.epochs + 1):
        lg, ld, nb = 0.0, 0.0, 0
        for idx in _batches(rng, n, config.batch_size):
            xb, yb = past[idx], target[idx]
            fake, backprop = gen_step(idx, xb)
            m = len(idx)
            d_in = np.vstack([np.hstack([xb, yb]), np.hstack([xb, fake])])
            labels = np.concatenate([np.ones(m), np.zeros(m)])[:, None]
            p = disc.forward(d_in)
            loss_d = bce_loss(p, labels)
            grads, _ = disc.backward(bce_grad(p, labels))
            disc.adam_step(grads, config.d_adam)

            ones = np.ones((m, 1))
            p = disc.forward(np.hstack([xb, fake]))
            loss_g = bce_loss(p, ones)
            _, g_in = disc.backward(bce_grad(p, ones))
            backprop(g_in[:, -fake.shape[1]:])
            lg += loss_g
            ld += loss_d
            nb += 1
        history.append({
            "epoch": epoch,
            "loss_g": _check_finite(lg / nb, "generator loss", epoch),
            "loss_d": _check_finite(ld / nb, "discriminator loss", epoch),
        })
    return history


def _train_classical(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    rng = np.random.default_rng(config.seed)
    past, target = _flat_past(dataset), dataset.target
    gen, disc = _build_nets(past.shape[1], target.shape[1], config, rng)
    noise = config.effective_noise_dim

    def gen_step(idx, xb):
        z = noise_inject(rng, noise, len(idx))
        fake = gen.forward(np.hstack([xb, z]))

        def backprop(g_fake):
            grads, _ = gen.backward(g_fake)
            gen.adam_step(grads, config.g_adam)

        return fake, backprop

    history = _adversarial_loop(past, target, config, rng, gen_step, disc)
    return ModelArtifact(config.kind, dataset.spec, dataset.scaling, config.to_dict(),
                         generator=gen, discriminator=disc, loss_history=history,
                         columns=dataset.columns)


def train_simple_gan(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    if dataset.past.ndim != 2 or dataset.spec.overlapped:
        raise ValueError("simple_gan trains on plain (past, future) price windows")
    return _train_classical(dataset, replace(config, kind="simple_gan"))


def train_gan_ti(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    if dataset.past.ndim != 3:
        raise ValueError("gan_ti needs feature windows of shape (n, b, n_features)")
    return _train_classical(dataset, replace(config, kind="gan_ti"))


# -- hybrid QGAN ---------------------------------------------------------------

def hybrid_n_qubits(b: int, noise_dim: int) -> int:
    return b + noise_dim


def hybrid_values(past: np.ndarray, noise: np.ndarray | None = None) -> np.ndarray:
    """Angle-encoding inputs: past values clipped to [0, 1], then squashed noise."""
    vals = np.clip(past, 0.0, 1.0)
    if noise is not None and noise.shape[1]:
        vals = np.hstack([vals, 1.0 / (1.0 + np.exp(-noise))])
    return vals


def hybrid_forward(values: np.ndarray, spec: vqc.AnsatzSpec, theta: np.ndarray) -> np.ndarray:
    """Generator output (1 + <Z_0>) / 2 for each row of encoded values.

    ``theta`` is (P,) or, for batched parameter-shift evaluation, (B, P) with
    one parameter vector per row of ``values``.
    """
    n = spec.n_qubits
    psi = np.zeros((len(values),) + (2,) * n, dtype=complex)
    psi[(slice(None),) + (0,) * n] = 1.0
    for q in range(n):
        psi = qsim.apply_1q(psi, qsim.ry_matrix(np.pi * values[:, q]), q)
    psi = vqc.ansatz_tensor(psi, spec, theta, range(n))
    p = qsim.marginal_tensor(psi, [0])
    return (1.0 + p[:, 0] - p[:, 1]) / 2.0


def hybrid_jacobian(values: np.ndarray, spec: vqc.AnsatzSpec, theta: np.ndarray) -> np.ndarray:
    """d(output)/d(theta) per row via parameter shift, shape (B, P)."""
    m = len(values)

    def stacked(thetas):
        k = len(thetas)
        out = hybrid_forward(np.tile(values, (k, 1)), spec, np.repeat(thetas, m, axis=0))
        return out.reshape(k, m)

    return vqc.parameter_shift_jacobian(stacked, theta)


def hybrid_generator_loss(theta, past, disc: DenseNet, spec: vqc.AnsatzSpec, noise=None) -> float:
    """Non-saturating generator loss -mean log D(past || generated)."""
    vals = hybrid_values(past, noise)
    y = hybrid_forward(vals, spec, np.asarray(theta, dtype=float))
    p = disc.forward(np.hstack([past, y[:, None]]))
    return bce_loss(p, np.ones_like(p))


def hybrid_generator_grad(theta, past, disc: DenseNet, spec: vqc.AnsatzSpec, noise=None) -> np.ndarray:
    """Chain rule: classical input-gradient of D times the parameter-shift Jacobian."""
    theta = np.asarray(theta, dtype=float)
    vals = hybrid_values(past, noise)
    y = hybrid_forward(vals, spec, theta)
    p = disc.forward(np.hstack([past, y[:, None]]))
    _, g_in = disc.backward(bce_grad(p, np.ones_like(p)))
    return g_in[:, -1] @ hybrid_jacobian(vals, spec, theta)


def train_hybrid_qgan(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    config = replace(config, kind="hybrid_qgan")
    spec_w = dataset.spec
    if spec_w.f != 1 or spec_w.overlapped:
        raise ValueError(f"hybrid_qgan predicts a single value; got f={spec_w.target_len}")
    noise = config.effective_noise_dim
    n_qubits = hybrid_n_qubits(spec_w.b, noise)
    if n_qubits > qsim.MAX_QUBITS:
        raise ValueError(f"hybrid_qgan needs {n_qubits} qubits, above the cap of {qsim.MAX_QUBITS}")
    rng = np.random.default_rng(config.seed)
    ansatz = vqc.AnsatzSpec(n_qubits, config.n_layers)
    theta = rng.uniform(-np.pi, np.pi, ansatz.n_params)
    adam = AdamState([theta.shape])
    disc = DenseNet([spec_w.b + 1, *config.disc_hidden, 1], "sigmoid", rng)

    def gen_step(idx, xb):
        z = noise_inject(rng, noise, len(idx))
        vals = hybrid_values(xb, z)
        fake = hybrid_forward(vals, ansatz, theta)[:, None]

        def backprop(g_fake):
            grad = g_fake[:, 0] @ hybrid_jacobian(vals, ansatz, theta)
            adam.step([theta], [grad], config.g_adam)

        return fake, backprop

    history = _adversarial_loop(dataset.past, dataset.target, config, rng, gen_step, disc)
    return ModelArtifact("hybrid_qgan", spec_w, dataset.scaling, config.to_dict(), theta=theta,
                         discriminator=disc, loss_history=history)


# -- fully quantum GAN ------------------------------------------------------------

@dataclass(frozen=True)
class FQLayout:
    """Register layout: generator qubits first, then the data register, then the ancilla."""

    n_gen: int
    n_data: int
    target_len: int

    @classmethod
    def for_spec(cls, spec: WindowSpec) -> "FQLayout":
        n_gen, n_data = vqc.ceil_log2(spec.b), vqc.ceil_log2(spec.target_len)
        if n_data < 1:
            raise ValueError("the fully quantum GAN needs a target window of at least 2 values")
        if n_gen < n_data:
            raise ValueError(
                f"generator register ({n_gen} qubits for b={spec.b}) is smaller than the "
                f"data register ({n_data} qubits for {spec.target_len} target values)"
            )
        layout = cls(n_gen, n_data, spec.target_len)
        if layout.n_qubits > qsim.MAX_QUBITS:
            raise ValueError(f"{layout.n_qubits} qubits exceed the cap of {qsim.MAX_QUBITS}")
        return layout

    @property
    def n_qubits(self) -> int:
        return self.n_gen + self.n_data + 1

    @property
    def gen_register(self) -> list[int]:
        return list(range(self.n_gen))

    @property
    def data_register(self) -> list[int]:
        return list(range(self.n_gen, self.n_gen + self.n_data))

    @property
    def ancilla(self) -> int:
        return self.n_gen + self.n_data


def embed_rows(values: np.ndarray, n_qubits: int, tol: float = 1e-8) -> np.ndarray:
    """Batched amplitude embedding: each unit-norm row padded to 2**n_qubits amplitudes."""
    values = np.asarray(values, dtype=float)
    if values.shape[1] > 2 ** n_qubits:
        raise ValueError(f"{values.shape[1]} values do not fit in {n_qubits} qubits")
    norms = np.linalg.norm(values, axis=1)
    if np.any(np.abs(norms - 1) > tol):
        raise ValueError("amplitude embedding needs unit-norm windows")
    out = np.zeros((len(values), 2 ** n_qubits), dtype=complex)
    out[:, :values.shape[1]] = values
    return out


def fq_gen_states(past_unit: np.ndarray, layout: FQLayout, ansatz: vqc.AnsatzSpec, theta) -> np.ndarray:
    """Generator register after embedding and ansatz, shape (B, 2, ..., 2).

    The ansatz touches only the generator qubits, so it is simulated on that
    register alone before the joint state is formed.
    """
    psi = embed_rows(past_unit, layout.n_gen).reshape((len(past_unit),) + (2,) * layout.n_gen)
    return vqc.ansatz_tensor(psi, ansatz, theta, range(layout.n_gen))


def fq_joint_states(gen: np.ndarray, target_unit: np.ndarray, layout: FQLayout) -> np.ndarray:
    """Generator register (x) embedded target (x) ancilla |0>; the ancilla is the last qubit."""
    m = len(gen)
    data = embed_rows(target_unit, layout.n_data)
    joint = np.einsum("bi,bj->bij", gen.reshape(m, -1), data).reshape(m, -1)
    out = np.zeros((m, 2 * joint.shape[1]), dtype=complex)
    out[:, 0::2] = joint
    return out.reshape((m,) + (2,) * layout.n_qubits)


def fq_swap_p0(gen: np.ndarray, target_unit: np.ndarray, layout: FQLayout) -> np.ndarray:
    """P0 of the partial SWAP test between the leading generator qubits and the data register."""
    joint = fq_joint_states(gen, target_unit, layout)
    return qsim.partial_swap_tensor(joint, layout.gen_register[:layout.n_data],
                                    layout.data_register, layout.ancilla)


def fqgan_loss(theta, past_unit, target_unit, layout: FQLayout, ansatz: vqc.AnsatzSpec) -> float:
    """Mean of 1 - P0 over the batch."""
    gen = fq_gen_states(past_unit, layout, ansatz, np.asarray(theta, dtype=float))
    return float(np.mean(1.0 - fq_swap_p0(gen, target_unit, layout)))


def fqgan_grad(theta, past_unit, target_unit, layout: FQLayout, ansatz: vqc.AnsatzSpec) -> np.ndarray:
    """Parameter-shift gradient of :func:`fqgan_loss`; all shifted circuits run as one batch."""
    theta = np.asarray(theta, dtype=float)
    m = len(past_unit)

    def stacked(thetas):
        k = len(thetas)
        gen = fq_gen_states(np.tile(past_unit, (k, 1)), layout, ansatz, np.repeat(thetas, m, axis=0))
        p0 = fq_swap_p0(gen, np.tile(target_unit, (k, 1)), layout)
        return np.mean(1.0 - p0.reshape(k, m), axis=1)[:, None]

    return vqc.parameter_shift_jacobian(stacked, theta)[0]


def _train_fq(dataset: WindowedDataset, config: TrainConfig, kind: str) -> ModelArtifact:
    if config.effective_noise_dim != 0:
        raise ValueError("the fully quantum GAN uses amplitude embedding and takes no noise inputs")
    layout = FQLayout.for_spec(dataset.spec)
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    past_unit, target_unit = dataset.normalized()
    rng = np.random.default_rng(config.seed)
    ansatz = vqc.AnsatzSpec(layout.n_gen, config.n_layers)
    theta = rng.uniform(-np.pi, np.pi, ansatz.n_params)
    adam = AdamState([theta.shape])
    history = []
    for epoch in range(1, config.epochs + 1):
        total, count = 0.0, 0
        for idx in _batches(rng, len(dataset), config.batch_size):
            loss = fqgan_loss(theta, past_unit[idx], target_unit[idx], layout, ansatz)
            grad = fqgan_grad(theta, past_unit[idx], target_unit[idx], layout, ansatz)
            adam.step([theta], [grad], config.g_adam)
            total += loss * len(idx)
            count += len(idx)
        loss = _check_finite(total / count, "generator loss", epoch)
        if not -LOSS_TOL <= loss <= 0.5 + LOSS_TOL:
            raise TrainingAbort(f"fidelity loss {loss} left [0, 0.5] at epoch {epoch}")
        history.append({"epoch": epoch, "loss_g": float(np.clip(loss, 0.0, 0.5)), "loss_d": None})
        log.info("%s epoch %d loss %.6f", kind, epoch, loss)
    return ModelArtifact(kind, dataset.spec, dataset.scaling, replace(config, kind=kind).to_dict(),
                         theta=theta, loss_history=history)


def train_fqgan(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    if dataset.spec.overlapped:
        raise ValueError("overlapped datasets train the invertible variant")
    return _train_fq(dataset, config, "fqgan")


def train_invertible_fqgan(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    spec = dataset.spec
    if not spec.overlapped:
        raise ValueError("invertible_fqgan needs a dataset built with overlapped windows")
    b, f = spec.b, spec.f
    if len(dataset) and not np.array_equal(dataset.target[:, :f], dataset.past[:, b - f:]):
        raise ValueError("overlapped dataset violates target[:f] == past[b-f:]")
    return _train_fq(dataset, config, "invertible_fqgan")


_TRAINERS = {
    "simple_gan": train_simple_gan,
    "gan_ti": train_gan_ti,
    "hybrid_qgan": train_hybrid_qgan,
    "fqgan": train_fqgan,
    "invertible_fqgan": train_invertible_fqgan,
}


def train(dataset: WindowedDataset, config: TrainConfig) -> ModelArtifact:
    return _TRAINERS[config.kind](dataset, config)


# -- prediction -------------------------------------------------------------------

@dataclass
class Prediction:
    """Per-window forecasts in price units (n, f) plus optional truth and recovered factors."""

    prices: np.ndarray
    scaled: np.ndarray
    truth: np.ndarray | None = None
    factors: np.ndarray | None = None
    split: str = "train"


def fq_readout(past_unit: np.ndarray, layout: FQLayout, ansatz: vqc.AnsatzSpec, theta) -> np.ndarray:
    """sqrt of the marginal distribution on the first data-register-sized generator qubits."""
    psi = fq_gen_states(past_unit, layout, ansatz, theta)
    probs = qsim.marginal_tensor(psi, list(range(layout.n_data)))
    return np.sqrt(probs[:, :layout.target_len])


def _check_compatible(artifact: ModelArtifact, dataset: WindowedDataset) -> None:
    a, d = artifact.spec, dataset.spec
    if (a.b, a.f, a.overlapped) != (d.b, d.f, d.overlapped):
        raise ValueError(f"artifact window spec {a.to_dict()} does not match dataset {d.to_dict()}")
    if artifact.kind == "gan_ti" and dataset.past.ndim != 3:
        raise ValueError("gan_ti artifacts need feature windows")
    if artifact.kind != "gan_ti" and dataset.past.ndim != 2:
        raise ValueError(f"{artifact.kind} artifacts need price windows")


def predict(artifact: ModelArtifact, dataset: WindowedDataset,
            readout: Callable[[np.ndarray], np.ndarray] | None = None) -> Prediction:
    """Forecast prices for every past window in ``dataset``.

    ``readout`` optionally replaces the fully quantum generator: it maps the
    (n, b) unit-norm past windows to (n, target_len) normalized predictions.
    """
    _check_compatible(artifact, dataset)
    scaling = artifact.scaling
    kind = artifact.kind
    f = artifact.spec.f
    truth = dataset.target_prices
    if kind in ("simple_gan", "gan_ti"):
        past = _flat_past(dataset)
        z = np.zeros((len(past), artifact.noise_dim))
        scaled = artifact.generator.forward(np.hstack([past, z]))
        return Prediction(minmax_invert(scaled, scaling), scaled, truth, split=dataset.split)
    if kind == "hybrid_qgan":
        ansatz = vqc.AnsatzSpec(hybrid_n_qubits(artifact.spec.b, artifact.noise_dim), artifact.n_layers)
        z = np.zeros((len(dataset), artifact.noise_dim))
        scaled = hybrid_forward(hybrid_values(dataset.past, z), ansatz, artifact.theta)[:, None]
        return Prediction(minmax_invert(scaled, scaling), scaled, truth, split=dataset.split)

    layout = FQLayout.for_spec(artifact.spec)
    past_unit, _ = dataset.normalized()
    if readout is None:
        ansatz = vqc.AnsatzSpec(layout.n_gen, artifact.n_layers)
        y_hat = fq_readout(past_unit, layout, ansatz, artifact.theta)
    else:
        y_hat = np.asarray(readout(past_unit), dtype=float)
        if y_hat.shape != (len(dataset), layout.target_len):
            raise ValueError(f"readout returned shape {y_hat.shape}, expected "
                             f"{(len(dataset), layout.target_len)}")
    lamb = artifact.hp_lambda
    if kind == "fqgan":
        # stored target norms are not available for genuinely unseen data
        factors = dataset.target_norms
        future = y_hat
    else:
        b = artifact.spec.b
        overlap = dataset.past[:, b - f:]
        factors = np.array([recover_normalization(a, y[:f]).factor for a, y in zip(overlap, y_hat)])
        future = y_hat[:, f:]
        truth = None if truth is None else truth[:, f:]
    prices = np.stack([inverse_pipeline(y, s, scaling, lamb) for y, s in zip(future, factors)])
    return Prediction(prices, future * factors[:, None], truth, factors, dataset.split)
