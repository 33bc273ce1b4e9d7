"""Layered RY + ring-CNOT ansatz, parameter-shift gradients and resource counts."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from math import pi

import numpy as np

from . import qsim
from .qsim import StateVector

SHIFT = pi / 2
DEFAULT_LAYERS = 3


def ceil_log2(n: int) -> int:
    if n < 1:
        raise ValueError(f"ceil_log2 needs n >= 1, got {n}")
    return (int(n) - 1).bit_length()


def qubits_required(b: int, f: int) -> int:
    """Qubits for the fully quantum GAN: past register + future register + SWAP ancilla."""
    if b < 1 or f < 1:
        raise ValueError(f"window sizes must be positive, got b={b}, f={f}")
    return ceil_log2(b) + ceil_log2(f) + 1


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_layers: int = DEFAULT_LAYERS
    entangler: str = "ring-cnot"

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"ansatz needs at least one qubit, got {self.n_qubits}")
        if self.n_layers < 1:
            raise ValueError(f"ansatz needs at least one layer, got {self.n_layers}")
        if self.entangler != "ring-cnot":
            raise ValueError(f"unsupported entangler {self.entangler!r}")

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits

    def ring(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        if n == 1:
            return []
        if n == 2:
            # closing edge would repeat the same pair
            return [(0, 1)]
        return [(i, (i + 1) % n) for i in range(n)]


def check_params(spec: AnsatzSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape[-1]}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("ansatz parameters must be finite")
    return theta


def ansatz_tensor(psi: np.ndarray, spec: AnsatzSpec, theta: np.ndarray, register) -> np.ndarray:
    """Batched ansatz; ``theta`` is (n_params,) or (B, n_params) for per-circuit angles."""
    register = list(register)
    theta = np.asarray(theta, dtype=float)
    k = 0
    for _ in range(spec.n_layers):
        for q in register:
            psi = qsim.apply_1q(psi, qsim.ry_matrix(theta[..., k]), q)
            k += 1
        for i, j in spec.ring():
            psi = qsim.apply_cnot(psi, register[i], register[j])
    return psi


def apply_ansatz(state: StateVector, spec: AnsatzSpec, params, register=None) -> StateVector:
    register = list(range(spec.n_qubits)) if register is None else list(register)
    if len(register) != spec.n_qubits:
        raise ValueError(f"register has {len(register)} qubits, ansatz expects {spec.n_qubits}")
    qsim._check_indices(register, state.n_qubits)
    theta = check_params(spec, params)
    if theta.ndim != 1:
        raise ValueError("apply_ansatz takes a single parameter vector")
    psi = ansatz_tensor(qsim._as_tensor(state.amplitudes, state.n_qubits), spec, theta, register)
    return StateVector(state.n_qubits, qsim._flat(psi)[0])


def shifted_params(theta: np.ndarray) -> np.ndarray:
    """Stack of parameter vectors: row 2i is theta + shift*e_i, row 2i+1 is theta - shift*e_i."""
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    eye = np.eye(p) * SHIFT
    out = np.empty((2 * p, p))
    out[0::2] = theta + eye
    out[1::2] = theta - eye
    return out


def parameter_shift_gradient(loss_fn, params) -> np.ndarray:
    """Exact gradient of an RY-expectation functional: (L(t + pi/2 e_i) - L(t - pi/2 e_i)) / 2."""
    theta = np.asarray(params, dtype=float)
    grad = np.empty_like(theta)
    for i, row in enumerate(shifted_params(theta).reshape(theta.size, 2, -1)):
        plus, minus = float(loss_fn(row[0])), float(loss_fn(row[1]))
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise ValueError(f"loss is not finite at shifted parameter {i}")
        grad[i] = (plus - minus) / 2
    return grad


def parameter_shift_jacobian(values_fn, params) -> np.ndarray:
    """Jacobian of a vector of expectations w.r.t. theta.

    ``values_fn`` maps a (K, n_params) stack of parameter vectors to a (K, m)
    array, so all 2 * n_params shifted circuits can be evaluated in one batch.
    Returns shape (m, n_params).
    """
    theta = np.asarray(params, dtype=float)
    vals = np.asarray(values_fn(shifted_params(theta)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite value in parameter-shift evaluation")
    return ((vals[0::2] - vals[1::2]) / 2).T


# -- resource accounting ------------------------------------------------------

def embed_depth(n: int) -> int:
    """Depth model for amplitude embedding on n qubits (multiplexed-rotation count)."""
    return 2 ** (n + 1) - 2


def ansatz_depth(n_layers: int) -> int:
    return 2 * n_layers


def swap_test_depth(n_future: int) -> int:
    return n_future + 2


@dataclass(frozen=True)
class ResourceReport:
    b: int
    f: int
    qubits: int
    depth: int
    trainable_params: int
    n_layers: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["depth_model"] = "(2^(n_b+1) - 2) + 2*L + (n_f + 2)"
        return d


def resource_report(b: int, f: int, spec: AnsatzSpec | int = DEFAULT_LAYERS) -> ResourceReport:
    n_layers = spec.n_layers if isinstance(spec, AnsatzSpec) else int(spec)
    if n_layers < 1:
        raise ValueError(f"n_layers must be >= 1, got {n_layers}")
    qubits = qubits_required(b, f)
    n_b, n_f = ceil_log2(b), ceil_log2(f)
    depth = embed_depth(n_b) + ansatz_depth(n_layers) + swap_test_depth(n_f)
    return ResourceReport(b, f, qubits, depth, n_layers * n_b, n_layers)
