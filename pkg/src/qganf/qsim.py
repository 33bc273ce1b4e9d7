"""Dense statevector simulator.

Qubit 0 is the most significant bit of the basis index, so for three qubits
``|100>`` is amplitude index 4. Internally amplitudes are handled as tensors of
shape ``(batch, 2, 2, ..., 2)`` which lets the training engines push a whole
batch of circuits (and parameter-shifted copies) through one call.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np

MAX_QUBITS = 24
NORM_TOL = 1e-10

_SQRT2_INV = 1.0 / np.sqrt(2.0)
_FIXED_1Q = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_ARITY = {"H": 1, "X": 1, "Z": 1, "RY": 1, "RZ": 1, "CNOT": 2, "CZ": 2, "CSWAP": 3}
_ROTATIONS = ("RY", "RZ")


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] != 2 ** self.n_qubits:
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateOp:
    kind: str
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        if kind not in _ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        if len(targets) != _ARITY[kind]:
            raise ValueError(f"{kind} acts on {_ARITY[kind]} qubit(s), got {len(targets)}")
        if len(set(targets)) != len(targets):
            raise ValueError(f"{kind} targets must be distinct, got {targets}")
        if kind in _ROTATIONS:
            if self.angle is None or not np.isfinite(self.angle):
                raise ValueError(f"{kind} needs a finite angle, got {self.angle!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", targets)


def ry_matrix(theta):
    """RY rotation matrix; ``theta`` may be a scalar or a 1-D array (gives a stack)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def rz_matrix(theta):
    theta = np.asarray(theta, dtype=float)
    zero = np.zeros_like(theta)
    e_m, e_p = np.exp(-0.5j * theta), np.exp(0.5j * theta)
    return np.stack([np.stack([e_m, zero], -1), np.stack([zero, e_p], -1)], -2)


# -- batched tensor kernels -------------------------------------------------
# ``psi`` has shape (B, 2, ..., 2); qubit q lives on axis q + 1.

def _as_tensor(amps: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(amps, dtype=complex).reshape((-1,) + (2,) * n)


def _flat(psi: np.ndarray) -> np.ndarray:
    return psi.reshape(psi.shape[0], -1)


def apply_1q(psi: np.ndarray, mat: np.ndarray, q: int) -> np.ndarray:
    """Apply a 2x2 matrix (or a per-batch stack of shape (B, 2, 2)) to qubit ``q``."""
    x = np.moveaxis(psi, q + 1, -1)
    if mat.ndim == 2:
        y = x @ mat.T
    else:
        batch = x.shape[0]
        y = np.einsum("bkj,bij->bki", x.reshape(batch, -1, 2), mat).reshape(x.shape)
    return np.moveaxis(y, -1, q + 1)


def _index(ndim: int, fixed: dict[int, int]) -> tuple:
    idx = [slice(None)] * ndim
    for q, bit in fixed.items():
        idx[q + 1] = bit
    return tuple(idx)


def apply_cnot(psi: np.ndarray, control: int, target: int) -> np.ndarray:
    out = psi.copy()
    nd = psi.ndim
    out[_index(nd, {control: 1, target: 0})] = psi[_index(nd, {control: 1, target: 1})]
    out[_index(nd, {control: 1, target: 1})] = psi[_index(nd, {control: 1, target: 0})]
    return out


def apply_cz(psi: np.ndarray, control: int, target: int) -> np.ndarray:
    out = psi.copy()
    out[_index(psi.ndim, {control: 1, target: 1})] *= -1
    return out


def apply_cswap(psi: np.ndarray, control: int, a: int, b: int) -> np.ndarray:
    out = psi.copy()
    nd = psi.ndim
    out[_index(nd, {control: 1, a: 0, b: 1})] = psi[_index(nd, {control: 1, a: 1, b: 0})]
    out[_index(nd, {control: 1, a: 1, b: 0})] = psi[_index(nd, {control: 1, a: 0, b: 1})]
    return out


def apply_gate_tensor(psi: np.ndarray, gate: GateOp) -> np.ndarray:
    t = gate.targets
    if gate.kind in _FIXED_1Q:
        return apply_1q(psi, _FIXED_1Q[gate.kind], t[0])
    if gate.kind == "RY":
        return apply_1q(psi, ry_matrix(gate.angle), t[0])
    if gate.kind == "RZ":
        return apply_1q(psi, rz_matrix(gate.angle), t[0])
    if gate.kind == "CNOT":
        return apply_cnot(psi, *t)
    if gate.kind == "CZ":
        return apply_cz(psi, *t)
    return apply_cswap(psi, *t)


def marginal_tensor(psi: np.ndarray, qubits) -> np.ndarray:
    """Batched marginal distribution, shape (B, 2**len(qubits))."""
    n = psi.ndim - 1
    probs = np.abs(psi) ** 2
    keep = [q + 1 for q in qubits]
    rest = tuple(ax for ax in range(1, n + 1) if ax not in keep)
    summed = probs.sum(axis=rest) if rest else probs
    # remaining axes are in ascending order; reorder to the requested order
    order = sorted(keep)
    perm = [0] + [order.index(ax) + 1 for ax in keep]
    return summed.transpose(perm).reshape(psi.shape[0], -1)


def partial_swap_tensor(psi: np.ndarray, register_a, register_b, ancilla: int) -> np.ndarray:
    """Batched ancilla-zero probability of the H / CSWAP... / H network."""
    h = _FIXED_1Q["H"]
    psi = apply_1q(psi, h, ancilla)
    for qa, qb in zip(register_a, register_b):
        psi = apply_cswap(psi, ancilla, qa, qb)
    psi = apply_1q(psi, h, ancilla)
    return marginal_tensor(psi, [ancilla])[:, 0]


# -- public single-state API -------------------------------------------------

def _check_n(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be an integer in [1, {MAX_QUBITS}], got {n_qubits!r}")


def _check_indices(qubits, n_qubits: int) -> list[int]:
    qubits = [int(q) for q in qubits]
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"qubit indices must be distinct, got {qubits}")
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise ValueError(f"qubit index {q} out of range for {n_qubits} qubits")
    return qubits


def zero_state(n_qubits: int) -> StateVector:
    _check_n(n_qubits)
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    _check_indices(gate.targets, state.n_qubits)
    psi = apply_gate_tensor(_as_tensor(state.amplitudes, state.n_qubits), gate)
    return StateVector(state.n_qubits, _flat(psi)[0])


def apply_circuit(state: StateVector, gates) -> StateVector:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def angle_encode(values) -> StateVector:
    """Encode each value v in [0, 1] as RY(pi * v) on its own qubit."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("angle_encode needs at least one value")
    if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise ValueError("angle_encode values must be finite and lie in [0, 1]")
    state = zero_state(values.size)
    for q, v in enumerate(values):
        state = apply_gate(state, GateOp("RY", (q,), pi * float(v)))
    return state


def amplitude_embed(values, n_qubits: int, tol: float = 1e-8) -> StateVector:
    """Write a unit-norm real vector into the leading amplitudes, zero-padding the rest."""
    _check_n(n_qubits)
    values = np.asarray(values, dtype=float).ravel()
    if values.size > 2 ** n_qubits:
        raise ValueError(f"{values.size} values do not fit in {n_qubits} qubits")
    if not np.all(np.isfinite(values)):
        raise ValueError("amplitude_embed values must be finite")
    norm = np.linalg.norm(values)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"amplitude_embed needs unit L2 norm, got {norm:.12g}")
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[: values.size] = values
    return StateVector(n_qubits, amps)


def marginal_probabilities(state: StateVector, qubits) -> np.ndarray:
    qubits = _check_indices(qubits, state.n_qubits)
    if not qubits:
        raise ValueError("marginal_probabilities needs at least one qubit")
    return marginal_tensor(_as_tensor(state.amplitudes, state.n_qubits), qubits)[0]


def expectation_z(state: StateVector, qubit: int) -> float:
    p = marginal_probabilities(state, [qubit])
    return float(p[0] - p[1])


def inner_product(psi: StateVector, phi: StateVector) -> complex:
    if psi.n_qubits != phi.n_qubits:
        raise ValueError(f"size mismatch: {psi.n_qubits} vs {phi.n_qubits} qubits")
    return complex(np.vdot(psi.amplitudes, phi.amplitudes))


def tensor(*states: StateVector) -> StateVector:
    """Kronecker product; the first argument occupies the lowest qubit indices."""
    amps = np.ones(1, dtype=complex)
    for s in states:
        amps = np.kron(amps, s.amplitudes)
    return StateVector(sum(s.n_qubits for s in states), amps)


def swap_test_fidelity(psi: StateVector, phi: StateVector) -> float:
    """Ancilla-zero probability of the SWAP test, i.e. (1 + |<psi|phi>|^2) / 2.

    The ancilla is qubit 0, ``psi`` occupies qubits 1..n and ``phi`` the next n.
    """
    if psi.n_qubits != phi.n_qubits:
        raise ValueError(f"size mismatch: {psi.n_qubits} vs {phi.n_qubits} qubits")
    n = psi.n_qubits
    joint = tensor(zero_state(1), psi, phi)
    return partial_swap_test(joint, list(range(1, n + 1)), list(range(n + 1, 2 * n + 1)), 0)


def partial_swap_test(joint: StateVector, register_a, register_b, ancilla: int) -> float:
    """SWAP test between two sub-registers of ``joint``.

    Returns ``(1 + Tr(SWAP_AB rho_AB)) / 2``, which equals
    ``(1 + Tr(rho_A rho_B)) / 2`` whenever the two registers are uncorrelated
    (as in the generator-vs-data layout, where they come from separate
    preparations). The ancilla qubit must be in ``|0>`` on entry.
    """
    register_a, register_b = list(register_a), list(register_b)
    if len(register_a) != len(register_b):
        raise ValueError(f"register sizes differ: {len(register_a)} vs {len(register_b)}")
    _check_indices(register_a + register_b + [ancilla], joint.n_qubits)
    psi = _as_tensor(joint.amplitudes, joint.n_qubits)
    if marginal_tensor(psi, [ancilla])[0, 1] > NORM_TOL:
        raise ValueError("ancilla qubit must start in |0>")
    return float(partial_swap_tensor(psi, register_a, register_b, ancilla)[0])
