"""Independent reference computations used by the tests.

Nothing here calls into the simulator kernels; everything is built from
explicit matrices, loops over basis indices, or dense linear algebra.
"""
import itertools

import numpy as np

I2 = np.eye(2)
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]])
Z = np.diag([1, -1])


def ry(t):
    return np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])


def rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def single_qubit_unitary(mat, q, n):
    """Kronecker product with qubit 0 as the leftmost factor."""
    out = np.ones((1, 1))
    for k in range(n):
        out = np.kron(out, mat if k == q else I2)
    return out


def bits(index, n):
    return [(index >> (n - 1 - k)) & 1 for k in range(n)]


def from_bits(b):
    return int("".join(map(str, b)), 2)


def permutation_unitary(fn, n):
    """Unitary of a classical reversible map on bit lists."""
    dim = 2 ** n
    u = np.zeros((dim, dim))
    for i in range(dim):
        u[from_bits(fn(bits(i, n))), i] = 1
    return u


def cnot_unitary(c, t, n):
    def fn(b):
        b = list(b)
        if b[c]:
            b[t] ^= 1
        return b
    return permutation_unitary(fn, n)


def cswap_unitary(c, a, t, n):
    def fn(b):
        b = list(b)
        if b[c]:
            b[a], b[t] = b[t], b[a]
        return b
    return permutation_unitary(fn, n)


def cz_unitary(c, t, n):
    return np.diag([-1.0 if bits(i, n)[c] and bits(i, n)[t] else 1.0 for i in range(2 ** n)])


def marginal_bruteforce(amps, qubits, n):
    out = np.zeros(2 ** len(qubits))
    for i, a in enumerate(amps):
        b = bits(i, n)
        out[from_bits([b[q] for q in qubits])] += abs(a) ** 2
    return out


def reduced_density(amps, register, n):
    """rho over ``register`` (in the given order) by explicit summation over the rest."""
    rest = [q for q in range(n) if q not in register]
    k = len(register)
    rho = np.zeros((2 ** k, 2 ** k), dtype=complex)
    for env in itertools.product([0, 1], repeat=len(rest)):
        vec = np.zeros(2 ** k, dtype=complex)
        for r, sub in enumerate(itertools.product([0, 1], repeat=k)):
            full = [0] * n
            for q, v in zip(register, sub):
                full[q] = v
            for q, v in zip(rest, env):
                full[q] = v
            vec[r] = amps[from_bits(full)]
        rho += np.outer(vec, vec.conj())
    return rho


def hp_dense(y, lamb):
    n = len(y)
    d = np.zeros((n - 2, n))
    for i in range(n - 2):
        d[i, i:i + 3] = [1, -2, 1]
    return np.linalg.solve(np.eye(n) + lamb * d.T @ d, y)


def naive_dft_lowpass(x, c):
    n = len(x)
    k = np.arange(n)
    w = np.exp(-2j * np.pi * np.outer(k, k) / n)
    spec = w @ x
    keep = np.array([min(j, n - j) <= c for j in range(n)])
    spec = np.where(keep, spec, 0)
    return (np.conj(w) @ spec / n).real


def grid_search_factor(a, y_hat, points=1_000_000, chunk=200_000):
    hi = 2 * np.linalg.norm(a) / np.linalg.norm(y_hat)
    grid = np.linspace(0.0, hi, points)
    best, best_val = None, np.inf
    for start in range(0, points, chunk):
        g = grid[start:start + chunk]
        obj = ((a[None, :] - g[:, None] * y_hat[None, :]) ** 2).sum(axis=1)
        i = int(np.argmin(obj))
        if obj[i] < best_val:
            best, best_val = g[i], obj[i]
    return best, hi / (points - 1)
