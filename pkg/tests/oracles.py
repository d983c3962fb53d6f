"""Brute-force reference implementations used only by the tests."""
import numpy as np
from scipy.linalg import expm

I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def embed(ops, n):
    """Kronecker product of single-qubit ops {qubit: 2x2}; qubit 0 is the last factor."""
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def gate_matrix(kind, targets, theta, n):
    if kind == "X":
        return embed({targets[0]: PAULI["X"]}, n)
    if kind == "H":
        return embed({targets[0]: HAD}, n)
    if kind in ("RX", "RY", "RZ"):
        gen = embed({targets[0]: PAULI[kind[1]]}, n)
    else:
        a, b = targets
        gen = embed({a: PAULI[kind[0]], b: PAULI[kind[1]]}, n)
    return expm(-0.5j * theta * gen)


def dense_state(circuit, bits, angles=None):
    n = circuit.n_qubits
    psi = np.zeros(2 ** n, dtype=complex)
    psi[sum(int(b) << i for i, b in enumerate(bits))] = 1.0
    if angles is None:
        angles = [circuit.angle(g) for g in circuit.gates]
    for g, t in zip(circuit.gates, angles):
        psi = gate_matrix(g.kind, g.targets, t, n) @ psi
    return psi


def dense_expectation(psi, pauli, qubit, n):
    return float(np.vdot(psi, embed({qubit: PAULI[pauli]}, n) @ psi).real)


def central_difference(f, x, h):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp.flat[k] += h
        xm.flat[k] -= h
        g.flat[k] = (f(xp) - f(xm)) / (2 * h)
    return g
