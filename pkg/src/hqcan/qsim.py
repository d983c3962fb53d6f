"""Statevector simulator for small parameterized circuits.

Qubit ``q`` is bit ``q`` of the amplitude index (qubit 0 is the least
significant bit). Amplitudes are complex128 and gates update the state in
place. Supported gate kinds::

    X, H                      fixed single-qubit gates
    RX, RY, RZ                exp(-i theta/2 P)
    XX, ZX                    exp(-i theta/2 P_a Q_b), first factor on targets[0]

Every parameterized kind is generated by a Pauli string with eigenvalues
+-1, so the two-term parameter-shift rule is exact for all of them.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 17

FIXED_KINDS = ("X", "H")
PARAM_KINDS = ("RX", "RY", "RZ", "XX", "ZX")
GATE_KINDS = FIXED_KINDS + PARAM_KINDS
TWO_QUBIT_KINDS = ("XX", "ZX")

_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
}


class CircuitError(ValueError):
    """Invalid gate, circuit or circuit text."""


@dataclass(frozen=True)
class Gate:
    kind: str
    targets: tuple[int, ...]
    theta: float = 0.0
    param_id: str | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind in TWO_QUBIT_KINDS else 1
        if len(self.targets) != want:
            raise CircuitError(f"{self.kind} takes {want} target(s), got {len(self.targets)}")
        if len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"duplicate targets {self.targets} for {self.kind}")
        if self.param_id is not None and self.kind not in PARAM_KINDS:
            raise CircuitError(f"{self.kind} is not parameterized")

    @property
    def parameterized(self) -> bool:
        return self.kind in PARAM_KINDS


@dataclass
class Circuit:
    """Ordered gate list plus a table of trainable angles keyed by param id."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        if any(t < 0 or t >= self.n_qubits for t in gate.targets):
            raise CircuitError(f"target out of range in {gate}")
        if gate.param_id is not None and gate.param_id not in self.params:
            raise CircuitError(f"unknown param id {gate.param_id!r}")

    def append(self, gate: Gate) -> None:
        self._check(gate)
        self.gates.append(gate)

    @property
    def param_ids(self) -> list[str]:
        return list(self.params)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def angle(self, gate: Gate) -> float:
        return self.params[gate.param_id] if gate.param_id is not None else gate.theta

    def resolved(self) -> list[Gate]:
        """Gates with parameter references replaced by their current angles."""
        return [replace(g, theta=self.angle(g), param_id=None) if g.param_id else g for g in self.gates]

    def set_params(self, values: Sequence[float]) -> None:
        if len(values) != len(self.params):
            raise CircuitError(f"expected {len(self.params)} values, got {len(values)}")
        for key, v in zip(list(self.params), values):
            self.params[key] = float(v)

    def inverse(self) -> "Circuit":
        gates = []
        for g in reversed(self.resolved()):
            gates.append(replace(g, theta=-g.theta) if g.parameterized else g)
        return Circuit(self.n_qubits, gates)


class StateVector:
    """2**n complex amplitudes, owned and mutated by the gate routines."""

    def __init__(self, n_qubits: int, amplitudes: np.ndarray | None = None):
        if not 1 <= n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
        self.n_qubits = n_qubits
        if amplitudes is None:
            amplitudes = np.zeros(1 << n_qubits, dtype=np.complex128)
            amplitudes[0] = 1.0
        else:
            amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)
            if amplitudes.shape != (1 << n_qubits,):
                raise CircuitError(f"expected {1 << n_qubits} amplitudes, got {amplitudes.shape}")
        self.amplitudes = amplitudes

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def prepare_basis(bits: Sequence[int]) -> StateVector:
    """Computational basis state with qubit i set to bits[i]."""
    n = len(bits)
    index = 0
    for i, b in enumerate(bits):
        if b not in (0, 1, True, False):
            raise CircuitError(f"bit {i} is {b!r}, expected 0 or 1")
        index |= int(b) << i
    state = StateVector(n, np.zeros(1 << n, dtype=np.complex128))
    state.amplitudes[index] = 1.0
    return state


def single_qubit_matrix(kind: str, theta: float = 0.0) -> np.ndarray:
    if kind in _FIXED:
        return _FIXED[kind]
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise CircuitError(f"{kind} is not a single-qubit gate")


def _apply_1q(amps: np.ndarray, n: int, q: int, m: np.ndarray) -> None:
    v = amps.reshape(1 << (n - q - 1), 2, 1 << q)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
    v[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1


def _apply_pauli_rotation_2q(amps: np.ndarray, n: int, kind: str, a: int, b: int, theta: float) -> None:
    # exp(-i theta/2 P_a Q_b) = cos(theta/2) I - i sin(theta/2) P_a Q_b
    hi, lo = max(a, b), min(a, b)
    v = amps.reshape(1 << (n - hi - 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    ax = {hi: 1, lo: 3}
    pv = v[:, ::-1, :, ::-1, :] if kind == "XX" else np.flip(v, axis=ax[b])
    if kind == "ZX":
        sign = np.array([1.0, -1.0]).reshape((1, 2, 1, 1, 1) if ax[a] == 1 else (1, 1, 1, 2, 1))
        pv = pv * sign
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    v[...] = c * v - (1j * s) * pv


def apply_gate(state: StateVector, gate: Gate, theta: float | None = None) -> StateVector:
    """Apply ``gate`` to ``state`` in place and return it.

    ``theta`` overrides the gate's stored angle (used for parameter lookups).
    """
    n = state.n_qubits
    if any(t < 0 or t >= n for t in gate.targets):
        raise CircuitError(f"target out of range in {gate} for {n} qubits")
    angle = gate.theta if theta is None else theta
    if gate.kind in TWO_QUBIT_KINDS:
        _apply_pauli_rotation_2q(state.amplitudes, n, gate.kind, *gate.targets, angle)
    else:
        _apply_1q(state.amplitudes, n, gate.targets[0], single_qubit_matrix(gate.kind, angle))
    return state


def expectation(state: StateVector, pauli: str, qubit: int) -> float:
    """<psi| P_qubit |psi> for P in {X, Y, Z}, without building the operator."""
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise CircuitError(f"qubit {qubit} out of range for {n} qubits")
    v = state.amplitudes.reshape(1 << (n - qubit - 1), 2, 1 << qubit)
    a0, a1 = v[:, 0, :], v[:, 1, :]
    if pauli == "Z":
        return float(np.vdot(a0, a0).real - np.vdot(a1, a1).real)
    cross = np.vdot(a0, a1)
    if pauli == "X":
        return float(2.0 * cross.real)
    if pauli == "Y":
        return float(2.0 * cross.imag)
    raise CircuitError(f"unknown Pauli {pauli!r}")


def run_circuit(circuit: Circuit, input_bits: Sequence[int] | None = None,
                angles: Sequence[float] | None = None) -> StateVector:
    """Prepare the basis state for ``input_bits`` and apply every gate in order.

    ``angles`` optionally gives one angle per gate occurrence and overrides both
    stored thetas and the parameter table.
    """
    bits = [0] * circuit.n_qubits if input_bits is None else list(input_bits)
    if len(bits) != circuit.n_qubits:
        raise CircuitError(f"expected {circuit.n_qubits} input bits, got {len(bits)}")
    state = prepare_basis(bits)
    if angles is None:
        angles = [circuit.angle(g) for g in circuit.gates]
    for g, t in zip(circuit.gates, angles):
        apply_gate(state, g, t)
    return state


def _observable(observable) -> tuple[str, int]:
    pauli, qubit = observable
    return str(pauli).upper(), int(qubit)


def circuit_expectation(circuit: Circuit, input_bits, observable, angles=None) -> float:
    pauli, qubit = _observable(observable)
    return expectation(run_circuit(circuit, input_bits, angles), pauli, qubit)


def parameter_shift_grad(circuit: Circuit, input_bits, observable) -> np.ndarray:
    """d<P>/dw for every entry of the parameter table, by the +-pi/2 shift rule.

    Each gate occurrence is shifted separately and the contributions are summed
    per param id, so shared parameters are handled. Entries that no gate uses
    get a zero gradient.
    """
    base = [circuit.angle(g) for g in circuit.gates]
    index = {pid: k for k, pid in enumerate(circuit.params)}
    grad = np.zeros(len(index))
    for j, g in enumerate(circuit.gates):
        if g.param_id is None:
            continue
        if g.kind not in PARAM_KINDS:
            raise CircuitError(f"no shift rule for generator of {g.kind}")
        shifted = list(base)
        shifted[j] = base[j] + math.pi / 2
        plus = circuit_expectation(circuit, input_bits, observable, shifted)
        shifted[j] = base[j] - math.pi / 2
        minus = circuit_expectation(circuit, input_bits, observable, shifted)
        grad[index[g.param_id]] += 0.5 * (plus - minus)
    return grad


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator,
                   kinds: Iterable[str] = GATE_KINDS, n_params: int = 0) -> Circuit:
    """Random circuit; when ``n_params`` > 0 parameterized gates draw from a shared table."""
    kinds = [k for k in kinds if n_qubits > 1 or k not in TWO_QUBIT_KINDS]
    params = {f"p{k}": float(rng.uniform(-math.pi, math.pi)) for k in range(n_params)}
    circ = Circuit(n_qubits, [], params)
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        width = 2 if kind in TWO_QUBIT_KINDS else 1
        targets = tuple(int(t) for t in rng.choice(n_qubits, size=width, replace=False))
        theta = float(rng.uniform(-math.pi, math.pi)) if kind in PARAM_KINDS else 0.0
        pid = f"p{rng.integers(n_params)}" if n_params and kind in PARAM_KINDS else None
        circ.append(Gate(kind, targets, theta, pid))
    return circ


# --- circuit text format -------------------------------------------------
# one gate per line: KIND q<a> [q<b>] [theta=<float>] [param=<id>]; '#' comments

_TOKEN = re.compile(r"^q(\d+)$")


def format_circuit(circuit: Circuit) -> str:
    lines = [f"# qubits={circuit.n_qubits}"]
    for g in circuit.gates:
        parts = [g.kind] + [f"q{t}" for t in g.targets]
        if g.parameterized:
            parts.append(f"theta={circuit.angle(g)!r}")
        if g.param_id is not None:
            parts.append(f"param={g.param_id}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, n_qubits: int | None = None) -> Circuit:
    """Inverse of :func:`format_circuit`.

    The qubit count comes from ``n_qubits``, a ``# qubits=N`` header, or the
    largest target seen. A param id's value is taken from its first occurrence.
    """
    gates: list[Gate] = []
    params: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            m = re.match(r"#\s*qubits\s*=\s*(\d+)", line)
            if m and n_qubits is None:
                n_qubits = int(m.group(1))
            continue
        if not line:
            continue
        kind, *rest = line.split()
        targets, theta, pid = [], 0.0, None
        for tok in rest:
            if (m := _TOKEN.match(tok)):
                targets.append(int(m.group(1)))
            elif tok.startswith("theta="):
                try:
                    theta = float(tok[6:])
                except ValueError:
                    raise CircuitError(f"line {lineno}: bad angle {tok!r}") from None
            elif tok.startswith("param="):
                pid = tok[6:]
            else:
                raise CircuitError(f"line {lineno}: unexpected token {tok!r}")
        if pid is not None:
            params.setdefault(pid, theta)
        try:
            gates.append(Gate(kind.upper(), tuple(targets), theta, pid))
        except CircuitError as exc:
            raise CircuitError(f"line {lineno}: {exc}") from None
    if n_qubits is None:
        n_qubits = 1 + max((t for g in gates for t in g.targets), default=0)
    return Circuit(n_qubits, gates, params)
