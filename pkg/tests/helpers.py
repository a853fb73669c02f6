"""Independent reference implementations used only by the tests.

Everything here recomputes results through a different route than the
package (explicit loops, dense matrices, gate-by-gate replay) so the two
sides of each equivalence check stay independent.
"""

from __future__ import annotations

import numpy as np

from qmarko.bitstrings import index_to_bits
from qmarko.encode import IsingHamiltonian, QuboProgram, cardinality_slack_weights
from qmarko.instance import PortfolioInstance


def naive_qubo_energy(program: QuboProgram, bits) -> float:
    total = float(program.constant)
    for i in range(program.num_vars):
        total += program.linear[i] * bits[i]
        for j in range(program.num_vars):
            total += program.quadratic[i, j] * bits[i] * bits[j]
    return total


def naive_ising_energy(hamiltonian: IsingHamiltonian, bits) -> float:
    z = [1.0 - 2.0 * b for b in bits]
    total = float(hamiltonian.offset)
    for i in range(hamiltonian.num_qubits):
        total += hamiltonian.fields[i] * z[i]
    for (i, j), coupling in hamiltonian.couplings.items():
        total += coupling * z[i] * z[j]
    return total


def direct_slack_objective(inst: PortfolioInstance, bits, beta: float) -> float:
    n = inst.n
    w = np.asarray(bits[:n], dtype=float)
    s = np.asarray(bits[n : 2 * n], dtype=float)
    penalty = float(((w - inst.alpha + s) ** 2).sum())
    return (
        inst.q_risk * float(w @ inst.sigma @ w)
        - inst.lambda_weight * float(inst.mu @ w)
        + beta * penalty
    )


def direct_penalty_objective(inst: PortfolioInstance, bits, a_card: float) -> float:
    w = np.asarray(bits, dtype=float)
    return (
        inst.q_risk * float(w @ inst.sigma @ w)
        - inst.lambda_weight * float(inst.mu @ w)
        + a_card * (float(w.sum()) - inst.k) ** 2
    )


def direct_cardinality_objective(inst: PortfolioInstance, bits, a_card: float) -> float:
    n = inst.n
    w = np.asarray(bits[:n], dtype=float)
    weights = cardinality_slack_weights(inst.k)
    slack = float(np.dot(weights, np.asarray(bits[n:], dtype=float)))
    return (
        inst.q_risk * float(w @ inst.sigma @ w)
        - inst.lambda_weight * float(inst.mu @ w)
        + a_card * (float(w.sum()) + slack - inst.k) ** 2
    )


# --- dense matrix reference for the ansatz -------------------------------

def embed_single(op: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    eye_low = np.eye(1 << qubit, dtype=complex)
    eye_high = np.eye(1 << (num_qubits - 1 - qubit), dtype=complex)
    return np.kron(np.kron(eye_high, op), eye_low)


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)


def dense_reference_ansatz(hamiltonian: IsingHamiltonian, params, mixer: str, pairs=None) -> np.ndarray:
    """From-scratch ansatz evolution via explicit 2^m x 2^m matrices."""
    m = hamiltonian.num_qubits
    size = 1 << m
    energies = np.array(
        [naive_ising_energy(hamiltonian, index_to_bits(x, m)) for x in range(size)]
    )
    state = np.full(size, 1.0 / np.sqrt(size), dtype=complex)
    for layer in range(params.p):
        state = np.diag(np.exp(-1j * params.gammas[layer] * energies)) @ state
        rx = rx_matrix(2.0 * params.beta_mixes[layer])
        if mixer == "standard":
            for qubit in range(m):
                state = embed_single(rx, qubit, m) @ state
        elif mixer == "conditional":
            for asset_qubit, ancilla_qubit in pairs:
                controlled = embed_single(_P0, asset_qubit, m) + embed_single(
                    _P1, asset_qubit, m
                ) @ embed_single(rx, ancilla_qubit, m)
                state = controlled @ state
            for asset_qubit, _ in pairs:
                state = embed_single(rx, asset_qubit, m) @ state
        else:
            raise ValueError(mixer)
    return state


# --- gate-by-gate interpreter for exported circuits ----------------------

def replay_circuit(text: str, num_qubits: int, initial: np.ndarray | None = None) -> np.ndarray:
    """Apply an exported gate list line by line to a dense state."""
    size = 1 << num_qubits
    if initial is None:
        state = np.full(size, 1.0 / np.sqrt(size), dtype=complex)
    else:
        state = np.array(initial, dtype=complex)
    idx = np.arange(size)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        name = tokens[0]
        if name == "gphase":
            state = state * np.exp(1j * float(tokens[1]))
        elif name == "rz":
            qubit, theta = int(tokens[1]), float(tokens[2])
            z = 1.0 - 2.0 * ((idx >> qubit) & 1)
            state = state * np.exp(-1j * theta / 2.0 * z)
        elif name == "rzz":
            q1, q2, theta = int(tokens[1]), int(tokens[2]), float(tokens[3])
            z1 = 1.0 - 2.0 * ((idx >> q1) & 1)
            z2 = 1.0 - 2.0 * ((idx >> q2) & 1)
            state = state * np.exp(-1j * theta / 2.0 * z1 * z2)
        elif name == "rx":
            qubit, theta = int(tokens[1]), float(tokens[2])
            state = embed_single(rx_matrix(theta), qubit, num_qubits) @ state
        elif name == "crx":
            control, target, theta = int(tokens[1]), int(tokens[2]), float(tokens[3])
            op = embed_single(_P0, control, num_qubits) + embed_single(
                _P1, control, num_qubits
            ) @ embed_single(rx_matrix(theta), target, num_qubits)
            state = op @ state
        elif name == "h":
            hadamard = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2.0)
            state = embed_single(hadamard, int(tokens[1]), num_qubits) @ state
        else:
            raise ValueError(f"unknown gate line: {line!r}")
    return state


def random_state(num_qubits: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    size = 1 << num_qubits
    amps = rng.normal(size=size) + 1j * rng.normal(size=size)
    return amps / np.linalg.norm(amps)
