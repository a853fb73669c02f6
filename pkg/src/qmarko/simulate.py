"""Dense statevector simulation for diagonal Hamiltonians.

The phase-separation step multiplies amplitudes by exp(-i*gamma*E(x))
directly from a precomputed energy table rather than applying gates one
by one; a textual gate export plus a test-side interpreter covers the
gate-level view. Amplitude index convention: qubit 0 is the least
significant bit (see ``bitstrings``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .bitstrings import index_to_string
from .encode import IsingHamiltonian

if TYPE_CHECKING:  # pragma: no cover
    from .qaoa import QaoaParams

MAX_QUBITS = 24
STATE_DUMP_MAX_QUBITS = 12


@dataclass
class StateVector:
    """2^m complex amplitudes; mutated in place by the apply_* operations."""

    num_qubits: int
    amplitudes: np.ndarray

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class EnergyTable:
    """Per-basis-state energies of a diagonal Hamiltonian."""

    num_qubits: int
    energies: np.ndarray


def energy_table(hamiltonian: IsingHamiltonian) -> EnergyTable:
    """Tabulate the Hamiltonian's energy for every basis state."""
    m = hamiltonian.num_qubits
    if m > MAX_QUBITS:
        raise ValueError(f"refusing to tabulate {m} qubits (limit {MAX_QUBITS})")
    idx = np.arange(1 << m, dtype=np.int64)
    z = 1.0 - 2.0 * ((idx[:, None] >> np.arange(m)) & 1)
    energies = np.full(1 << m, hamiltonian.offset)
    energies += z @ hamiltonian.fields
    for (i, j), coupling in hamiltonian.couplings.items():
        energies += coupling * z[:, i] * z[:, j]
    return EnergyTable(m, energies)


def uniform_superposition(num_qubits: int) -> StateVector:
    """Equal-amplitude state over all basis states, phase zero."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"qubit count {num_qubits} outside [1, {MAX_QUBITS}]")
    size = 1 << num_qubits
    amplitudes = np.full(size, 1.0 / np.sqrt(size), dtype=np.complex128)
    return StateVector(num_qubits, amplitudes)


def apply_phase_separation(state: StateVector, table: EnergyTable, gamma: float) -> StateVector:
    """Multiply each amplitude by exp(-i*gamma*E(x)); exact diagonal evolution."""
    if table.num_qubits != state.num_qubits:
        raise ValueError(
            f"table has {table.num_qubits} qubits, state has {state.num_qubits}"
        )
    state.amplitudes *= np.exp(-1j * gamma * table.energies)
    return state


def _rotate_x_on_qubit(amplitudes: np.ndarray, num_qubits: int, qubit: int, beta_angle: float) -> None:
    """In-place Rx(2*beta_angle) on one qubit."""
    cos_b = np.cos(beta_angle)
    isin_b = 1j * np.sin(beta_angle)
    view = amplitudes.reshape(1 << (num_qubits - 1 - qubit), 2, 1 << qubit)
    a0 = view[:, 0, :].copy()
    a1 = view[:, 1, :].copy()
    view[:, 0, :] = cos_b * a0 - isin_b * a1
    view[:, 1, :] = cos_b * a1 - isin_b * a0


def apply_mixer(state: StateVector, beta_angle: float) -> StateVector:
    """exp(-i*beta_angle*X) on every qubit, i.e. Rx(2*beta_angle) each."""
    for qubit in range(state.num_qubits):
        _rotate_x_on_qubit(state.amplitudes, state.num_qubits, qubit, beta_angle)
    return state


def _validate_pairs(num_qubits: int, pairs) -> list[tuple[int, int]]:
    seen: set[int] = set()
    cleaned = []
    for asset_qubit, ancilla_qubit in pairs:
        for qubit in (asset_qubit, ancilla_qubit):
            if not 0 <= qubit < num_qubits:
                raise ValueError(f"qubit index {qubit} out of range for {num_qubits} qubits")
            if qubit in seen:
                raise ValueError(f"qubit {qubit} appears twice in mixer pairs")
            seen.add(qubit)
        cleaned.append((int(asset_qubit), int(ancilla_qubit)))
    return cleaned


def apply_conditional_mixer(state: StateVector, beta_angle: float, pairs) -> StateVector:
    """Slack-aware mixer layer.

    Each ancilla receives exp(-i*beta_angle*X) only on basis states where
    its paired asset qubit is 1 (a controlled rotation, applied whatever
    the ancilla currently holds); asset qubits then receive the standard
    Rx(2*beta_angle). The controlled rotations read the asset bits before
    the asset rotations scramble them.
    """
    cleaned = _validate_pairs(state.num_qubits, pairs)
    cos_b = np.cos(beta_angle)
    isin_b = 1j * np.sin(beta_angle)
    amplitudes = state.amplitudes
    idx = np.arange(amplitudes.size, dtype=np.int64)
    for asset_qubit, ancilla_qubit in cleaned:
        control_on = ((idx >> asset_qubit) & 1) == 1
        ancilla_zero = ((idx >> ancilla_qubit) & 1) == 0
        i0 = idx[control_on & ancilla_zero]
        i1 = i0 | (1 << ancilla_qubit)
        a0 = amplitudes[i0]
        a1 = amplitudes[i1]
        amplitudes[i0] = cos_b * a0 - isin_b * a1
        amplitudes[i1] = cos_b * a1 - isin_b * a0
    for asset_qubit, _ in cleaned:
        _rotate_x_on_qubit(amplitudes, state.num_qubits, asset_qubit, beta_angle)
    return state


def expectation(state: StateVector, table: EnergyTable) -> float:
    """Exact <H> = sum_x |amp_x|^2 E(x) for a diagonal Hamiltonian."""
    if table.num_qubits != state.num_qubits:
        raise ValueError(
            f"table has {table.num_qubits} qubits, state has {state.num_qubits}"
        )
    return float(np.dot(state.probabilities(), table.energies))


def sample(state: StateVector, shots: int, seed: int) -> dict[str, int]:
    """Histogram of `shots` seeded draws from the measurement distribution."""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    probabilities = state.probabilities()
    probabilities = probabilities / probabilities.sum()
    counts = rng.multinomial(shots, probabilities)
    return {
        index_to_string(int(i), state.num_qubits): int(c)
        for i, c in enumerate(counts)
        if c > 0
    }


def dump_state(state: StateVector) -> str:
    """JSON array of (bitstring, re, im) rows for cross-checking small states."""
    if state.num_qubits > STATE_DUMP_MAX_QUBITS:
        raise ValueError(
            f"state dump limited to {STATE_DUMP_MAX_QUBITS} qubits, got {state.num_qubits}"
        )
    rows = [
        [index_to_string(i, state.num_qubits), float(a.real), float(a.imag)]
        for i, a in enumerate(state.amplitudes)
    ]
    return json.dumps(rows)


def export_circuit_text(
    params: "QaoaParams",
    hamiltonian: IsingHamiltonian,
    mixer: str = "standard",
    pairs=None,
) -> str:
    """Gate list equivalent to the alternating diagonal evolution.

    One line per gate, angles in radians at full precision:
    ``gphase a``, ``rzz i j a``, ``rz i a``, ``rx i a``, ``crx c t a``.
    Layers appear in application order; replaying the list on a uniform
    superposition reproduces the simulated state exactly (including global
    phase, carried by gphase lines).
    """
    m = hamiltonian.num_qubits
    lines = [f"# qubits {m}", f"# p {params.p}", f"# mixer {mixer}"]
    for layer in range(params.p):
        gamma = params.gammas[layer]
        beta_mix = params.beta_mixes[layer]
        if hamiltonian.offset != 0.0:
            lines.append(f"gphase {float(-gamma * hamiltonian.offset)!r}")
        for (i, j), coupling in sorted(hamiltonian.couplings.items()):
            lines.append(f"rzz {i} {j} {float(2.0 * gamma * coupling)!r}")
        for i, field in enumerate(hamiltonian.fields):
            if field != 0.0:
                lines.append(f"rz {i} {float(2.0 * gamma * field)!r}")
        if mixer == "standard":
            for qubit in range(m):
                lines.append(f"rx {qubit} {float(2.0 * beta_mix)!r}")
        elif mixer == "conditional":
            cleaned = _validate_pairs(m, pairs or [])
            for asset_qubit, ancilla_qubit in cleaned:
                lines.append(f"crx {asset_qubit} {ancilla_qubit} {float(2.0 * beta_mix)!r}")
            for asset_qubit, _ in cleaned:
                lines.append(f"rx {asset_qubit} {float(2.0 * beta_mix)!r}")
        else:
            raise ValueError(f"unknown mixer: {mixer!r}")
    return "\n".join(lines) + "\n"
