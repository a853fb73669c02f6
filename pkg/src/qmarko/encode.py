"""Penalized QUBO builders and the exact QUBO -> Ising mapping.

Three constraint encodings are provided:

* ``build_slack_ancilla_qubo`` closes each per-asset cap ``w_i <= alpha_i``
  with a dedicated binary slack bit and a squared-equality penalty
  ``beta * (w_i - alpha_i + s_i)^2``.
* ``build_penalty_qubo`` adds the direct quadratic cardinality penalty
  ``a * (sum w_i - k)^2`` with no extra variables.
* ``build_cardinality_slack_qubo`` internalizes ``sum w_i <= k`` through a
  binary-encoded integer slack, ``a * (sum w_i + s - k)^2``.

The Ising mapping substitutes ``x_i = (1 - z_i) / 2`` term by term, so for
every bitstring the Ising energy equals the QUBO energy to machine
precision. Spin convention: bit 0 maps to z = +1, bit 1 to z = -1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .instance import PortfolioInstance

ASSET = "asset"
SLACK_ASSET = "slack_asset"
SLACK_CARDINALITY = "slack_cardinality"


@dataclass(frozen=True)
class VarLabel:
    """Tag for one binary variable: which role it plays and its index."""

    kind: str
    index: int

    @classmethod
    def asset(cls, i: int) -> "VarLabel":
        return cls(ASSET, i)

    @classmethod
    def slack_asset(cls, i: int) -> "VarLabel":
        return cls(SLACK_ASSET, i)

    @classmethod
    def slack_cardinality(cls, bit: int) -> "VarLabel":
        return cls(SLACK_CARDINALITY, bit)


@dataclass(frozen=True)
class QuboProgram:
    """min x'Qx + b'x + c over binary x, with labeled variables.

    ``quadratic`` is stored symmetrically; the energy form x'Qx counts
    Q_ij + Q_ji exactly once per unordered pair.
    """

    num_vars: int
    labels: tuple[VarLabel, ...]
    quadratic: np.ndarray
    linear: np.ndarray
    constant: float

    def __post_init__(self) -> None:
        q = np.array(self.quadratic, dtype=float)
        b = np.array(self.linear, dtype=float)
        m = self.num_vars
        if q.shape != (m, m):
            raise ValueError(f"quadratic must have shape ({m}, {m}), got {q.shape}")
        if b.shape != (m,):
            raise ValueError(f"linear must have shape ({m},), got {b.shape}")
        if len(self.labels) != m:
            raise ValueError(f"expected {m} labels, got {len(self.labels)}")
        q.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "quadratic", q)
        object.__setattr__(self, "linear", b)
        object.__setattr__(self, "labels", tuple(self.labels))


@dataclass(frozen=True)
class IsingHamiltonian:
    """Diagonal Hamiltonian: sum J_ij Z_i Z_j + sum h_i Z_i + offset."""

    num_qubits: int
    couplings: dict[tuple[int, int], float]
    fields: np.ndarray
    offset: float

    def __post_init__(self) -> None:
        h = np.array(self.fields, dtype=float)
        if h.shape != (self.num_qubits,):
            raise ValueError(f"fields must have shape ({self.num_qubits},), got {h.shape}")
        for (i, j) in self.couplings:
            if not 0 <= i < j < self.num_qubits:
                raise ValueError(f"coupling key ({i}, {j}) is not ordered within range")
        h.flags.writeable = False
        object.__setattr__(self, "fields", h)


def _base_objective(instance: PortfolioInstance, num_vars: int):
    """Quadratic/linear arrays holding q*w'Sw - lambda*mu'w on the asset block."""
    n = instance.n
    quadratic = np.zeros((num_vars, num_vars))
    linear = np.zeros(num_vars)
    quadratic[:n, :n] = instance.q_risk * instance.sigma
    linear[:n] = -instance.lambda_weight * instance.mu
    return quadratic, linear


def _add_squared_penalty(quadratic, linear, coeffs, offset: float, weight: float) -> float:
    """Accumulate weight * (coeffs.x + offset)^2; returns the constant term."""
    quadratic += weight * np.outer(coeffs, coeffs)
    linear += 2.0 * weight * offset * coeffs
    return weight * offset * offset


def build_slack_ancilla_qubo(instance: PortfolioInstance, beta_penalty: float) -> QuboProgram:
    """Slack-ancilla program over 2n bits: assets w_0..w_{n-1}, then one
    binary slack per asset. Adds beta * (w_i - alpha_i + s_i)^2 per asset;
    binary slack is exactly enough to close w_i <= alpha_i for binary alpha.
    """
    if beta_penalty <= 0:
        raise ValueError(f"penalty weight must be positive, got {beta_penalty}")
    n = instance.n
    m = 2 * n
    quadratic, linear = _base_objective(instance, m)
    constant = 0.0
    for i in range(n):
        coeffs = np.zeros(m)
        coeffs[i] = 1.0
        coeffs[n + i] = 1.0
        constant += _add_squared_penalty(
            quadratic, linear, coeffs, -float(instance.alpha[i]), beta_penalty
        )
    labels = tuple(VarLabel.asset(i) for i in range(n)) + tuple(
        VarLabel.slack_asset(i) for i in range(n)
    )
    return QuboProgram(m, labels, quadratic, linear, constant)


def build_penalty_qubo(instance: PortfolioInstance, a_card: float) -> QuboProgram:
    """Direct-penalty program over the n asset bits: a * (sum w_i - k)^2."""
    if a_card <= 0:
        raise ValueError(f"penalty weight must be positive, got {a_card}")
    n = instance.n
    quadratic, linear = _base_objective(instance, n)
    constant = _add_squared_penalty(quadratic, linear, np.ones(n), -float(instance.k), a_card)
    labels = tuple(VarLabel.asset(i) for i in range(n))
    return QuboProgram(n, labels, quadratic, linear, constant)


def cardinality_slack_weights(k: int) -> list[float]:
    """Bit weights encoding an integer slack ranging over exactly [0, k]."""
    num_bits = max(1, math.ceil(math.log2(k + 1)))
    weights = [float(1 << b) for b in range(num_bits - 1)]
    weights.append(float(k - ((1 << (num_bits - 1)) - 1)))
    return weights


def build_cardinality_slack_qubo(instance: PortfolioInstance, a_card: float) -> QuboProgram:
    """Cardinality-slack program: n asset bits plus ceil(log2(k+1)) slack
    bits whose weighted sum s ranges over [0, k]; adds a * (sum w_i + s - k)^2.
    """
    if a_card <= 0:
        raise ValueError(f"penalty weight must be positive, got {a_card}")
    n, k = instance.n, instance.k
    weights = cardinality_slack_weights(k)
    m = n + len(weights)
    quadratic, linear = _base_objective(instance, m)
    coeffs = np.concatenate([np.ones(n), np.array(weights)])
    constant = _add_squared_penalty(quadratic, linear, coeffs, -float(k), a_card)
    labels = tuple(VarLabel.asset(i) for i in range(n)) + tuple(
        VarLabel.slack_cardinality(b) for b in range(len(weights))
    )
    return QuboProgram(m, labels, quadratic, linear, constant)


def qubo_energy(program: QuboProgram, x) -> float:
    """Exact value of x'Qx + b'x + c."""
    v = np.asarray(x, dtype=float)
    if v.shape != (program.num_vars,):
        raise ValueError(f"x must have shape ({program.num_vars},), got {v.shape}")
    return float(v @ program.quadratic @ v + program.linear @ v + program.constant)


def to_ising(program: QuboProgram) -> IsingHamiltonian:
    """Map the program through x_i = (1 - z_i) / 2.

    Z_i^2 terms are identities and fold into the offset. Works for any
    storage of Q (symmetric or triangular): only Q_ij + Q_ji matters.
    """
    q = program.quadratic
    b = program.linear
    pair = q + q.T  # pair[i, j] = Q_ij + Q_ji; diagonal = 2 Q_ii
    fields = -b / 2.0 - pair.sum(axis=1) / 4.0
    couplings: dict[tuple[int, int], float] = {}
    m = program.num_vars
    for i in range(m):
        for j in range(i + 1, m):
            coupling = pair[i, j] / 4.0
            if coupling != 0.0:
                couplings[(i, j)] = coupling
    trace = float(np.trace(q))
    offset = (
        program.constant
        + float(b.sum()) / 2.0
        + trace / 2.0
        + (float(q.sum()) - trace) / 4.0
    )
    return IsingHamiltonian(m, couplings, fields, offset)


def ising_energy(hamiltonian: IsingHamiltonian, x) -> float:
    """Energy of a bitstring under the spin convention z = 1 - 2x."""
    bits = np.asarray(x, dtype=float)
    if bits.shape != (hamiltonian.num_qubits,):
        raise ValueError(
            f"x must have shape ({hamiltonian.num_qubits},), got {bits.shape}"
        )
    z = 1.0 - 2.0 * bits
    energy = hamiltonian.offset + float(hamiltonian.fields @ z)
    for (i, j), coupling in hamiltonian.couplings.items():
        energy += coupling * z[i] * z[j]
    return float(energy)


def qubo_to_json(program: QuboProgram) -> str:
    nonzero = [
        [i, j, program.quadratic[i, j]]
        for i in range(program.num_vars)
        for j in range(program.num_vars)
        if program.quadratic[i, j] != 0.0
    ]
    doc = {
        "num_vars": program.num_vars,
        "labels": [{"kind": lab.kind, "index": lab.index} for lab in program.labels],
        "quadratic": nonzero,
        "linear": list(program.linear),
        "constant": program.constant,
    }
    return json.dumps(doc, indent=2)


def qubo_from_json(text: str) -> QuboProgram:
    doc = json.loads(text)
    m = int(doc["num_vars"])
    quadratic = np.zeros((m, m))
    for i, j, value in doc["quadratic"]:
        quadratic[int(i), int(j)] = float(value)
    labels = tuple(VarLabel(entry["kind"], int(entry["index"])) for entry in doc["labels"])
    return QuboProgram(m, labels, quadratic, np.array(doc["linear"], dtype=float), float(doc["constant"]))


def ising_to_json(hamiltonian: IsingHamiltonian) -> str:
    doc = {
        "num_qubits": hamiltonian.num_qubits,
        "couplings": [[i, j, value] for (i, j), value in sorted(hamiltonian.couplings.items())],
        "fields": list(hamiltonian.fields),
        "offset": hamiltonian.offset,
    }
    return json.dumps(doc, indent=2)


def ising_from_json(text: str) -> IsingHamiltonian:
    doc = json.loads(text)
    couplings = {(int(i), int(j)): float(value) for i, j, value in doc["couplings"]}
    return IsingHamiltonian(
        int(doc["num_qubits"]),
        couplings,
        np.array(doc["fields"], dtype=float),
        float(doc["offset"]),
    )
