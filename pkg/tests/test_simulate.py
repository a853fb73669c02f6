import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.linalg import expm

from helpers import dense_reference_ansatz, naive_ising_energy, random_state, replay_circuit
from qmarko.bitstrings import index_to_bits, string_to_index
from qmarko.encode import IsingHamiltonian, build_penalty_qubo, build_slack_ancilla_qubo, to_ising
from qmarko.instance import generate_instance
from qmarko.qaoa import QaoaParams, mixer_pairs, run_ansatz
from qmarko.simulate import (
    EnergyTable,
    StateVector,
    apply_conditional_mixer,
    apply_mixer,
    apply_phase_separation,
    dump_state,
    energy_table,
    expectation,
    export_circuit_text,
    sample,
    uniform_superposition,
)


def _random_table(m, seed):
    rng = np.random.default_rng(seed)
    return EnergyTable(m, rng.normal(size=1 << m))


def test_uniform_superposition_values():
    state = uniform_superposition(1)
    assert np.allclose(state.amplitudes, [1 / np.sqrt(2)] * 2)
    state = uniform_superposition(3)
    assert np.allclose(state.amplitudes, np.full(8, 1 / (2 * np.sqrt(2))))
    for m in range(1, 13):
        assert np.linalg.norm(uniform_superposition(m).amplitudes) == pytest.approx(1.0)


def test_uniform_superposition_guards():
    for m in (0, 25, -3):
        with pytest.raises(ValueError):
            uniform_superposition(m)


def test_energy_table_matches_naive_evaluation():
    hamiltonian = to_ising(build_slack_ancilla_qubo(generate_instance(2, 1, seed=6), 30.0))
    table = energy_table(hamiltonian)
    for x in range(1 << 4):
        assert table.energies[x] == pytest.approx(
            naive_ising_energy(hamiltonian, index_to_bits(x, 4)), abs=1e-12
        )


def test_phase_separation_identity_at_zero():
    state = uniform_superposition(3)
    before = state.amplitudes.copy()
    apply_phase_separation(state, _random_table(3, 0), 0.0)
    assert np.array_equal(state.amplitudes, before)


def test_phase_separation_constant_energy_is_global_phase():
    state = StateVector(2, random_state(2, 1))
    probs_before = state.probabilities()
    table = EnergyTable(2, np.full(4, 1.7))
    apply_phase_separation(state, table, 0.9)
    assert np.allclose(state.probabilities(), probs_before, atol=1e-12)
    # amplitudes carry exactly the expected global phase
    assert np.allclose(state.amplitudes, np.exp(-1j * 0.9 * 1.7) * random_state(2, 1), atol=1e-12)


def test_phase_separation_matches_matrix_exponential():
    e1 = 0.731
    table = EnergyTable(1, np.array([0.0, e1]))
    state = uniform_superposition(1)
    apply_phase_separation(state, table, 0.4)
    diag_h = np.diag([0.0, e1])
    expected = expm(-1j * 0.4 * diag_h) @ np.full(2, 1 / np.sqrt(2), dtype=complex)
    assert np.allclose(state.amplitudes, expected, atol=1e-12)


def test_phase_separation_dimension_mismatch():
    with pytest.raises(ValueError):
        apply_phase_separation(uniform_superposition(2), _random_table(3, 0), 0.1)


def test_mixer_identity_at_zero():
    state = StateVector(3, random_state(3, 2))
    before = state.amplitudes.copy()
    apply_mixer(state, 0.0)
    assert np.allclose(state.amplitudes, before, atol=1e-15)


def test_mixer_half_pi_flips_all_bits():
    state = uniform_superposition(3)
    state.amplitudes[:] = 0
    state.amplitudes[0] = 1.0  # |000>
    apply_mixer(state, np.pi / 2)
    probs = state.probabilities()
    assert probs[-1] == pytest.approx(1.0, abs=1e-10)


def test_mixer_quarter_pi_balances_single_qubit():
    state = uniform_superposition(1)
    state.amplitudes[:] = [1.0, 0.0]
    apply_mixer(state, np.pi / 4)
    assert np.allclose(state.probabilities(), [0.5, 0.5], atol=1e-12)


def test_conditional_mixer_identity_at_zero():
    state = StateVector(2, random_state(2, 3))
    before = state.amplitudes.copy()
    apply_conditional_mixer(state, 0.0, [(0, 1)])
    assert np.allclose(state.amplitudes, before, atol=1e-15)


def test_conditional_mixer_asset_on_flips_ancilla():
    # |asset=1, ancilla=0>: the controlled rotation flips the ancilla, then
    # the asset rotation flips the asset; beta=pi/2 lands on |01> up to phase.
    state = uniform_superposition(2)
    state.amplitudes[:] = 0
    state.amplitudes[string_to_index("10")] = 1.0
    apply_conditional_mixer(state, np.pi / 2, [(0, 1)])
    probs = state.probabilities()
    assert probs[string_to_index("01")] == pytest.approx(1.0, abs=1e-10)
    # the ancilla ends in 1 with certainty
    assert probs[string_to_index("01")] + probs[string_to_index("11")] == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("beta", [0.3, np.pi / 2, 1.9])
def test_conditional_mixer_asset_off_leaves_ancilla_marginal(beta):
    state = uniform_superposition(2)
    state.amplitudes[:] = 0
    state.amplitudes[string_to_index("01")] = 1.0  # asset off, ancilla 1
    apply_conditional_mixer(state, beta, [(0, 1)])
    probs = state.probabilities()
    ancilla_one = probs[string_to_index("01")] + probs[string_to_index("11")]
    assert ancilla_one == pytest.approx(1.0, abs=1e-10)


def test_conditional_mixer_validates_pairs():
    state = uniform_superposition(2)
    with pytest.raises(ValueError):
        apply_conditional_mixer(state, 0.1, [(0, 2)])
    with pytest.raises(ValueError):
        apply_conditional_mixer(state, 0.1, [(0, 0)])
    state4 = uniform_superposition(4)
    with pytest.raises(ValueError):
        apply_conditional_mixer(state4, 0.1, [(0, 1), (1, 2)])


def test_expectation_uniform_is_mean_energy():
    table = _random_table(3, 7)
    state = uniform_superposition(3)
    assert expectation(state, table) == pytest.approx(table.energies.mean(), abs=1e-12)


def test_expectation_on_basis_state():
    table = _random_table(2, 8)
    state = uniform_superposition(2)
    state.amplitudes[:] = 0
    state.amplitudes[2] = 1.0
    assert expectation(state, table) == pytest.approx(table.energies[2], abs=1e-13)


def test_expectation_matches_naive_sum():
    table = _random_table(3, 9)
    state = StateVector(3, random_state(3, 10))
    naive = sum(
        abs(state.amplitudes[x]) ** 2 * table.energies[x] for x in range(8)
    )
    assert expectation(state, table) == pytest.approx(naive, abs=1e-12)


def test_sample_basis_state_single_bin():
    state = uniform_superposition(2)
    state.amplitudes[:] = 0
    state.amplitudes[1] = 1.0
    counts = sample(state, 500, seed=0)
    assert counts == {"100"[:2]: 500} or counts == {"10": 500}


def test_sample_binomial_three_sigma():
    state = uniform_superposition(1)
    shots = 10**5
    counts = sample(state, shots, seed=123)
    sigma = np.sqrt(shots * 0.25)
    for bit in ("0", "1"):
        assert abs(counts.get(bit, 0) - shots / 2) <= 3 * sigma


def test_sample_energy_mean_within_three_sigma_of_expectation():
    inst = generate_instance(3, 1, seed=3)
    hamiltonian = to_ising(build_penalty_qubo(inst, 5.0))
    table = energy_table(hamiltonian)
    params = QaoaParams(2, (0.4, 0.9), (0.7, 0.3))
    state = run_ansatz(hamiltonian, params)
    shots = 20000
    counts = sample(state, shots, seed=77)
    sampled_mean = sum(
        c * table.energies[string_to_index(b)] for b, c in counts.items()
    ) / shots
    exact = expectation(state, table)
    probs = state.probabilities()
    energy_var = float(probs @ table.energies**2) - exact**2
    sigma_mean = np.sqrt(energy_var / shots)
    assert abs(sampled_mean - exact) <= 3 * sigma_mean


def test_sample_is_seeded_and_reproducible():
    state = StateVector(3, random_state(3, 5))
    assert sample(state, 1000, seed=9) == sample(state, 1000, seed=9)
    assert sample(state, 1000, seed=9) != sample(state, 1000, seed=10)


def test_sampling_chisquare_consistency():
    shots = 10**5
    for m in range(1, 5):
        state = StateVector(m, random_state(m, 40 + m))
        probs = state.probabilities()
        counts = sample(state, shots, seed=m)
        observed = np.array(
            [counts.get(
                "".join("1" if (x >> i) & 1 else "0" for i in range(m)), 0
            ) for x in range(1 << m)]
        )
        _, p_value = stats.chisquare(observed, probs * shots)
        assert p_value > 0.01


@given(seed=st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_unitarity_over_random_sequences(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    state = StateVector(m, random_state(m, seed))
    table = _random_table(m, seed + 1)
    pairs = [(0, 1)] if m >= 2 else None
    for _ in range(100):
        op = rng.integers(0, 3 if pairs else 2)
        if op == 0:
            apply_phase_separation(state, table, float(rng.normal()))
        elif op == 1:
            apply_mixer(state, float(rng.normal()))
        else:
            apply_conditional_mixer(state, float(rng.normal()), pairs)
    assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-10


@given(seed=st.integers(0, 10**6), g1=st.floats(-3, 3), g2=st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_diagonal_commutation(seed, g1, g2):
    table = _random_table(3, seed)
    split = StateVector(3, random_state(3, seed))
    apply_phase_separation(split, table, g1)
    apply_phase_separation(split, table, g2)
    joint = StateVector(3, random_state(3, seed))
    apply_phase_separation(joint, table, g1 + g2)
    assert np.allclose(split.amplitudes, joint.amplitudes, atol=1e-12)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_mixer_acts_as_bit_flip_at_half_pi(seed):
    # exp(-i*(pi/2)*X) = -iX per qubit, so probabilities land on the
    # bit-flipped strings; at pi the mixer is -I, a global phase.
    m = 3
    state = StateVector(m, random_state(m, seed))
    original = state.probabilities()
    apply_mixer(state, np.pi / 2)
    flipped = state.probabilities()
    full = (1 << m) - 1
    for x in range(1 << m):
        assert flipped[x] == pytest.approx(original[x ^ full], abs=1e-12)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_mixer_periodicity_at_pi(seed):
    state = StateVector(3, random_state(3, seed))
    original = state.amplitudes.copy()
    apply_mixer(state, np.pi)
    # identity up to a global phase
    assert np.allclose(state.amplitudes, -original, atol=1e-12) or np.allclose(
        state.amplitudes, original, atol=1e-12
    )


# --- circuit export -----------------------------------------------------------

def test_export_zero_hamiltonian_is_mixer_only():
    hamiltonian = IsingHamiltonian(3, {}, np.zeros(3), 0.0)
    text = export_circuit_text(QaoaParams(1, (0.3,), (0.6,)), hamiltonian)
    gates = [ln.split()[0] for ln in text.splitlines() if ln and not ln.startswith("#")]
    assert gates == ["rx"] * 3


def test_export_gate_counts_per_layer():
    inst = generate_instance(3, 1, seed=12)
    hamiltonian = to_ising(build_penalty_qubo(inst, 10.0))
    params = QaoaParams(2, (0.3, 0.5), (0.2, 0.4))
    text = export_circuit_text(params, hamiltonian)
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    n_rzz = sum(ln.startswith("rzz") for ln in lines)
    n_rz = sum(ln.startswith("rz ") for ln in lines)
    n_rx = sum(ln.startswith("rx") for ln in lines)
    nonzero_fields = int(np.count_nonzero(hamiltonian.fields))
    assert n_rzz == 2 * len(hamiltonian.couplings)
    assert n_rz == 2 * nonzero_fields
    assert n_rx == 2 * hamiltonian.num_qubits


def test_export_replay_matches_diagonal_evolution_standard():
    inst = generate_instance(3, 1, seed=14)
    hamiltonian = to_ising(build_penalty_qubo(inst, 10.0))
    params = QaoaParams(2, (0.37, 0.81), (0.55, 0.21))
    state = run_ansatz(hamiltonian, params)
    replayed = replay_circuit(
        export_circuit_text(params, hamiltonian), hamiltonian.num_qubits
    )
    assert np.allclose(replayed, state.amplitudes, atol=1e-9)


def test_export_replay_matches_diagonal_evolution_conditional():
    inst = generate_instance(2, 1, seed=15)
    program = build_slack_ancilla_qubo(inst, 20.0)
    hamiltonian = to_ising(program)
    pairs = mixer_pairs(program.labels)
    params = QaoaParams(2, (0.4, 0.6), (0.3, 0.9))
    state = run_ansatz(hamiltonian, params, mixer="conditional", pairs=pairs)
    replayed = replay_circuit(
        export_circuit_text(params, hamiltonian, mixer="conditional", pairs=pairs),
        hamiltonian.num_qubits,
    )
    assert np.allclose(replayed, state.amplitudes, atol=1e-9)


def test_run_ansatz_matches_dense_reference():
    inst = generate_instance(3, 1, seed=16)
    program = build_slack_ancilla_qubo(inst, 100.0)
    hamiltonian = to_ising(program)
    params = QaoaParams(2, (0.8, 0.15), (0.45, 0.7))
    for mixer in ("standard", "conditional"):
        pairs = mixer_pairs(program.labels) if mixer == "conditional" else None
        state = run_ansatz(hamiltonian, params, mixer=mixer, pairs=pairs)
        reference = dense_reference_ansatz(hamiltonian, params, mixer, pairs)
        assert np.allclose(state.amplitudes, reference, atol=1e-10)


def test_dump_state_round_trips_amplitudes():
    state = StateVector(2, random_state(2, 21))
    rows = json.loads(dump_state(state))
    assert len(rows) == 4
    for bitstring, re, im in rows:
        x = string_to_index(bitstring)
        assert complex(re, im) == pytest.approx(state.amplitudes[x], abs=1e-15)
    big = uniform_superposition(13)
    with pytest.raises(ValueError):
        dump_state(big)
