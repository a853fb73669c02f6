"""Variational loop: depth-p ansatz, derivative-free angle search, and the
penalty-doubling feasibility schedule.

``run_schedule`` is the headline routine: it alternates short bursts of
angle optimization on the slack-ancilla Hamiltonian with sampled
feasibility checks, doubling the penalty weight after every failed check
until the sampled portfolios are feasible at the target rate or the
iteration cap is hit. Angle optimization is warm-started across penalty
doublings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize as sciopt

from . import bounds
from .bitstrings import index_to_bits, index_to_string
from .encode import (
    ASSET,
    SLACK_ASSET,
    IsingHamiltonian,
    build_cardinality_slack_qubo,
    build_penalty_qubo,
    build_slack_ancilla_qubo,
    to_ising,
)
from .instance import PortfolioInstance, classical_objective, is_feasible
from .simulate import (
    EnergyTable,
    StateVector,
    apply_conditional_mixer,
    apply_mixer,
    apply_phase_separation,
    energy_table,
    expectation,
    sample,
    uniform_superposition,
)

SCIPY_METHODS = {"cobyla": "COBYLA", "nelder-mead": "Nelder-Mead"}

# Asset configurations below this exact probability are ignored when
# picking the best feasible portfolio out of a final state.
REPORTING_THRESHOLD = 1e-3


@dataclass(frozen=True)
class QaoaParams:
    """Angles of a depth-p ansatz: p phase angles and p mixer angles."""

    p: int
    gammas: tuple[float, ...]
    beta_mixes: tuple[float, ...]

    def __post_init__(self) -> None:
        gammas = tuple(float(g) for g in self.gammas)
        beta_mixes = tuple(float(b) for b in self.beta_mixes)
        if self.p < 1:
            raise ValueError(f"depth must be >= 1, got p={self.p}")
        if len(gammas) != self.p or len(beta_mixes) != self.p:
            raise ValueError(
                f"expected {self.p} gammas and beta_mixes, got "
                f"{len(gammas)} and {len(beta_mixes)}"
            )
        if not all(math.isfinite(v) for v in gammas + beta_mixes):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "beta_mixes", beta_mixes)

    @classmethod
    def from_vector(cls, theta) -> "QaoaParams":
        vec = np.asarray(theta, dtype=float)
        if vec.size % 2 != 0 or vec.size == 0:
            raise ValueError(f"angle vector must have even positive length, got {vec.size}")
        p = vec.size // 2
        return cls(p, tuple(vec[:p]), tuple(vec[p:]))

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.beta_mixes, dtype=float)

    def as_dict(self) -> dict:
        return {"p": self.p, "gammas": list(self.gammas), "beta_mixes": list(self.beta_mixes)}


@dataclass(frozen=True)
class ScheduleConfig:
    """Knobs of the penalty-doubling feasibility schedule."""

    beta_penalty_init: float = 100.0
    doubling_interval: int = 20
    feasibility_shots: int = 1000
    feasibility_target: float = 1.0
    max_iterations: int = 200

    def __post_init__(self) -> None:
        if self.beta_penalty_init <= 0:
            raise ValueError("beta_penalty_init must be positive")
        if self.doubling_interval < 1 or self.feasibility_shots < 1 or self.max_iterations < 1:
            raise ValueError("doubling_interval, feasibility_shots, max_iterations must be >= 1")
        if not 0.0 < self.feasibility_target <= 1.0:
            raise ValueError("feasibility_target must lie in (0, 1]")

    def as_dict(self) -> dict:
        return {
            "beta_penalty_init": self.beta_penalty_init,
            "doubling_interval": self.doubling_interval,
            "feasibility_shots": self.feasibility_shots,
            "feasibility_target": self.feasibility_target,
            "max_iterations": self.max_iterations,
        }


@dataclass(frozen=True)
class TraceRow:
    """One optimizer evaluation; feasible_fraction is set on check rows only."""

    iteration: int
    expectation: float
    beta_penalty: float
    feasible_fraction: float | None = None

    def as_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "expectation": self.expectation,
            "beta_penalty": self.beta_penalty,
            "feasible_fraction": self.feasible_fraction,
        }


@dataclass(frozen=True)
class PortfolioPick:
    """A reported asset selection with its classical objective value."""

    bitstring: str
    value: float
    feasible: bool
    probability: float | None = None

    def as_dict(self) -> dict:
        return {
            "bitstring": self.bitstring,
            "value": self.value,
            "feasible": self.feasible,
            "probability": self.probability,
        }


@dataclass(frozen=True)
class ExperimentRecord:
    """Everything one variational run produced, JSON-serializable."""

    method: str
    seed: int
    mixer: str
    optimizer: str
    initial_params: QaoaParams
    final_params: QaoaParams
    final_beta_penalty: float
    histogram: dict[str, float]
    best_feasible: PortfolioPick | None
    most_probable: PortfolioPick
    reported: PortfolioPick | None
    feasible_fraction: float
    sampled_feasible_fraction: float | None
    iterations_used: int
    terminated_by: str
    objective_trace: tuple[float, ...]
    trace: tuple[TraceRow, ...]
    variance_bound: bounds.BoundReport

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "mixer": self.mixer,
            "optimizer": self.optimizer,
            "initial_params": self.initial_params.as_dict(),
            "final_params": self.final_params.as_dict(),
            "final_beta_penalty": self.final_beta_penalty,
            "histogram": self.histogram,
            "best_feasible": self.best_feasible.as_dict() if self.best_feasible else None,
            "most_probable": self.most_probable.as_dict(),
            "bitstring": self.reported.bitstring if self.reported else None,
            "feasible": bool(self.reported.feasible) if self.reported else False,
            "value": self.reported.value if self.reported else None,
            "feasible_fraction": self.feasible_fraction,
            "sampled_feasible_fraction": self.sampled_feasible_fraction,
            "iterations": self.iterations_used,
            "terminated_by": self.terminated_by,
            "objective_trace": list(self.objective_trace),
            "trace": [row.as_dict() for row in self.trace],
            "variance_bound": self.variance_bound.as_dict(),
        }


class _BudgetExhausted(Exception):
    pass


def minimize_with_budget(fun, x0, optimizer: str = "cobyla", budget: int = 200, constraints=()):
    """Derivative-free minimization hard-capped at ``budget`` evaluations.

    Returns (best_x, best_f, evals) where evals lists every objective value
    in evaluation order; the cap may leave the scipy call unfinished, in
    which case the best point seen so far is returned. ``constraints`` are
    forwarded for methods that support them (COBYLA); the Nelder-Mead
    variant ignores them, so callers must also guard inside ``fun``.
    """
    if optimizer not in SCIPY_METHODS:
        raise ValueError(f"unknown optimizer {optimizer!r}; choose from {sorted(SCIPY_METHODS)}")
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    best_x = np.array(x0, dtype=float)
    best_f = math.inf
    evals: list[float] = []

    def wrapped(x):
        nonlocal best_x, best_f
        if len(evals) >= budget:
            # Backstop only: the native option caps evaluations first.
            raise _BudgetExhausted
        value = float(fun(np.asarray(x, dtype=float)))
        evals.append(value)
        if value < best_f:
            best_f = value
            best_x = np.array(x, dtype=float)
        return value

    if optimizer == "cobyla":
        options = {"maxiter": budget}  # COBYLA's maxiter counts evaluations
        kwargs = {"constraints": list(constraints)} if constraints else {}
    else:
        options = {"maxfev": budget, "maxiter": 100 * budget + 1000}
        kwargs = {}
    try:
        sciopt.minimize(
            wrapped,
            np.asarray(x0, dtype=float),
            method=SCIPY_METHODS[optimizer],
            options=options,
            **kwargs,
        )
    except _BudgetExhausted:
        pass
    if not evals:  # defensive; scipy always evaluates x0
        best_f = float(fun(best_x))
        evals.append(best_f)
    return best_x, best_f, evals


def _minimize_exact_budget(fun, x0, optimizer: str, budget: int):
    """Consume exactly ``budget`` evaluations, restarting from the current
    best point whenever the minimizer converges early. Keeps the penalty
    schedule's doubling cadence exact."""
    best_x = np.array(x0, dtype=float)
    best_f = math.inf
    all_evals: list[float] = []
    while len(all_evals) < budget:
        x, f, evals = minimize_with_budget(fun, best_x, optimizer, budget - len(all_evals))
        all_evals.extend(evals)
        if f < best_f:
            best_f = f
            best_x = x
    return best_x, best_f, all_evals


def mixer_pairs(labels) -> list[tuple[int, int]]:
    """(asset qubit, slack qubit) pairs from a program's variable labels."""
    assets = {lab.index: pos for pos, lab in enumerate(labels) if lab.kind == ASSET}
    slacks = {lab.index: pos for pos, lab in enumerate(labels) if lab.kind == SLACK_ASSET}
    return [(assets[i], slacks[i]) for i in sorted(assets) if i in slacks]


def _ansatz_state(table: EnergyTable, params: QaoaParams, mixer: str, pairs) -> StateVector:
    state = uniform_superposition(table.num_qubits)
    for layer in range(params.p):
        apply_phase_separation(state, table, params.gammas[layer])
        if mixer == "standard":
            apply_mixer(state, params.beta_mixes[layer])
        elif mixer == "conditional":
            apply_conditional_mixer(state, params.beta_mixes[layer], pairs)
        else:
            raise ValueError(f"unknown mixer: {mixer!r}")
    return state


def run_ansatz(
    hamiltonian: IsingHamiltonian,
    params: QaoaParams,
    mixer: str = "standard",
    pairs=None,
) -> StateVector:
    """p alternating layers of phase separation and mixing on the uniform state."""
    return _ansatz_state(energy_table(hamiltonian), params, mixer, pairs)


def _draw_initial_angles(rng: np.random.Generator, p: int) -> np.ndarray:
    return rng.uniform(0.0, np.pi, size=2 * p)


def optimize_angles(
    hamiltonian: IsingHamiltonian,
    p: int,
    optimizer: str = "cobyla",
    budget: int = 200,
    seed: int = 0,
    mixer: str = "standard",
    pairs=None,
    initial_params: QaoaParams | None = None,
):
    """Minimize the ansatz expectation over the 2p angles from a seeded start.

    Returns (best_params, trace); the trace lists every objective value in
    evaluation order. Budget exhaustion returns the best angles seen.
    """
    table = energy_table(hamiltonian)
    if initial_params is None:
        theta0 = _draw_initial_angles(np.random.default_rng(seed), p)
    else:
        theta0 = initial_params.to_vector()

    def objective(theta):
        state = _ansatz_state(table, QaoaParams.from_vector(theta), mixer, pairs)
        return expectation(state, table)

    best_x, _, evals = minimize_with_budget(objective, theta0, optimizer, budget)
    return QaoaParams.from_vector(best_x), evals


def _asset_bits_of_sample(bitstring: str, n: int) -> np.ndarray:
    return np.array([int(ch) for ch in bitstring[:n]], dtype=float)


def _sampled_feasible_fraction(instance: PortfolioInstance, counts: dict[str, int], shots: int) -> float:
    feasible = 0
    for bitstring, count in counts.items():
        if is_feasible(instance, _asset_bits_of_sample(bitstring, instance.n)):
            feasible += count
    return feasible / shots


def _full_histogram(state: StateVector) -> dict[str, float]:
    probabilities = state.probabilities()
    return {
        index_to_string(i, state.num_qubits): float(p)
        for i, p in enumerate(probabilities)
    }


def _portfolio_picks(instance: PortfolioInstance, state: StateVector):
    """(best_feasible, most_probable, exact feasible mass) from the asset marginal."""
    marginal = bounds.asset_marginal(state, instance.n)
    mp_index = int(np.argmax(marginal))
    mp_bits = index_to_bits(mp_index, instance.n)
    most_probable = PortfolioPick(
        bitstring=index_to_string(mp_index, instance.n),
        value=classical_objective(instance, mp_bits),
        feasible=is_feasible(instance, mp_bits),
        probability=float(marginal[mp_index]),
    )
    best: PortfolioPick | None = None
    feasible_mass = 0.0
    for idx in range(1 << instance.n):
        bits = index_to_bits(idx, instance.n)
        if not is_feasible(instance, bits):
            continue
        feasible_mass += float(marginal[idx])
        if marginal[idx] <= REPORTING_THRESHOLD:
            continue
        value = classical_objective(instance, bits)
        if best is None or value < best.value:
            best = PortfolioPick(
                bitstring=index_to_string(idx, instance.n),
                value=value,
                feasible=True,
                probability=float(marginal[idx]),
            )
    return best, most_probable, feasible_mass


def run_schedule(
    instance: PortfolioInstance,
    config: ScheduleConfig | None = None,
    p: int = 2,
    mixer: str = "conditional",
    seed: int = 0,
    optimizer: str = "cobyla",
) -> ExperimentRecord:
    """Slack-ancilla QAOA with the penalty-doubling feasibility schedule.

    Every ``doubling_interval`` optimizer iterations the current state is
    sampled; if the feasible fraction misses the target the penalty weight
    doubles and optimization continues from the best angles so far. Stops
    on target or at ``max_iterations``. A missing best_feasible (possible
    only if every feasible configuration fell below the reporting
    threshold) is recorded, not raised.
    """
    if config is None:
        config = ScheduleConfig()
    master = np.random.default_rng(seed)
    theta = _draw_initial_angles(master, p)
    initial_params = QaoaParams.from_vector(theta)
    beta_penalty = config.beta_penalty_init
    rows: list[TraceRow] = []
    used = 0
    while True:
        program = build_slack_ancilla_qubo(instance, beta_penalty)
        hamiltonian = to_ising(program)
        table = energy_table(hamiltonian)
        pairs = mixer_pairs(program.labels) if mixer == "conditional" else None

        def objective(vec, _table=table, _pairs=pairs):
            state = _ansatz_state(_table, QaoaParams.from_vector(vec), mixer, _pairs)
            return expectation(state, _table)

        chunk = min(config.doubling_interval, config.max_iterations - used)
        theta, _, evals = _minimize_exact_budget(objective, theta, optimizer, chunk)
        for value in evals:
            used += 1
            rows.append(TraceRow(used, value, beta_penalty))
        final_params = QaoaParams.from_vector(theta)
        state = _ansatz_state(table, final_params, mixer, pairs)
        check_seed = int(master.integers(0, 2**63))
        counts = sample(state, config.feasibility_shots, check_seed)
        sampled_fraction = _sampled_feasible_fraction(instance, counts, config.feasibility_shots)
        rows[-1] = replace(rows[-1], feasible_fraction=sampled_fraction)
        if sampled_fraction >= config.feasibility_target:
            terminated_by = "feasibility_target"
            break
        if used >= config.max_iterations:
            terminated_by = "max_iterations"
            break
        beta_penalty *= 2.0

    best_feasible, most_probable, feasible_mass = _portfolio_picks(instance, state)
    return ExperimentRecord(
        method="slack-qaoa",
        seed=seed,
        mixer=mixer,
        optimizer=optimizer,
        initial_params=initial_params,
        final_params=final_params,
        final_beta_penalty=beta_penalty,
        histogram=_full_histogram(state),
        best_feasible=best_feasible,
        most_probable=most_probable,
        reported=best_feasible,
        feasible_fraction=feasible_mass,
        sampled_feasible_fraction=sampled_fraction,
        iterations_used=used,
        terminated_by=terminated_by,
        objective_trace=tuple(row.expectation for row in rows),
        trace=tuple(rows),
        variance_bound=bounds.check_variance_bound(state, instance),
    )


def _run_fixed_penalty(
    instance: PortfolioInstance,
    program,
    method: str,
    a_card: float,
    p: int,
    budget: int,
    seed: int,
    optimizer: str,
    report_most_probable: bool,
) -> ExperimentRecord:
    hamiltonian = to_ising(program)
    table = energy_table(hamiltonian)
    initial_params = QaoaParams.from_vector(
        _draw_initial_angles(np.random.default_rng(seed), p)
    )
    final_params, evals = optimize_angles(
        hamiltonian, p, optimizer=optimizer, budget=budget,
        initial_params=initial_params,
    )
    state = _ansatz_state(table, final_params, "standard", None)
    best_feasible, most_probable, feasible_mass = _portfolio_picks(instance, state)
    rows = tuple(
        TraceRow(i + 1, value, a_card) for i, value in enumerate(evals)
    )
    return ExperimentRecord(
        method=method,
        seed=seed,
        mixer="standard",
        optimizer=optimizer,
        initial_params=initial_params,
        final_params=final_params,
        final_beta_penalty=a_card,
        histogram=_full_histogram(state),
        best_feasible=best_feasible,
        most_probable=most_probable,
        reported=most_probable if report_most_probable else best_feasible,
        feasible_fraction=feasible_mass,
        sampled_feasible_fraction=None,
        iterations_used=len(evals),
        terminated_by="completed",
        objective_trace=tuple(row.expectation for row in rows),
        trace=rows,
        variance_bound=bounds.check_variance_bound(state, instance),
    )


def run_baseline_penalty_qaoa(
    instance: PortfolioInstance,
    a_card: float = 1000.0,
    p: int = 2,
    budget: int = 200,
    seed: int = 0,
    optimizer: str = "cobyla",
) -> ExperimentRecord:
    """Fixed-penalty QAOA over the asset bits only; reports the most
    probable portfolio with an explicit feasibility flag, reproducing the
    failure mode where that portfolio violates the constraints."""
    program = build_penalty_qubo(instance, a_card)
    return _run_fixed_penalty(
        instance, program, "penalty-qaoa", a_card, p, budget, seed, optimizer,
        report_most_probable=True,
    )


def run_cardinality_slack_qaoa(
    instance: PortfolioInstance,
    a_card: float = 1000.0,
    p: int = 2,
    budget: int = 200,
    seed: int = 0,
    optimizer: str = "cobyla",
) -> ExperimentRecord:
    """Fixed-penalty QAOA on the binary-slack cardinality encoding; reports
    the best feasible portfolio above the probability threshold."""
    program = build_cardinality_slack_qubo(instance, a_card)
    return _run_fixed_penalty(
        instance, program, "cardinality-slack-qaoa", a_card, p, budget, seed, optimizer,
        report_most_probable=False,
    )
