"""Ground-truth machinery: exhaustive searches and the classical baseline.

The exhaustive routines enumerate every assignment (chunked, vectorized)
and break ties toward the lowest bitstring index so results are pinned
regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitstrings import all_bit_rows, bits_to_string, index_to_bits, index_to_string
from .encode import QuboProgram, qubo_energy
from .instance import PortfolioInstance, classical_objective, is_feasible
from .qaoa import minimize_with_budget

MAX_ENUM_VARS = 24
_CHUNK = 1 << 14


def exhaustive_portfolio_optimum(instance: PortfolioInstance) -> tuple[str, float]:
    """Best feasible portfolio over all 2^n selections.

    Always succeeds: the empty portfolio is feasible. Ties break toward
    the lowest bitstring index.
    """
    n = instance.n
    if n > MAX_ENUM_VARS:
        raise ValueError(f"refusing to enumerate {n} assets (limit {MAX_ENUM_VARS})")
    best_value = math.inf
    best_index = 0
    total = 1 << n
    for start in range(0, total, _CHUNK):
        rows = all_bit_rows(n, start, min(start + _CHUNK, total))
        feasible = np.all(rows <= instance.alpha, axis=1) & (rows.sum(axis=1) <= instance.k)
        if not feasible.any():
            continue
        risk = np.einsum("xi,ij,xj->x", rows, instance.sigma, rows)
        values = instance.q_risk * risk - instance.lambda_weight * (rows @ instance.mu)
        values = np.where(feasible, values, math.inf)
        local = int(np.argmin(values))
        if values[local] < best_value:
            best_value = float(values[local])
            best_index = start + local
    bits = index_to_bits(best_index, n)
    return index_to_string(best_index, n), classical_objective(instance, bits)


def exhaustive_qubo_minimum(program: QuboProgram) -> tuple[str, float]:
    """Global minimum over all 2^m assignments; ties break toward the
    lowest bitstring index."""
    m = program.num_vars
    if m > MAX_ENUM_VARS:
        raise ValueError(f"refusing to enumerate {m} variables (limit {MAX_ENUM_VARS})")
    best_energy = math.inf
    best_index = 0
    total = 1 << m
    for start in range(0, total, _CHUNK):
        rows = all_bit_rows(m, start, min(start + _CHUNK, total))
        energies = (
            np.einsum("xi,ij,xj->x", rows, program.quadratic, rows)
            + rows @ program.linear
            + program.constant
        )
        local = int(np.argmin(energies))
        if energies[local] < best_energy:
            best_energy = float(energies[local])
            best_index = start + local
    bits = index_to_bits(best_index, m)
    return index_to_string(best_index, m), qubo_energy(program, bits)


@dataclass(frozen=True)
class BaselineResult:
    """Rounded output of the continuous-relaxation baseline."""

    bitstring: str
    feasible: bool
    value: float
    trace: tuple[float, ...]


def classical_baseline(
    instance: PortfolioInstance,
    beta_penalty: float = 100.0,
    budget: int = 200,
    seed: int = 0,
    optimizer: str = "cobyla",
) -> BaselineResult:
    """Derivative-free search on the continuous relaxation of the
    penalized slack objective over [0,1]^(2n), rounded at 0.5.

    Uses the same optimizer machinery as the variational runs. The unit
    box is passed as native inequality constraints where the method
    supports them; iterates are additionally clipped before evaluation so
    the unconstrained variant stays inside the cube too.
    """
    if beta_penalty <= 0:
        raise ValueError(f"penalty weight must be positive, got {beta_penalty}")
    n = instance.n

    def relaxed(v):
        v = np.clip(v, 0.0, 1.0)
        w, s = v[:n], v[n:]
        slack_residual = w - instance.alpha + s
        return (
            instance.q_risk * float(w @ instance.sigma @ w)
            - instance.lambda_weight * float(instance.mu @ w)
            + beta_penalty * float(slack_residual @ slack_residual)
        )

    box = [{"type": "ineq", "fun": (lambda x, i=i: x[i])} for i in range(2 * n)]
    box += [{"type": "ineq", "fun": (lambda x, i=i: 1.0 - x[i])} for i in range(2 * n)]
    x0 = np.random.default_rng(seed).uniform(0.0, 1.0, size=2 * n)
    best_x, _, evals = minimize_with_budget(relaxed, x0, optimizer, budget, constraints=box)
    rounded = (np.clip(best_x, 0.0, 1.0) >= 0.5).astype(float)
    asset_bits = rounded[:n]
    return BaselineResult(
        bitstring=bits_to_string(asset_bits),
        feasible=is_feasible(instance, asset_bits),
        value=classical_objective(instance, asset_bits),
        trace=tuple(evals),
    )
