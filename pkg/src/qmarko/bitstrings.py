"""Bitstring indexing conventions shared across the package.

A basis-state index encodes qubit 0 in its least-significant bit. The
string form prints qubit 0 first (leftmost), so asset 0 is the first
character: index 1 on three qubits renders as ``"100"``.
"""

from __future__ import annotations

import numpy as np


def index_to_string(index: int, num_bits: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(num_bits))


def string_to_index(bits: str) -> int:
    if any(ch not in "01" for ch in bits):
        raise ValueError(f"not a bitstring: {bits!r}")
    return sum(1 << i for i, ch in enumerate(bits) if ch == "1")


def index_to_bits(index: int, num_bits: int) -> np.ndarray:
    return (index >> np.arange(num_bits)) & 1


def bits_to_index(bits) -> int:
    arr = np.asarray(bits, dtype=np.int64)
    return int((arr << np.arange(arr.size)).sum())


def bits_to_string(bits) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).astype(int))


def string_to_bits(bits: str) -> np.ndarray:
    return index_to_bits(string_to_index(bits), len(bits))


def all_bit_rows(num_bits: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Matrix of basis-state bit rows for indices [start, stop), shape (#, num_bits)."""
    if stop is None:
        stop = 1 << num_bits
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(num_bits)) & 1).astype(np.float64)
