"""Bit-level basis utilities and state-vector helpers.

State vectors are plain 1-d complex numpy arrays.  Basis index ``x`` encodes
qubit ``j`` in bit ``j``; spin variables follow ``S_j = 1 - 2 * bit_j(x)``.
"""
from __future__ import annotations

import numpy as np

from .errors import CapacityError, SpecError

#: Largest qubit count for which full-space (2^n) vectors are allocated.
MAX_FULL_QUBITS = 24
#: Largest qubit count for which dense 2^n x 2^n matrices are allocated.
MAX_DENSE_QUBITS = 14


def hamming_weight(x: int) -> int:
    return int(x).bit_count()


def hamming_weights(n: int) -> np.ndarray:
    """Popcount of every basis index in ``[0, 2^n)``."""
    x = np.arange(1 << n)
    w = np.zeros(1 << n, dtype=np.int64)
    for j in range(n):
        w += (x >> j) & 1
    return w


def gray_code(j):
    """Binary-reflected Gray code ``j ^ (j >> 1)``; works on ints and int arrays."""
    return j ^ (j >> 1)


def gray_decode(g):
    """Inverse of :func:`gray_code` for scalar ints."""
    j = int(g)
    shift = j >> 1
    while shift:
        j ^= shift
        shift >>= 1
    return j


def check_full_space(n: int, limit: int = MAX_FULL_QUBITS) -> None:
    if n < 1:
        raise SpecError(f"qubit count must be >= 1, got {n}")
    if n > limit:
        raise CapacityError(f"n={n} exceeds the full-space limit n <= {limit}")


def normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise SpecError("cannot normalize a zero or non-finite vector")
    return v / norm


def uniform_state(n: int) -> np.ndarray:
    """Equal superposition over all ``2^n`` basis states."""
    check_full_space(n)
    dim = 1 << n
    return np.full(dim, dim ** -0.5, dtype=complex)


def basis_state(dim: int, index: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise SpecError(f"basis index {index} outside [0, {dim})")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def spins(n: int) -> np.ndarray:
    """Array of shape ``(2^n, n)`` with the spin values of every basis state."""
    check_full_space(n)
    x = np.arange(1 << n)
    return 1.0 - 2.0 * ((x[:, None] >> np.arange(n)) & 1)
