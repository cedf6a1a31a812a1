"""Walk-graph drivers, the full walk Hamiltonian, and the search-problem
reduction onto Hamming shells around the marked state.

Both drivers use the Laplacian convention, so the uniform superposition is
their ground state with eigenvalue 0:

* hypercube  ``H_h = gamma * (n - sum_j X_j)``
* complete   ``H_K = gamma * N * (1 - |s><s|)`` with ``|s>`` uniform
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import MAX_DENSE_QUBITS, MAX_FULL_QUBITS, check_full_space
from .errors import SpecError


class Graph(str, enum.Enum):
    HYPERCUBE = "hypercube"
    COMPLETE = "complete"

    @classmethod
    def parse(cls, value) -> "Graph":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise SpecError(f"unknown graph {value!r}") from None


@dataclass(frozen=True)
class DriverSpec:
    graph: Graph
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "graph", Graph.parse(self.graph))
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise SpecError(f"hopping rate must be positive, got {self.gamma}")

    def max_eigenvalue(self, n: int) -> float:
        """Largest driver eigenvalue (the smallest is always 0)."""
        if self.graph is Graph.HYPERCUBE:
            return 2.0 * self.gamma * n
        return self.gamma * (1 << n)


def _check_vector(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != 1 << n:
        raise SpecError(f"vector of length {v.shape} does not match n={n}")
    return v


def apply_hypercube(n: int, gamma: float, v, out=None) -> np.ndarray:
    """``w[x] = gamma * (n v[x] - sum_j v[x ^ 2^j])``."""
    v = np.ascontiguousarray(_check_vector(v, n))
    if out is None:
        out = np.empty_like(v)
    return kernels.hypercube_apply(v, n, float(gamma), out)


def apply_complete(n: int, gamma: float, v, out=None) -> np.ndarray:
    """``w = gamma * (N v - sum(v))``, the rank-one projector form."""
    v = _check_vector(v, n)
    if out is None:
        out = np.empty_like(v)
    out[:] = gamma * ((1 << n) * v - v.sum())
    return out


class WalkHamiltonian:
    """``H(gamma) = H_G + diag(energies)``, applied matrix-free."""

    def __init__(self, driver: DriverSpec, energies, n: int | None = None):
        energies = np.ascontiguousarray(energies, dtype=np.float64)
        if n is None:
            n = int(energies.shape[0]).bit_length() - 1
        check_full_space(n, MAX_FULL_QUBITS)
        if energies.shape != (1 << n,):
            raise SpecError("energy table length does not match n")
        if not np.all(np.isfinite(energies)):
            raise SpecError("problem energies must be finite")
        self.driver = driver
        self.energies = energies
        self.n = n

    @classmethod
    def from_instance(cls, inst, graph, gamma: float) -> "WalkHamiltonian":
        return cls(DriverSpec(Graph.parse(graph), gamma), inst.energies, inst.n)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def gamma(self) -> float:
        return self.driver.gamma

    @property
    def graph(self) -> Graph:
        return self.driver.graph

    def with_gamma(self, gamma: float) -> "WalkHamiltonian":
        return WalkHamiltonian(DriverSpec(self.graph, gamma), self.energies, self.n)

    def spectral_bounds(self) -> tuple[float, float]:
        """Interval guaranteed to contain every eigenvalue (Weyl)."""
        lo = float(self.energies.min())
        hi = float(self.energies.max()) + self.driver.max_eigenvalue(self.n)
        return lo, hi

    def norm_bound(self) -> float:
        lo, hi = self.spectral_bounds()
        return max(abs(lo), abs(hi))

    def apply_driver(self, v, out=None) -> np.ndarray:
        if self.graph is Graph.HYPERCUBE:
            return apply_hypercube(self.n, self.gamma, v, out)
        return apply_complete(self.n, self.gamma, v, out)

    def apply(self, v, out=None) -> np.ndarray:
        v = _check_vector(v, self.n)
        out = self.apply_driver(v, out)
        out += self.energies * v
        return out

    def affine(self, v, alpha, beta, w, coef_w, out) -> np.ndarray:
        """``out = alpha * H v + beta * v + coef_w * w`` in one pass."""
        if self.graph is Graph.HYPERCUBE:
            return kernels.walk_affine(v, self.energies, self.n, self.gamma,
                                       alpha, beta, w, coef_w, out)
        hv = self.gamma * (self.dim * v - v.sum()) + self.energies * v
        out[:] = alpha * hv + beta * v + coef_w * w
        return out

    def dense(self) -> np.ndarray:
        """Materialised real symmetric matrix (small n only)."""
        check_full_space(self.n, MAX_DENSE_QUBITS)
        dim, g = self.dim, self.gamma
        if self.graph is Graph.HYPERCUBE:
            m = np.zeros((dim, dim))
            x = np.arange(dim)
            for j in range(self.n):
                m[x, x ^ (1 << j)] = -g
            m[x, x] = g * self.n
        else:
            m = np.full((dim, dim), -g)
            m[np.diag_indices(dim)] += g * dim
        m[np.diag_indices(dim)] += self.energies
        return m

    def expectation(self, v) -> float:
        return float(np.vdot(v, self.apply(v)).real)


def apply_full(H: WalkHamiltonian, v, out=None) -> np.ndarray:
    return H.apply(v, out)


@dataclass(frozen=True, eq=False)
class SymmetricSearchHamiltonian:
    """Search Hamiltonian restricted to the ``n + 1`` Hamming shells around
    the marked state.  Shell ``k`` is the normalised sum of all states at
    Hamming distance ``k`` from the marked one."""

    n: int
    gamma: float
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    initial: np.ndarray

    @property
    def dim(self) -> int:
        return self.n + 1

    def matrix(self) -> np.ndarray:
        return (np.diag(self.diagonal) + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v)
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out


def build_search_symmetric(n: int, gamma: float) -> SymmetricSearchHamiltonian:
    if not 1 <= n <= 64:
        raise SpecError("symmetric search reduction supports 1 <= n <= 64")
    if not gamma > 0:
        raise SpecError("hopping rate must be positive")
    k = np.arange(n + 1, dtype=float)
    diag = np.full(n + 1, gamma * n)
    diag[0] -= 1.0
    off = -gamma * np.sqrt((n - k[:-1]) * (k[:-1] + 1))
    init = np.sqrt([math.comb(n, int(j)) / 2.0 ** n for j in k])
    return SymmetricSearchHamiltonian(n, float(gamma), diag, off, init)
