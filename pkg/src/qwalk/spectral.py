"""Exact diagonalisation of the walk Hamiltonian and the infinite-time
success probability.

A :class:`Spectrum` keeps only eigenvalues and the two overlap vectors (plus
their signed product), never the eigenvector matrix, so memory stays O(N)
per hopping rate.  Because the Hamiltonian is real symmetric the eigenvectors
are real and ``cross[a] = <g|a><a|psi0>`` is a real number.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .core import MAX_DENSE_QUBITS, check_full_space
from .drivers import DriverSpec, Graph, SymmetricSearchHamiltonian, WalkHamiltonian
from .errors import NumericalError, SpecError

DEGENERACY_RTOL = 1e-9
RESIDUAL_RTOL = 1e-8
_SPOT_CHECKS = 10


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    overlap_ground: np.ndarray
    overlap_start: np.ndarray
    cross: np.ndarray
    ground_index: int
    gamma: float = float("nan")
    group_starts: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.group_starts is None:
            object.__setattr__(self, "group_starts", degeneracy_starts(self.eigenvalues))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def degeneracy_groups(self) -> list[np.ndarray]:
        bounds = list(self.group_starts) + [self.dim]
        return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def amplitude(self, t) -> np.ndarray:
        """``<g|exp(-iHt)|psi0>`` at one or many times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.exp(-1j * np.outer(t, self.eigenvalues)) @ self.cross

    def probability(self, t) -> np.ndarray:
        return np.abs(self.amplitude(t)) ** 2

    def window_average(self, t: float, delta_t: float) -> float:
        """Exact ``(1/dt) int_t^{t+dt} P`` from the eigen-expansion."""
        if delta_t < 0:
            raise SpecError("window length must be non-negative")
        w = kernels.window_pair_sum(self.eigenvalues, self.cross, float(t), float(delta_t))
        return float(min(max(w, 0.0), 1.0))

    def mixing_time(self, config=None, t0: float = 1.0):
        """Doubling-probe mixing time with exact window averages."""
        from .dynamics import MixingConfig, probe_mixing

        config = config or MixingConfig()
        return probe_mixing(lambda t: self.window_average(0.0, t), config, config.t0 or t0)


def degeneracy_starts(eigenvalues: np.ndarray, rtol: float = DEGENERACY_RTOL) -> np.ndarray:
    """First index of each run of (numerically) equal ascending eigenvalues."""
    e = np.asarray(eigenvalues)
    if e.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    tol = rtol * float(e[-1] - e[0])
    gaps = np.diff(e) > tol
    return np.concatenate(([0], np.flatnonzero(gaps) + 1)).astype(np.int64)


def p_infinity(spec: Spectrum) -> float:
    """Infinite-time average of ``P(t)``.

    Within each degenerate eigenspace the cross terms do not dephase, so the
    sum runs over ``(sum_{a in G} cross[a])^2`` per group ``G``; for a
    non-degenerate spectrum this is ``sum_a |<g|a>|^2 |<a|psi0>|^2``.
    """
    grouped = np.add.reduceat(spec.cross, spec.group_starts)
    return float(min(np.sum(grouped * grouped), 1.0))


def _spectrum_from_vectors(values, vectors, ground, start, gamma) -> Spectrum:
    g = vectors[ground, :]
    s = start @ vectors
    return Spectrum(values, g * g, s * s, g * s, int(ground), float(gamma))


def diagonalize(H: WalkHamiltonian, ground: int | None = None) -> Spectrum:
    """Full dense diagonalisation; ``ground`` defaults to the problem's argmin."""
    check_full_space(H.n, MAX_DENSE_QUBITS)
    if ground is None:
        ground = int(np.argmin(H.energies))
    if not 0 <= ground < H.dim:
        raise SpecError("ground index outside the basis")
    try:
        values, vectors = scipy.linalg.eigh(H.dense(), overwrite_a=True, check_finite=False,
                                            driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    scale = max(abs(values[0]), abs(values[-1]), 1e-300)
    picks = np.unique(np.linspace(0, H.dim - 1, min(_SPOT_CHECKS, H.dim)).astype(int))
    for a in picks:
        v = vectors[:, a]
        if np.linalg.norm(H.apply(v) - values[a] * v) > RESIDUAL_RTOL * scale:
            raise NumericalError(f"eigenpair {a} failed the residual check")
    start = np.full(H.dim, H.dim ** -0.5)
    return _spectrum_from_vectors(values, vectors, ground, start, H.gamma)


def diagonalize_symmetric(S: SymmetricSearchHamiltonian) -> Spectrum:
    """Spectrum of the shell-reduced search Hamiltonian (target = shell 0)."""
    values, vectors = scipy.linalg.eigh_tridiagonal(S.diagonal, S.off_diagonal)
    return _spectrum_from_vectors(values, vectors, 0, S.initial, S.gamma)


def p_infinity_dataset(inst, graph, gammas) -> tuple[np.ndarray, np.ndarray]:
    """``P_inf`` at every hopping rate of ``gammas`` (order preserved)."""
    gammas = np.atleast_1d(np.asarray(gammas, dtype=float))
    if gammas.size == 0:
        raise SpecError("empty hopping-rate grid")
    graph = Graph.parse(graph)
    energies = inst.energies
    ground = int(np.argmin(energies))
    out = np.empty_like(gammas)
    for i, g in enumerate(gammas):
        H = WalkHamiltonian(DriverSpec(graph, float(g)), energies, inst.n)
        out[i] = p_infinity(diagonalize(H, ground))
    return gammas, out


def write_spectrum_csv(spec: Spectrum, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "E_a", "overlap_ground", "overlap_start"])
        for a in range(spec.dim):
            w.writerow([a, f"{spec.eigenvalues[a]:.17g}", f"{spec.overlap_ground[a]:.17g}",
                        f"{spec.overlap_start[a]:.17g}"])
