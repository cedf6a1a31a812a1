"""Time evolution under the walk Hamiltonian.

The propagator ``exp(-i H tau)`` is applied through its Chebyshev expansion
on the interval returned by :meth:`WalkHamiltonian.spectral_bounds`, with
Bessel-function coefficients.  Long evolutions are split into chunks whose
scaled phase ``radius * tau`` stays below ``config.chunk_phase``; observables
are sampled on a grid whose step keeps ``range * dt <= theta_max``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import jv

from . import kernels
from .core import MAX_DENSE_QUBITS, check_full_space, normalize
from .drivers import Graph, WalkHamiltonian
from .errors import NumericalError, SpecError


@dataclass(frozen=True)
class PropagationConfig:
    """Step policy for propagation and observable sampling.

    Attributes:
        theta_max: largest phase ``(E_max - E_min) * dt`` between samples.
        tol: truncation threshold for the Chebyshev coefficients per step.
        chunk_phase: largest ``radius * tau`` for unsampled free evolution.
        stride: keep every ``stride``-th sample in a :class:`Trace`.
    """

    theta_max: float = 0.1
    tol: float = 1e-13
    chunk_phase: float = 20.0
    stride: int = 1

    def __post_init__(self):
        if not 0 < self.theta_max <= 1:
            raise SpecError("theta_max must lie in (0, 1]")
        if not self.tol > 0:
            raise SpecError("tolerance must be positive")
        if not self.chunk_phase > 0 or self.stride < 1:
            raise SpecError("chunk_phase must be positive and stride >= 1")


def chebyshev_coefficients(center: float, radius: float, tau: float, tol: float) -> np.ndarray:
    """Coefficients of ``exp(-i tau x)`` in ``T_k((x - center)/radius)``."""
    z = radius * tau
    k_max = int(z + 10.0 * max(z, 1.0) ** (1.0 / 3.0) + 40)
    k = np.arange(k_max + 1)
    j = jv(k, z)
    tail = np.abs(j) > tol
    tail[: int(z) + 1] = True
    order = max(int(np.flatnonzero(tail)[-1]) + 1, 2)
    coeffs = 2.0 * (-1j) ** k[:order] * j[:order]
    coeffs[0] *= 0.5
    return coeffs * np.exp(-1j * center * tau)


class Propagator:
    """Fixed-step ``exp(-i H tau)`` applier with cached coefficients."""

    def __init__(self, H: WalkHamiltonian, tau: float, tol: float):
        self.H = H
        lo, hi = H.spectral_bounds()
        self.center = 0.5 * (lo + hi)
        self.radius = max(0.5 * (hi - lo), 1e-12)
        self.tau = tau
        self.coeffs = chebyshev_coefficients(self.center, self.radius, tau, tol)
        dim = H.dim
        self._bufs = [np.empty(dim, dtype=complex) for _ in range(3)]

    def step(self, psi: np.ndarray, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty_like(psi)
        H = self.H
        t0, t1, t2 = self._bufs
        if H.graph is Graph.HYPERCUBE:
            return kernels.chebyshev_hypercube(psi, H.energies, H.n, H.gamma, self.center,
                                               self.radius, self.coeffs, out, t0, t1, t2)
        alpha, beta = 1.0 / self.radius, -self.center / self.radius
        t0[:] = psi
        H.affine(psi, alpha, beta, psi, 0.0, t1)
        out[:] = self.coeffs[0] * t0 + self.coeffs[1] * t1
        for c in self.coeffs[2:]:
            H.affine(t1, 2 * alpha, 2 * beta, t0, -1.0, t2)
            out += c * t2
            t0, t1, t2 = t1, t2, t0
        return out


def _prepare(H: WalkHamiltonian, psi0) -> np.ndarray:
    psi = np.array(psi0, dtype=complex)
    if psi.shape != (H.dim,):
        raise SpecError("initial state does not match the Hamiltonian dimension")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise SpecError("initial state must be normalised")
    return psi


def evolve(H: WalkHamiltonian, psi0, t_f: float, config: PropagationConfig | None = None) -> np.ndarray:
    """``exp(-i t_f H) psi0``."""
    config = config or PropagationConfig()
    psi = _prepare(H, psi0)
    if t_f == 0:
        return psi
    lo, hi = H.spectral_bounds()
    radius = max(0.5 * (hi - lo), 1e-12)
    chunks = max(1, math.ceil(abs(t_f) * radius / config.chunk_phase))
    prop = Propagator(H, t_f / chunks, config.tol)
    out = np.empty_like(psi)
    for _ in range(chunks):
        prop.step(psi, out)
        psi, out = out, psi
    return psi


def evolve_exact(H: WalkHamiltonian, psi0, t) -> np.ndarray:
    """Dense eigendecomposition reference propagation (small n only)."""
    check_full_space(H.n, MAX_DENSE_QUBITS)
    values, vectors = scipy.linalg.eigh(H.dense())
    coef = vectors.T @ np.asarray(psi0, dtype=complex)
    return vectors @ (np.exp(-1j * values * t) * coef)


def success_probability(psi, ground: int) -> float:
    psi = np.asarray(psi)
    if not 0 <= ground < psi.shape[0]:
        raise SpecError(f"ground index {ground} outside the state")
    return float(abs(psi[ground]) ** 2)


def sample_step(H: WalkHamiltonian, config: PropagationConfig) -> float:
    lo, hi = H.spectral_bounds()
    return config.theta_max / max(hi - lo, 1e-12)


def _ground(H: WalkHamiltonian, ground: int | None) -> int:
    return int(np.argmin(H.energies)) if ground is None else int(ground)


def window_average(H: WalkHamiltonian, psi0, t: float, delta_t: float,
                   config: PropagationConfig | None = None, ground: int | None = None) -> float:
    """Trapezoid estimate of ``(1/delta_t) int_t^{t+delta_t} P(s) ds``."""
    config = config or PropagationConfig()
    if delta_t < 0 or t < 0:
        raise SpecError("window start and length must be non-negative")
    g = _ground(H, ground)
    psi = evolve(H, psi0, t, config)
    if delta_t == 0:
        return success_probability(psi, g)
    steps = max(1, math.ceil(delta_t / sample_step(H, config)))
    prop = Propagator(H, delta_t / steps, config.tol)
    out = np.empty_like(psi)
    p_prev = abs(psi[g]) ** 2
    total = 0.0
    for _ in range(steps):
        prop.step(psi, out)
        psi, out = out, psi
        p = abs(psi[g]) ** 2
        total += 0.5 * (p_prev + p)
        p_prev = p
    return float(total / steps)


@dataclass
class Trace:
    times: np.ndarray
    success: np.ndarray
    driver_energy: np.ndarray
    problem_energy: np.ndarray
    norm_drift: np.ndarray

    @property
    def total_energy(self) -> np.ndarray:
        return self.driver_energy + self.problem_energy

    def running_problem_average(self) -> np.ndarray:
        """Trapezoid running mean of ``<H_P>`` over ``[0, t]`` (first entry = value at 0)."""
        e, t = self.problem_energy, self.times
        integral = np.concatenate(([0.0], np.cumsum(0.5 * (e[1:] + e[:-1]) * np.diff(t))))
        out = np.empty_like(e)
        out[0] = e[0]
        out[1:] = integral[1:] / t[1:]
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "P", "H_G_expect", "H_P_expect", "norm_drift"])
            for row in zip(self.times, self.success, self.driver_energy, self.problem_energy,
                           self.norm_drift):
                w.writerow([f"{x:.17g}" for x in row])


def energy_trace(H: WalkHamiltonian, psi0, t_f: float, config: PropagationConfig | None = None,
                 ground: int | None = None) -> Trace:
    """Sample ``P``, ``<H_G>``, ``<H_P>`` and the norm drift on ``[0, t_f]``."""
    config = config or PropagationConfig()
    if t_f < 0:
        raise SpecError("t_f must be non-negative")
    g = _ground(H, ground)
    psi = _prepare(H, psi0)
    steps = max(1, math.ceil(t_f / sample_step(H, config))) if t_f > 0 else 0
    tau = t_f / steps if steps else 0.0
    prop = Propagator(H, tau, config.tol) if steps else None
    out = np.empty_like(psi)
    work = np.empty_like(psi)
    rows = []

    def record(k):
        p = psi.real ** 2 + psi.imag ** 2
        hg = float(np.vdot(psi, H.apply_driver(psi, work)).real)
        rows.append((k * tau, p[g], hg, float(p @ H.energies), abs(math.sqrt(p.sum()) - 1.0)))

    record(0)
    for k in range(1, steps + 1):
        prop.step(psi, out)
        psi, out = out, psi
        if k % config.stride == 0 or k == steps:
            record(k)
    cols = np.array(rows).T
    return Trace(*cols)


# ---------------------------------------------------------------------------
# mixing time
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixingConfig:
    """Doubling-probe parameters.

    ``t0=None`` means one inverse energy unit of the problem.  ``patience``
    stops the probe sequence after that many consecutive non-violating
    probes; ``None`` evaluates every probe up to ``cap``.
    """

    epsilon: float = 0.05
    t0: float | None = None
    cap: int = 24
    patience: int | None = None

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise SpecError("epsilon must lie in (0, 1)")
        if self.t0 is not None and not self.t0 > 0:
            raise SpecError("t0 must be positive")
        if self.cap < 0 or (self.patience is not None and self.patience < 1):
            raise SpecError("cap must be >= 0 and patience >= 1")


@dataclass(frozen=True)
class MixingResult:
    tau: float
    bracket: tuple[float, float]
    probes: np.ndarray = field(repr=False)
    averages: np.ndarray = field(repr=False)
    violated: np.ndarray = field(repr=False)


def probe_mixing(average, config: MixingConfig, t0: float | None = None) -> MixingResult:
    """Largest ``t_k = t0 2^k`` with ``|P(0,t) - P(0,2t)| / P(0,t) > epsilon``.

    ``average(t)`` must return the window average over ``[0, t]`` and is
    called with non-decreasing arguments.
    """
    t0 = config.t0 if t0 is None else t0
    if t0 is None:
        t0 = 1.0
    times, avgs, flags = [], [], []
    prev = average(t0)
    tau, quiet = None, 0
    for k in range(config.cap + 1):
        t = t0 * 2.0 ** k
        nxt = average(2.0 * t)
        if prev <= 0:
            raise NumericalError("window average vanished; relative fluctuation undefined")
        bad = abs(prev - nxt) / prev > config.epsilon
        times.append(t)
        avgs.append(prev)
        flags.append(bad)
        if bad:
            tau, quiet = t, 0
        else:
            quiet += 1
            if config.patience is not None and quiet >= config.patience:
                break
        prev = nxt
    if flags[-1] and len(flags) == config.cap + 1:
        raise NumericalError(f"mixing condition still violated at the last probe t={times[-1]:g}")
    if tau is None:
        tau = t0
    return MixingResult(tau, (tau, 2.0 * tau), np.array(times), np.array(avgs), np.array(flags))


class _RunningAverage:
    """Cumulative trapezoid average of ``P`` along one forward propagation."""

    def __init__(self, H, psi0, step, config, ground):
        self.H, self.g = H, ground
        self.psi = _prepare(H, psi0)
        self.out = np.empty_like(self.psi)
        self.prop = Propagator(H, step, config.tol)
        self.step = step
        self.k = 0
        self.integral = 0.0
        self.p = abs(self.psi[ground]) ** 2

    def __call__(self, t: float) -> float:
        target = round(t / self.step)
        if target < self.k:
            raise SpecError("running average queried backwards in time")
        while self.k < target:
            self.prop.step(self.psi, self.out)
            self.psi, self.out = self.out, self.psi
            p = abs(self.psi[self.g]) ** 2
            self.integral += 0.5 * (self.p + p) * self.step
            self.p = p
            self.k += 1
        return self.integral / (self.k * self.step)


def mixing_time(H: WalkHamiltonian, psi0, mixing_config: MixingConfig | None = None,
                prop_config: PropagationConfig | None = None, t0: float = 1.0,
                ground: int | None = None) -> MixingResult:
    """Mixing time from one forward propagation.

    Probe times fall exactly on the sampling grid.  Cost grows like the
    largest probe reached, so set ``patience`` or a small ``cap``.
    """
    mixing_config = mixing_config or MixingConfig()
    prop_config = prop_config or PropagationConfig()
    t0 = mixing_config.t0 or t0
    per = max(1, math.ceil(t0 / sample_step(H, prop_config)))
    run = _RunningAverage(H, psi0, t0 / per, prop_config, _ground(H, ground))
    return probe_mixing(run, mixing_config, t0)


def uniform_start(H: WalkHamiltonian) -> np.ndarray:
    return normalize(np.ones(H.dim, dtype=complex))
