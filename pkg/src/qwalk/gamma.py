"""Hopping-rate selection.

* closed-form optima for the search problem,
* brute-force ``P_inf`` scans with peak and full-width-at-half-maximum,
* the energy-balance heuristic, from analytic or measured energy spreads.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .drivers import DriverSpec, Graph, WalkHamiltonian
from .errors import SpecError
from .problems import Model, generate, instance_seed, spectrum_stats
from .spectral import Spectrum, diagonalize, p_infinity

GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def search_gamma_opt_hypercube(n: int) -> float:
    """``gamma`` with ``2 gamma = (1/N) sum_{r=1}^n C(n, r) / r``."""
    if n < 1:
        raise SpecError("n must be >= 1")
    total = sum(math.comb(n, r) / r for r in range(1, n + 1))
    return 0.5 * total / 2.0 ** n


def search_gamma_opt_complete(n: int) -> float:
    if n < 1:
        raise SpecError("n must be >= 1")
    return 2.0 ** -n


def driver_scale(n: int, graph) -> float:
    """Driver eigenvalue spread per unit hopping rate."""
    return 2.0 * n if Graph.parse(graph) is Graph.HYPERCUBE else float(1 << n)


def gamma_from_spread(spread: float, n: int, graph=Graph.HYPERCUBE) -> float:
    """Rate at which the driver spread equals the problem spread."""
    if not spread > 0:
        raise SpecError("energy spread must be positive")
    return float(spread) / driver_scale(n, graph)


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Hopping-rate grid around a centre rate ``c`` on ``[c/factor, c*factor]``.

    ``mode="linear"``: ``points`` log-spaced rates plus ``refine_points``
    linearly spaced ones spanning ``refine_cells`` cells either side of the
    coarse argmax.

    ``mode="adaptive"``: ``points`` log-spaced rates, golden-section search
    for the maximum inside the two cells around the coarse argmax, then
    bisection of both half-maximum crossings down to ``rtol`` times the
    current width estimate.

    ``center=None`` uses the instance's own energy spread divided by the
    driver spread per unit rate.
    """

    points: int = 200
    factor: float = 20.0
    refine_points: int = 100
    refine_cells: int = 2
    mode: str = "linear"
    center: float | None = None
    rtol: float = 0.02
    max_iter: int = 40

    def __post_init__(self):
        if self.points < 3 or self.factor <= 1:
            raise SpecError("grid needs >= 3 points and factor > 1")
        if self.mode not in ("linear", "adaptive"):
            raise SpecError(f"unknown grid mode {self.mode!r}")
        if self.center is not None and not self.center > 0:
            raise SpecError("grid centre must be positive")


@dataclass
class GammaScanResult:
    gammas: np.ndarray
    p_inf: np.ndarray
    gamma_opt: float
    p_opt: float
    width: float
    fractional_width: float
    width_defined: bool
    grid: dict = field(default_factory=dict)
    spectrum_opt: Spectrum | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {
            "gamma_opt": self.gamma_opt,
            "p_opt": self.p_opt,
            "width": self.width if self.width_defined else None,
            "fractional_width": self.fractional_width if self.width_defined else None,
            "width_defined": self.width_defined,
            "evaluations": int(self.gammas.shape[0]),
            "grid": self.grid,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "p_inf"])
            for g, p in zip(self.gammas, self.p_inf):
                w.writerow([f"{g:.17g}", f"{p:.17g}"])

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=1)


def half_max_width(gammas, values, i_opt: int | None = None) -> tuple[float, bool]:
    """Width of the connected region around the maximum where ``values >= max/2``.

    Crossings are linearly interpolated between neighbouring samples.
    Returns ``(width, defined)``; the width is undefined (``nan``) when the
    region reaches an end of the grid.
    """
    g = np.asarray(gammas, dtype=float)
    p = np.asarray(values, dtype=float)
    if i_opt is None:
        i_opt = int(np.argmax(p))
    half = 0.5 * p[i_opt]
    lo = i_opt
    while lo > 0 and p[lo - 1] >= half:
        lo -= 1
    hi = i_opt
    while hi < len(p) - 1 and p[hi + 1] >= half:
        hi += 1
    if lo == 0 or hi == len(p) - 1 or half <= 0:
        return float("nan"), False

    def cross(a, b):
        return g[a] + (half - p[a]) * (g[b] - g[a]) / (p[b] - p[a])

    return float(cross(hi, hi + 1) - cross(lo - 1, lo)), True


class _Evaluator:
    def __init__(self, inst, graph):
        self.energies = inst.energies
        self.n = inst.n
        self.graph = Graph.parse(graph)
        self.ground = int(np.argmin(self.energies))
        self.cache: dict[float, float] = {}
        self.best: tuple[float, Spectrum] | None = None

    def __call__(self, gamma: float) -> float:
        gamma = float(gamma)
        if gamma not in self.cache:
            H = WalkHamiltonian(DriverSpec(self.graph, gamma), self.energies, self.n)
            spec = diagonalize(H, self.ground)
            p = self.cache[gamma] = p_infinity(spec)
            if self.best is None or p > self.best[0]:
                self.best = (p, spec)
        return self.cache[gamma]

    def arrays(self):
        g = np.array(sorted(self.cache))
        return g, np.array([self.cache[x] for x in g])


def _golden_max(f, a: float, b: float, xtol: float, max_iter: int) -> None:
    """Golden-section search for a maximum of ``f(exp(x))`` on ``[a, b]`` (log space)."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(math.exp(c)), f(math.exp(d))
    for _ in range(max_iter):
        if b - a < xtol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(math.exp(d))


def _bisect_crossing(f, above: float, below: float, half: float, xtol: float, max_iter: int) -> None:
    for _ in range(max_iter):
        if abs(below - above) < xtol:
            break
        mid = 0.5 * (above + below)
        if f(math.exp(mid)) >= half:
            above = mid
        else:
            below = mid


def scan_gamma(inst, graph=Graph.HYPERCUBE, grid: GridSpec | None = None) -> GammaScanResult:
    """Brute-force ``P_inf`` scan; see :class:`GridSpec` for the two grid modes."""
    grid = grid or GridSpec()
    graph = Graph.parse(graph)
    center = grid.center or gamma_from_spread(inst.spread(), inst.n, graph)
    f = _Evaluator(inst, graph)
    coarse = np.geomspace(center / grid.factor, center * grid.factor, grid.points)
    vals = np.array([f(g) for g in coarse])
    i = int(np.argmax(vals))
    lo_i, hi_i = max(i - grid.refine_cells, 0), min(i + grid.refine_cells, grid.points - 1)
    if grid.mode == "linear":
        for g in np.linspace(coarse[lo_i], coarse[hi_i], grid.refine_points):
            f(g)
    else:
        cell = math.log(coarse[1] / coarse[0])
        width, ok = half_max_width(np.log(coarse), vals, i)
        _golden_max(f, math.log(coarse[max(i - 1, 0)]), math.log(coarse[min(i + 1, grid.points - 1)]),
                    grid.rtol * min(width if ok else cell, cell), grid.max_iter)
        for _ in range(2):
            gs, ps = f.arrays()
            j = int(np.argmax(ps))
            half = 0.5 * ps[j]
            width, ok = half_max_width(np.log(gs), ps, j)
            xtol = grid.rtol * (width if ok else cell)
            left = j
            while left > 0 and ps[left - 1] >= half:
                left -= 1
            right = j
            while right < len(ps) - 1 and ps[right + 1] >= half:
                right += 1
            if left > 0:
                _bisect_crossing(f, math.log(gs[left]), math.log(gs[left - 1]), half, xtol, grid.max_iter)
            if right < len(ps) - 1:
                _bisect_crossing(f, math.log(gs[right]), math.log(gs[right + 1]), half, xtol,
                                 grid.max_iter)
    gammas, p = f.arrays()
    j = int(np.argmax(p))
    width, ok = half_max_width(gammas, p, j)
    meta = {"mode": grid.mode, "center": center, "factor": grid.factor, "points": grid.points,
            "refine_points": grid.refine_points, "refine_cells": grid.refine_cells,
            "rtol": grid.rtol, "graph": graph.value}
    return GammaScanResult(gammas, p, float(gammas[j]), float(p[j]), width,
                           width / gammas[j] if ok else float("nan"), ok, meta, f.best[1])


# ---------------------------------------------------------------------------
# heuristic rate
# ---------------------------------------------------------------------------


def measure_energy_spread(model, n: int, omega: float | None, n_instances: int, seed: int,
                          return_stderr: bool = False):
    """Mean ``max - min`` of the energy table over a seeded ensemble."""
    if n > 20:
        from .errors import CapacityError

        raise CapacityError("spread measurement enumerates 2^n energies; n <= 20")
    if n_instances < 1:
        raise SpecError("empty ensemble")
    spreads = np.array([generate(model, n, instance_seed(seed, n, i), omega).spread()
                        for i in range(n_instances)])
    mean = float(spreads.mean())
    if return_stderr:
        se = float(spreads.std(ddof=1) / math.sqrt(n_instances)) if n_instances > 1 else float("nan")
        return mean, se
    return mean


def heuristic_gamma(model, n: int, source: str = "analytic", omega: float | None = None,
                    graph=Graph.HYPERCUBE, spreads=None, n_instances: int = 1000,
                    seed: int = 0) -> float:
    """Energy-balance rate ``<E_max - E_min> / (driver spread per unit rate)``.

    ``source="analytic"`` uses the normal-tail estimate; ``source="measured"``
    uses ``spreads`` when given, otherwise a fresh seeded ensemble.
    """
    model = Model.parse(model)
    if omega is None:
        from .problems import DEFAULT_OMEGA

        omega = DEFAULT_OMEGA[model.value]
    source = str(source).lower()
    if source == "analytic":
        spread = spectrum_stats(model, n, omega)[1]
    elif source == "measured":
        if spreads is not None:
            spreads = np.asarray(spreads, dtype=float)
            if spreads.size == 0:
                raise SpecError("empty ensemble for the measured spread")
            spread = float(spreads.mean())
        else:
            spread = measure_energy_spread(model, n, omega, n_instances, seed)
    else:
        raise SpecError(f"unknown spread source {source!r}")
    return gamma_from_spread(spread, n, graph)
