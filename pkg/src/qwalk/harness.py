"""Ensemble runs, their on-disk records, and scaling fits.

A record directory holds

``spec.json``        the ensemble specification,
``rows.csv``         one row per instance, appended as instances finish (this
                     file doubles as the checkpoint),
``aggregates.csv``   per-``n`` mean and standard error of every observable.

Rows are committed in ``(n, index)`` order whatever the worker count, so an
interrupted run resumed with the same spec ends with the same file.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import dynamics
from .core import MAX_DENSE_QUBITS
from .drivers import Graph, WalkHamiltonian
from .errors import CapacityError, NumericalError, SpecError
from .gamma import GridSpec, gamma_from_spread, scan_gamma
from .problems import DEFAULT_OMEGA, Model, generate, instance_seed, spectrum_stats
from .spectral import diagonalize, p_infinity

POLICIES = ("OPTIMAL_SCAN", "HEURISTIC_MEASURED", "HEURISTIC_ANALYTIC", "FIXED")
OBSERVABLES = ("P_INF", "WINDOW_AVG", "MIXING_TIME", "GAMMA_WIDTH", "ENERGY_TRACE")
WINDOW_SCALES = ("none", "sqrt_n_over_omega")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


@dataclass(frozen=True)
class EnsembleSpec:
    """What to run.  ``window`` is ``(t, delta_t, scale)``; with
    ``scale="sqrt_n_over_omega"`` both times are multiplied by ``sqrt(n)/omega``."""

    model: str
    n_values: tuple
    instances: int
    master_seed: int = 0
    omega: float | None = None
    gamma_policy: str = "OPTIMAL_SCAN"
    gamma_value: float | None = None
    graph: str = "hypercube"
    observables: tuple = ("P_INF",)
    window: tuple | None = None
    trace_tmax: float = 10.0
    scan: dict = field(default_factory=dict)
    mixing: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        fix = object.__setattr__
        fix(self, "model", Model.parse(self.model).value)
        fix(self, "graph", Graph.parse(self.graph).value)
        fix(self, "n_values", tuple(int(n) for n in self.n_values))
        fix(self, "observables", tuple(str(o).upper() for o in self.observables))
        fix(self, "gamma_policy", str(self.gamma_policy).upper())
        if self.omega is None:
            fix(self, "omega", DEFAULT_OMEGA[self.model])
        if self.instances < 1 or not self.n_values:
            raise SpecError("an ensemble needs at least one instance and one n")
        if self.gamma_policy not in POLICIES:
            raise SpecError(f"unknown gamma policy {self.gamma_policy!r}")
        if self.gamma_policy == "FIXED" and not (self.gamma_value or 0) > 0:
            raise SpecError("FIXED policy needs a positive gamma_value")
        if self.gamma_policy == "HEURISTIC_ANALYTIC" and self.model not in ("SK", "REM"):
            raise SpecError("analytic spread estimate exists for SK and REM only")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise SpecError(f"unknown observables {sorted(bad)}")
        if "GAMMA_WIDTH" in self.observables and self.gamma_policy != "OPTIMAL_SCAN":
            raise SpecError("GAMMA_WIDTH needs the OPTIMAL_SCAN policy")
        if "WINDOW_AVG" in self.observables:
            if self.window is None or len(self.window) != 3 or self.window[2] not in WINDOW_SCALES:
                raise SpecError("WINDOW_AVG needs window = [t, delta_t, scale]")
            fix(self, "window", tuple(self.window))
        cap = MAX_DENSE_QUBITS
        if max(self.n_values) > cap or min(self.n_values) < 2:
            raise CapacityError(f"ensemble n must lie in [2, {cap}]")
        GridSpec(**self.scan)
        dynamics.MixingConfig(**self.mixing)

    @classmethod
    def from_dict(cls, doc: dict) -> "EnsembleSpec":
        doc = dict(doc)
        if "n_range" in doc:
            lo, hi = doc.pop("n_range")
            doc["n_values"] = list(range(int(lo), int(hi) + 1))
        try:
            return cls(**doc)
        except TypeError as exc:
            raise SpecError(f"bad ensemble spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "EnsembleSpec":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read ensemble spec {path}: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_values"] = list(self.n_values)
        d["observables"] = list(self.observables)
        d["window"] = list(self.window) if self.window else None
        return d

    def columns(self) -> list[str]:
        cols = ["model", "graph", "n", "index", "seed", "gamma"]
        obs = self.observables
        if "P_INF" in obs:
            cols.append("p_inf")
        if "GAMMA_WIDTH" in obs:
            cols += ["width", "fractional_width", "width_defined"]
        if "WINDOW_AVG" in obs:
            cols.append("window_avg")
        if "MIXING_TIME" in obs:
            cols += ["mixing_time", "mixing_time_omega"]
        if "ENERGY_TRACE" in obs:
            cols += ["trace_min_hp", "trace_max_energy_drift"]
        return cols + ["error", "wall_time"]

    def value_columns(self) -> list[str]:
        skip = {"model", "graph", "n", "index", "seed", "error", "wall_time", "width_defined"}
        return [c for c in self.columns() if c not in skip]

    def window_for(self, n: int) -> tuple[float, float]:
        t, dt, scale = self.window
        k = math.sqrt(n) / self.omega if scale == "sqrt_n_over_omega" else 1.0
        return float(t) * k, float(dt) * k


def _scan_grid(spec: EnsembleSpec) -> GridSpec:
    return GridSpec(**spec.scan)


def ensemble_gammas(spec: EnsembleSpec) -> dict[int, float | None]:
    """Per-``n`` hopping rate for the non-scanning policies."""
    out = {}
    for n in spec.n_values:
        if spec.gamma_policy == "FIXED":
            out[n] = float(spec.gamma_value)
        elif spec.gamma_policy == "HEURISTIC_ANALYTIC":
            out[n] = gamma_from_spread(spectrum_stats(spec.model, n, spec.omega)[1], n, spec.graph)
        elif spec.gamma_policy == "HEURISTIC_MEASURED":
            spreads = [generate(spec.model, n, instance_seed(spec.master_seed, n, i), spec.omega).spread()
                       for i in range(spec.instances)]
            out[n] = gamma_from_spread(float(np.mean(spreads)), n, spec.graph)
        else:
            out[n] = None
    return out


def run_instance(spec: EnsembleSpec, n: int, index: int, gamma: float | None,
                 trace_dir: str | None = None) -> dict:
    """Every requested observable for one instance, as a row dict."""
    start = time.perf_counter()
    seed = instance_seed(spec.master_seed, n, index)
    inst = generate(spec.model, n, seed, spec.omega)
    row = {"model": spec.model, "graph": spec.graph, "n": n, "index": index, "seed": seed}
    obs = spec.observables
    errors = []
    spectrum = None
    if gamma is None:
        res = scan_gamma(inst, spec.graph, _scan_grid(spec))
        gamma, spectrum = res.gamma_opt, res.spectrum_opt
        if "GAMMA_WIDTH" in obs:
            row.update(width=res.width, fractional_width=res.fractional_width,
                       width_defined=res.width_defined)
    row["gamma"] = gamma
    H = WalkHamiltonian.from_instance(inst, spec.graph, gamma)
    if spectrum is None and {"P_INF", "WINDOW_AVG", "MIXING_TIME"} & set(obs):
        spectrum = diagonalize(H)
    if "P_INF" in obs:
        row["p_inf"] = p_infinity(spectrum)
    if "WINDOW_AVG" in obs:
        row["window_avg"] = spectrum.window_average(*spec.window_for(n))
    if "MIXING_TIME" in obs:
        try:
            m = spectrum.mixing_time(dynamics.MixingConfig(**spec.mixing), 1.0 / spec.omega)
            row["mixing_time"] = m.tau
        except NumericalError as exc:
            row["mixing_time"] = float("nan")
            errors.append(f"mixing: {exc}")
        row["mixing_time_omega"] = row["mixing_time"] * spec.omega
    if "ENERGY_TRACE" in obs:
        tr = dynamics.energy_trace(H, dynamics.uniform_start(H), spec.trace_tmax / spec.omega)
        row["trace_min_hp"] = float(tr.problem_energy.min())
        row["trace_max_energy_drift"] = float(np.abs(tr.total_energy - tr.total_energy[0]).max())
        if trace_dir is not None:
            tr.write_csv(Path(trace_dir) / f"trace_n{n}_i{index}.csv")
    row["error"] = "; ".join(errors)
    row["wall_time"] = time.perf_counter() - start
    return row


def _job(args):
    return run_instance(*args)


@dataclass
class EnsembleRecord:
    spec: EnsembleSpec
    rows: list[dict]

    def values(self, column: str, n: int | None = None) -> np.ndarray:
        return np.array([float(r[column]) for r in self.rows
                         if n is None or int(r["n"]) == n], dtype=float)

    def aggregates(self) -> list[dict]:
        out = []
        for n in self.spec.n_values:
            entry = {"n": n, "count": sum(int(r["n"]) == n for r in self.rows)}
            for col in self.spec.value_columns():
                v = self.values(col, n)
                v = v[np.isfinite(v)]
                entry[f"{col}_mean"] = float(v.mean()) if v.size else float("nan")
                entry[f"{col}_se"] = (float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1
                                      else float("nan"))
                entry[f"{col}_count"] = int(v.size)
            out.append(entry)
        return out

    def mean(self, column: str, n: int) -> float:
        for a in self.aggregates():
            if a["n"] == n:
                return a[f"{column}_mean"]
        raise SpecError(f"no rows at n={n}")

    def subset(self, count: int) -> "EnsembleRecord":
        """First ``count`` instances of every ``n`` (a prefix of the same ensemble)."""
        rows = [r for r in self.rows if int(r["index"]) < count]
        spec = EnsembleSpec.from_dict({**self.spec.to_dict(), "instances": min(count, self.spec.instances)})
        return EnsembleRecord(spec, rows)


def _read_rows(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])


def load_record(directory) -> EnsembleRecord:
    d = Path(directory)
    if not (d / "spec.json").exists():
        raise SpecError(f"{d} is not an ensemble record")
    spec = EnsembleSpec.load(d / "spec.json")
    return EnsembleRecord(spec, _read_rows(d / "rows.csv"))


def run_ensemble(spec: EnsembleSpec, out_dir=None, resume: bool = False,
                 progress=None) -> EnsembleRecord:
    """Run (or continue) an ensemble; rows are checkpointed to ``out_dir``."""
    jobs = [(n, i) for n in spec.n_values for i in range(spec.instances)]
    rows: dict[tuple[int, int], dict] = {}
    writer = None
    trace_dir = None
    if out_dir is not None:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        spec_path, rows_path = d / "spec.json", d / "rows.csv"
        if resume and spec_path.exists():
            old = EnsembleSpec.load(spec_path)
            if old.to_dict() | {"workers": 0} != spec.to_dict() | {"workers": 0}:
                raise SpecError("resume requested with a different ensemble spec")
            for r in _read_rows(rows_path):
                rows[(int(r["n"]), int(r["index"]))] = r
        elif rows_path.exists() and not resume:
            rows_path.unlink()
        spec_path.write_text(json.dumps(spec.to_dict(), indent=1), encoding="utf-8")
        if "ENERGY_TRACE" in spec.observables:
            trace_dir = d / "traces"
            trace_dir.mkdir(exist_ok=True)
        # rewrite committed rows in canonical order, then append
        done = [rows[k] for k in jobs if k in rows]
        _write_csv(rows_path, spec.columns(), done)
        writer = open(rows_path, "a", newline="", encoding="utf-8")
    gammas = ensemble_gammas(spec)
    todo = [k for k in jobs if k not in rows]
    args = [(spec, n, i, gammas[n], str(trace_dir) if trace_dir else None) for n, i in todo]
    try:
        if spec.workers > 1:
            with ProcessPoolExecutor(spec.workers) as pool:
                results = pool.map(_job, args)
                _commit(results, rows, writer, spec, progress)
        else:
            _commit(map(_job, args), rows, writer, spec, progress)
    finally:
        if writer is not None:
            writer.close()
    record = EnsembleRecord(spec, [_normalise(rows[k]) for k in jobs])
    if out_dir is not None:
        _write_csv(Path(out_dir) / "rows.csv", spec.columns(), record.rows)
        aggs = record.aggregates()
        _write_csv(Path(out_dir) / "aggregates.csv", list(aggs[0]), aggs)
    return record


def _commit(results, rows, writer, spec, progress):
    cols = spec.columns()
    cw = csv.writer(writer) if writer is not None else None
    for r in results:
        rows[(r["n"], r["index"])] = r
        if cw is not None:
            cw.writerow([fmt(r.get(c, "")) for c in cols])
            writer.flush()
        if progress is not None:
            progress(r)


def _normalise(row: dict) -> dict:
    """Round-trip a fresh row through its CSV text form so resumed and
    uninterrupted records hold identical values."""
    return {k: fmt(v) if not isinstance(v, str) else v for k, v in row.items()}


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    slope: float
    slope_stderr: float
    intercept: float
    intercept_stderr: float
    axes: str
    residual_rms: float
    x: tuple
    y: tuple

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def fit_xy(ns, means, axes: str = "loglin") -> FitResult:
    """Unweighted least squares of ``log2(means)`` against ``n`` or ``log2(n)``."""
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    if axes not in ("loglin", "loglog"):
        raise SpecError(f"axes must be loglin or loglog, got {axes!r}")
    ok = np.isfinite(means) & (means > 0)
    if ok.sum() < 3:
        raise SpecError("a scaling fit needs at least three positive points")
    x = ns[ok] if axes == "loglin" else np.log2(ns[ok])
    y = np.log2(means[ok])
    lr = stats.linregress(x, y)
    resid = y - (lr.intercept + lr.slope * x)
    return FitResult(float(lr.slope), float(lr.stderr), float(lr.intercept),
                     float(lr.intercept_stderr), axes, float(np.sqrt(np.mean(resid ** 2))),
                     tuple(x.tolist()), tuple(y.tolist()))


def fit_scaling(record: EnsembleRecord, observable: str, axes: str = "loglin") -> FitResult:
    col = observable.lower()
    if col not in record.spec.value_columns():
        raise SpecError(f"record has no observable {observable!r}")
    aggs = record.aggregates()
    return fit_xy([a["n"] for a in aggs], [a[f"{col}_mean"] for a in aggs], axes)
