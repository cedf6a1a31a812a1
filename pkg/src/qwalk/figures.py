"""Plot-data generators: one CSV (or a few) plus a sidecar JSON per figure tag.

Every generator takes a ``scale`` dict whose keys override the defaults
listed in :data:`DEFAULTS`; ensemble-backed figures keep their records under
``out/records`` so a rerun resumes instead of recomputing.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import dynamics
from .drivers import WalkHamiltonian, build_search_symmetric
from .errors import SpecError
from .gamma import (GridSpec, heuristic_gamma, scan_gamma, search_gamma_opt_hypercube)
from .harness import EnsembleSpec, fit_xy, fmt, run_ensemble
from .problems import generate, instance_seed
from .spectral import diagonalize_symmetric, p_infinity

TAGS = ("F2a", "F2b", "F3", "F4a", "F4b", "F5", "F6", "F8", "F9", "F10", "F11")

_ENSEMBLE = {"n_min": 5, "n_max": 9, "instances": 20, "seed": 1, "grid_points": 24,
             "grid_mode": "adaptive"}
DEFAULTS = {
    "F2a": {"n_values": [10, 20], "samples": 2000, "periods": 3.0},
    "F2b": {"n_min": 5, "n_max": 30},
    "F3": {"n": 9, "instances": 5, "seed": 1, "grid_points": 200, "grid_mode": "linear"},
    "F4a": dict(_ENSEMBLE),
    "F4b": dict(_ENSEMBLE),
    "F5": {"n": 9, "seed": 1, "tmax": 20.0, "samples": 2000},
    "F6": dict(_ENSEMBLE),
    "F8": {**_ENSEMBLE, "search_n_min": 20, "search_n_max": 30},
    "F9": {**_ENSEMBLE, "window": [12.5, 5.0]},
    "F10": {**_ENSEMBLE, "n_values": [7, 9]},
    "F11": {"n": 10, "seed": 1, "tmax": 4.0},
}


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) for x in r])


def _write_meta(path: Path, meta: dict) -> None:
    path.write_text(json.dumps(meta, indent=1, default=float), encoding="utf-8")


def _ensemble(out: Path, name: str, p: dict, **kw):
    n_values = p.get("n_values") or list(range(p["n_min"], p["n_max"] + 1))
    doc = {"n_values": n_values, "instances": p["instances"], "master_seed": p["seed"],
           "scan": {"points": p["grid_points"], "mode": p["grid_mode"]}, **kw}
    if doc.get("gamma_policy", "OPTIMAL_SCAN") != "OPTIMAL_SCAN":
        doc.pop("scan")
    spec = EnsembleSpec.from_dict(doc)
    return run_ensemble(spec, out / "records" / name, resume=True)


def _aggregate_rows(records: dict, column: str):
    rows = []
    for label, rec in records.items():
        for a in rec.aggregates():
            rows.append((label, a["n"], a[f"{column}_mean"], a[f"{column}_se"], a[f"{column}_count"]))
    return rows


def _fig_f2a(p, out):
    rows, peaks = [], {}
    for n in p["n_values"]:
        sp = diagonalize_symmetric(build_search_symmetric(n, search_gamma_opt_hypercube(n)))
        t = np.linspace(0, p["periods"] * math.pi / 2 * 2 ** (n / 2), p["samples"])
        prob = sp.probability(t)
        peaks[n] = float(t[int(np.argmax(prob))])
        rows += [(n, a, b) for a, b in zip(t, prob)]
    _write_rows(out / "F2a.csv", ["n", "t", "P"], rows)
    return {"peak_time": peaks, "reference": {n: math.pi / 2 * 2 ** (n / 2) for n in p["n_values"]}}


def _fig_f2b(p, out):
    rows = []
    for n in range(p["n_min"], p["n_max"] + 1):
        g = search_gamma_opt_hypercube(n)
        rows.append((n, g, p_infinity(diagonalize_symmetric(build_search_symmetric(n, g)))))
    _write_rows(out / "F2b.csv", ["n", "gamma_opt", "p_inf"], rows)
    vals = [r[2] for r in rows]
    return {"dip_n": rows[int(np.argmin(vals))][0], "p_inf_last": vals[-1]}


def _fig_f3(p, out):
    rows, meta = [], {"gamma_opt": {}, "fractional_width": {}, "gamma_heur_analytic": {}}
    grid = GridSpec(points=p["grid_points"], mode=p["grid_mode"])
    for model in ("SK", "REM"):
        meta["gamma_heur_analytic"][model] = heuristic_gamma(model, p["n"], "analytic")
        for i in range(p["instances"]):
            inst = generate(model, p["n"], instance_seed(p["seed"], p["n"], i))
            res = scan_gamma(inst, "hypercube", grid)
            rows += [(model, i, g, v) for g, v in zip(res.gammas, res.p_inf)]
            meta["gamma_opt"].setdefault(model, []).append(res.gamma_opt)
            meta["fractional_width"].setdefault(model, []).append(res.fractional_width)
    _write_rows(out / "F3.csv", ["model", "instance", "gamma", "p_inf"], rows)
    return meta


def _fig_f4(p, out, tag):
    recs = {m: _ensemble(out, f"{m.lower()}_opt", p, model=m, observables=["P_INF", "GAMMA_WIDTH"])
            for m in ("SK", "REM")}
    if tag == "F4a":
        rows = []
        for m, rec in recs.items():
            for a in rec.aggregates():
                n = a["n"]
                rows.append((m, n, a["gamma_mean"], a["gamma_se"], heuristic_gamma(m, n, "analytic")))
        _write_rows(out / "F4a.csv", ["model", "n", "gamma_opt_mean", "gamma_opt_se", "gamma_heur_analytic"],
                    rows)
        return {}
    rows = _aggregate_rows(recs, "fractional_width")
    _write_rows(out / "F4b.csv", ["model", "n", "mean", "se", "count"], rows)
    fits = {}
    for m, axes in (("SK", "loglog"), ("REM", "loglin")):
        sel = [r for r in rows if r[0] == m]
        fits[m] = fit_xy([r[1] for r in sel], [r[2] for r in sel], axes).as_dict()
    return {"fits": fits}


def _fig_f5(p, out):
    inst = generate("SK", p["n"], instance_seed(p["seed"], p["n"], 0))
    res = scan_gamma(inst, "hypercube", GridSpec(points=24, mode="adaptive"))
    t = np.linspace(0, p["tmax"] / inst.omega, p["samples"])
    prob = res.spectrum_opt.probability(t)
    _write_rows(out / "F5.csv", ["t", "P"], zip(t, prob))
    return {"gamma_opt": res.gamma_opt, "p_inf": res.p_opt, "seed": inst.seed}


def _fig_f6(p, out):
    recs = {}
    for m in ("SK", "REM"):
        recs[f"{m}_opt"] = _ensemble(out, f"{m.lower()}_opt", p, model=m, observables=["P_INF", "GAMMA_WIDTH"])
        recs[f"{m}_heur"] = _ensemble(out, f"{m.lower()}_heur", p, model=m,
                                      gamma_policy="HEURISTIC_MEASURED", observables=["P_INF"])
    rows = _aggregate_rows(recs, "p_inf")
    _write_rows(out / "F6.csv", ["series", "n", "mean", "se", "count"], rows)
    fits = {k: fit_xy([r[1] for r in rows if r[0] == k], [r[2] for r in rows if r[0] == k]).as_dict()
            for k in recs}
    return {"fits": fits}


def _fig_f8(p, out):
    rows = []
    for n in range(p["search_n_min"], p["search_n_max"] + 1):
        sp = diagonalize_symmetric(build_search_symmetric(n, search_gamma_opt_hypercube(n)))
        rows.append(("SEARCH", n, sp.mixing_time(dynamics.MixingConfig(), 1.0).tau, 0.0, 1))
    rec = _ensemble(out, "sk_opt_mixing", p, model="SK", observables=["P_INF", "MIXING_TIME"])
    rows += _aggregate_rows({"SK": rec}, "mixing_time_omega")
    _write_rows(out / "F8.csv", ["series", "n", "mean", "se", "count"], rows)
    search = [r for r in rows if r[0] == "SEARCH"]
    sk = [r for r in rows if r[0] == "SK"]
    return {"fits": {"SEARCH": fit_xy([r[1] for r in search], [r[2] for r in search]).as_dict(),
                     "SK": fit_xy([r[1] for r in sk], [r[2] for r in sk], "loglog").as_dict()}}


def _fig_f9(p, out):
    rec = _ensemble(out, "sk_heur_window", p, model="SK", gamma_policy="HEURISTIC_MEASURED",
                    observables=["P_INF", "WINDOW_AVG"], window=[*p["window"], "sqrt_n_over_omega"])
    rows = _aggregate_rows({"window": rec}, "window_avg") + _aggregate_rows({"p_inf": rec}, "p_inf")
    _write_rows(out / "F9.csv", ["series", "n", "mean", "se", "count"], rows)
    fits = {k: fit_xy([r[1] for r in rows if r[0] == k], [r[2] for r in rows if r[0] == k]).as_dict()
            for k in ("window", "p_inf")}
    return {"fits": fits}


def _fig_f10(p, out):
    variants = {"SK-hypercube": dict(model="SK"), "REMGC": dict(model="REMGC"),
                "REM": dict(model="REM"), "SSK": dict(model="SSK"),
                "SK-complete": dict(model="SK", graph="complete")}
    recs = {k: _ensemble(out, k.lower(), p, observables=["P_INF"], **kw) for k, kw in variants.items()}
    rows = _aggregate_rows(recs, "p_inf")
    _write_rows(out / "F10.csv", ["variant", "n", "mean", "se", "count"], rows)
    return {"groups": {"structured": ["SK-hypercube", "REMGC"], "unstructured": ["REM", "SSK", "SK-complete"]}}


def _fig_f11(p, out):
    inst = generate("SK", p["n"], instance_seed(p["seed"], p["n"], 0))
    res = scan_gamma(inst, "hypercube", GridSpec(points=24, mode="adaptive"))
    H = WalkHamiltonian.from_instance(inst, "hypercube", res.gamma_opt)
    tr = dynamics.energy_trace(H, dynamics.uniform_start(H), p["tmax"] / inst.omega,
                               dynamics.PropagationConfig(stride=10))
    tr.write_csv(out / "F11.csv")
    lo, hi = H.spectral_bounds()
    run = tr.running_problem_average()
    return {"gamma_opt": res.gamma_opt, "seed": inst.seed,
            "max_energy_drift": float(np.abs(tr.total_energy - tr.total_energy[0]).max()),
            "range": hi - lo, "max_norm_drift": float(tr.norm_drift.max()),
            "running_average_below_start": bool(np.all(run[1:] < tr.problem_energy[0])),
            "ground_energy": float(inst.energies.min()),
            "min_problem_energy": float(tr.problem_energy.min())}


def reproduce_figure(tag: str, scale: dict | None, out_dir) -> list[Path]:
    """Write ``<tag>.csv`` and ``<tag>.json`` into ``out_dir``; return their paths."""
    if tag not in TAGS:
        raise SpecError(f"unknown figure tag {tag!r}; expected one of {', '.join(TAGS)}")
    params = dict(DEFAULTS[tag])
    unknown = set(scale or {}) - set(params) - {"n_values"}
    if unknown:
        raise SpecError(f"unknown scale keys for {tag}: {sorted(unknown)}")
    params.update(scale or {})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if tag in ("F4a", "F4b"):
        meta = _fig_f4(params, out, tag)
    else:
        meta = globals()[f"_fig_{tag.lower()}"](params, out)
    meta = {"tag": tag, "scale": params, **meta}
    _write_meta(out / f"{tag}.json", meta)
    return [out / f"{tag}.csv", out / f"{tag}.json"]
