import csv
import json
import math

import numpy as np
import pytest

from qwalk import cli, problems as P
from qwalk.drivers import WalkHamiltonian
from qwalk.errors import CapacityError, SpecError
from qwalk.figures import reproduce_figure
from qwalk.gamma import GridSpec, scan_gamma
from qwalk.harness import (EnsembleSpec, fit_scaling, fit_xy, fmt, load_record, run_ensemble,
                           run_instance)
from qwalk.spectral import diagonalize, p_infinity


def strip(rows):
    return [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]


def small_spec(**kw):
    doc = {"model": "SK", "n_values": [4, 5], "instances": 3, "master_seed": 9,
           "scan": {"points": 12, "mode": "adaptive"}, "observables": ["P_INF", "GAMMA_WIDTH"]}
    doc.update(kw)
    return EnsembleSpec.from_dict(doc)


def test_fmt_round_trips_floats():
    for x in (0.1, 1 / 3, 1e-300, 2.0 ** 60 + 1.5, -7.25):
        assert float(fmt(x)) == x
    assert fmt(True) == "1" and fmt(np.int64(4)) == "4"


def test_fixed_row_matches_direct_call():
    spec = small_spec(gamma_policy="FIXED", gamma_value=0.7, observables=["P_INF", "WINDOW_AVG"],
                      window=[1.0, 2.0, "none"])
    row = run_instance(spec, 5, 2, 0.7)
    inst = P.generate("SK", 5, P.instance_seed(9, 5, 2))
    sp = diagonalize(WalkHamiltonian.from_instance(inst, "hypercube", 0.7))
    assert row["seed"] == inst.seed
    assert row["p_inf"] == p_infinity(sp)
    assert row["window_avg"] == sp.window_average(1.0, 2.0)


def test_scan_row_matches_scan():
    spec = small_spec()
    row = run_instance(spec, 5, 0, None)
    res = scan_gamma(P.generate("SK", 5, row["seed"]), "hypercube", GridSpec(points=12, mode="adaptive"))
    assert row["gamma"] == res.gamma_opt and row["p_inf"] == res.p_opt
    assert row["fractional_width"] == res.fractional_width or not res.width_defined


def test_window_scaling():
    spec = small_spec(observables=["WINDOW_AVG"], window=[12.5, 5.0, "sqrt_n_over_omega"])
    t, dt = spec.window_for(9)
    assert (t, dt) == pytest.approx((12.5 * 3 / 5, 5.0 * 3 / 5))


def test_spec_validation():
    with pytest.raises(SpecError):
        small_spec(gamma_policy="GUESS")
    with pytest.raises(SpecError):
        small_spec(gamma_policy="FIXED")
    with pytest.raises(SpecError):
        small_spec(observables=["WINDOW_AVG"])
    with pytest.raises(SpecError):
        small_spec(gamma_policy="HEURISTIC_MEASURED", observables=["GAMMA_WIDTH"])
    with pytest.raises(SpecError):
        small_spec(colour="blue")
    with pytest.raises(CapacityError):
        small_spec(n_values=[20])
    spec = EnsembleSpec.from_dict({"model": "rem", "n_range": [3, 6], "instances": 1})
    assert spec.n_values == (3, 4, 5, 6) and spec.omega == 1.0


def test_run_and_replay(tmp_path):
    spec = small_spec()
    rec = run_ensemble(spec, tmp_path / "a")
    again = run_ensemble(spec, tmp_path / "b")
    assert strip(rec.rows) == strip(again.rows)
    assert strip(load_record(tmp_path / "a").rows) == strip(rec.rows)
    header = (tmp_path / "a" / "rows.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.split(",") == spec.columns()


def test_resume_after_interruption(tmp_path):
    spec = small_spec()
    full = run_ensemble(spec, tmp_path / "full")
    d = tmp_path / "cut"
    run_ensemble(spec, d)
    lines = (d / "rows.csv").read_text(encoding="utf-8").splitlines()
    (d / "rows.csv").write_text("\n".join(lines[:3]) + "\n", encoding="utf-8")
    seen = []
    resumed = run_ensemble(spec, d, resume=True, progress=seen.append)
    assert len(seen) == len(full.rows) - 2
    assert strip(resumed.rows) == strip(full.rows)


def test_resume_rejects_changed_spec(tmp_path):
    run_ensemble(small_spec(), tmp_path)
    with pytest.raises(SpecError):
        run_ensemble(small_spec(master_seed=10), tmp_path, resume=True)


def test_parallel_matches_serial(tmp_path):
    a = run_ensemble(small_spec(), tmp_path / "s")
    b = run_ensemble(small_spec(workers=2), tmp_path / "p")
    assert strip(a.rows) == strip(b.rows)


def test_aggregates(tmp_path):
    rec = run_ensemble(small_spec(), tmp_path)
    for a in rec.aggregates():
        v = rec.values("p_inf", a["n"])
        assert a["count"] == 3
        assert a["p_inf_mean"] == pytest.approx(v.mean())
        assert a["p_inf_se"] == pytest.approx(v.std(ddof=1) / math.sqrt(3))
    with open(tmp_path / "aggregates.csv", encoding="utf-8") as fh:
        assert len(list(csv.DictReader(fh))) == 2
    sub = rec.subset(2)
    assert len(sub.rows) == 4 and sub.spec.instances == 2


def test_heuristic_policy_uses_ensemble_mean_spread():
    spec = small_spec(gamma_policy="HEURISTIC_MEASURED", observables=["P_INF"])
    rec = run_ensemble(spec)
    for n in spec.n_values:
        spreads = [P.generate("SK", n, P.instance_seed(9, n, i)).spread() for i in range(3)]
        assert np.allclose(rec.values("gamma", n), np.mean(spreads) / (2 * n), rtol=1e-15, atol=0)


def test_fit_recovers_synthetic_exponent():
    ns = np.arange(5, 12)
    fit = fit_xy(ns, 2.0 ** (-0.4 * ns + 1.0))
    assert fit.slope == pytest.approx(-0.4) and fit.intercept == pytest.approx(1.0)
    assert fit.slope_stderr < 1e-6
    fit = fit_xy(ns, 3.0 * ns ** 2.5, "loglog")
    assert fit.slope == pytest.approx(2.5)
    with pytest.raises(SpecError):
        fit_xy([1, 2], [1, 1])


def test_fit_scaling_on_record(tmp_path):
    spec = small_spec(n_values=[3, 4, 5, 6], instances=2)
    rec = run_ensemble(spec, tmp_path)
    fit = fit_scaling(rec, "P_INF")
    assert fit.slope < 0
    with pytest.raises(SpecError):
        fit_scaling(rec, "MIXING_TIME")


@pytest.mark.parametrize("tag", ["F2a", "F2b"])
def test_search_figures(tag, tmp_path):
    scale = {"n_values": [6, 8], "samples": 400} if tag == "F2a" else {"n_max": 12}
    csv_path, meta_path = reproduce_figure(tag, scale, tmp_path)
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    assert csv_path.exists()
    if tag == "F2a":
        for n, t in meta["peak_time"].items():
            assert t == pytest.approx(meta["reference"][n], rel=0.2)
    else:
        assert 5 <= meta["dip_n"] <= 9


def test_small_figures(tmp_path):
    reproduce_figure("F5", {"n": 5, "samples": 50}, tmp_path)
    meta = json.loads(reproduce_figure("F11", {"n": 6, "tmax": 2.0}, tmp_path)[1].read_text("utf-8"))
    assert meta["max_energy_drift"] <= 1e-8 * meta["range"]
    assert meta["min_problem_energy"] >= meta["ground_energy"] - 1e-10
    reproduce_figure("F3", {"n": 5, "instances": 1, "grid_points": 20}, tmp_path)
    small = {"n_values": [3, 4, 5], "instances": 2, "grid_points": 10}
    meta = json.loads(reproduce_figure("F10", small, tmp_path)[1].read_text("utf-8"))
    rows = list(csv.DictReader(open(tmp_path / "F10.csv", encoding="utf-8")))
    assert {r["variant"] for r in rows} == set(meta["groups"]["structured"] + meta["groups"]["unstructured"])
    with pytest.raises(SpecError):
        reproduce_figure("F5", {"bogus": 1}, tmp_path)
    with pytest.raises(SpecError):
        reproduce_figure("F99", None, tmp_path)


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def test_cli_round_trip(tmp_path, capsys):
    assert run_cli("generate", "--model", "SK", "--n", 5, "--count", 2, "--seed", 3, "--out", tmp_path) == 0
    inst = tmp_path / "sk_n5_00000.json"
    assert P.load(inst).seed == P.instance_seed(3, 5, 0)
    capsys.readouterr()
    assert run_cli("pinf", "--instance", inst, "--gamma", 0.5, "--dump-spectrum", tmp_path / "sp.csv") == 0
    p = json.loads(capsys.readouterr().out)["p_inf"]
    ref = p_infinity(diagonalize(WalkHamiltonian.from_instance(P.load(inst), "hypercube", 0.5)))
    assert p == ref
    assert run_cli("gamma-scan", "--instance", inst, "--grid-points", 10, "--refine-points", 5,
                   "--out", tmp_path / "scan.csv") == 0
    assert (tmp_path / "scan.csv.summary.json").exists()
    assert run_cli("dynamics", "--instance", inst, "--gamma", 0.5, "--tmax", 1.0,
                   "--dump-trace", tmp_path / "tr.csv") == 0
    assert run_cli("mixing", "--instance", inst, "--gamma", 0.5, "--patience", 3) == 0
    assert run_cli("heuristic-gamma", "--model", "SK", "--n", 5, "--source", "measured",
                   "--ensemble", tmp_path) == 0
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(small_spec(n_values=[3, 4, 5]).to_dict()), encoding="utf-8")
    assert run_cli("ensemble", "--spec", spec, "--out", tmp_path / "rec") == 0
    assert run_cli("fit", "--record", tmp_path / "rec", "--observable", "P_INF") == 0


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli("generate", "--model", "SK", "--n", 30, "--out", tmp_path) == 0
    assert run_cli("pinf", "--instance", tmp_path / "sk_n30_00000.json", "--gamma", 1.0) == 2
    assert run_cli("generate", "--model", "XY", "--n", 5, "--out", tmp_path) == 3
    with pytest.raises(SystemExit) as exc:
        run_cli("pinf", "--gamma", 1.0)
    assert exc.value.code == 3
    assert run_cli("ensemble", "--spec", tmp_path / "missing.json", "--out", tmp_path) == 3
    run_cli("generate", "--model", "REM", "--n", 4, "--out", tmp_path)
    assert run_cli("mixing", "--instance", tmp_path / "rem_n4_00000.json", "--gamma", 1e-9,
                   "--cap", 2, "--epsilon", 1e-9) == 4
