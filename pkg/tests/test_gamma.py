import math

import numpy as np
import pytest

from qwalk import problems as P
from qwalk.errors import SpecError
from qwalk.gamma import (GridSpec, gamma_from_spread, half_max_width, heuristic_gamma,
                         measure_energy_spread, scan_gamma, search_gamma_opt_complete,
                         search_gamma_opt_hypercube)


def test_search_gamma_values():
    assert search_gamma_opt_hypercube(1) == 0.25
    assert search_gamma_opt_hypercube(2) == 0.3125
    assert search_gamma_opt_complete(1) == 0.5
    assert search_gamma_opt_complete(10) == 1 / 1024
    two_gamma = 2 * search_gamma_opt_hypercube(30)
    assert two_gamma == pytest.approx(2 / 30, rel=0.1)
    with pytest.raises(SpecError):
        search_gamma_opt_hypercube(0)


def test_half_max_width_connected_region():
    g = np.arange(11.0)
    p = np.array([0, 0.6, 0, 0, 0.4, 0.8, 1.0, 0.8, 0.2, 0, 0])
    width, ok = half_max_width(g, p)
    # crossings at 3.5 + ... : left between 3 (0) and 4 (0.4) is not >= 0.5,
    # so the region is [5, 7] with crossings at 4.25 and 7.5
    assert ok and width == pytest.approx(7.5 - 4.25)
    assert half_max_width(g, np.ones(11))[1] is False


def test_scan_search_matches_formula():
    n = 10
    inst = P.generate("SEARCH", n, 0, marked=321)
    res = scan_gamma(inst, "hypercube", GridSpec(points=24, mode="adaptive"))
    assert res.gamma_opt == pytest.approx(search_gamma_opt_hypercube(n), rel=0.05)


def test_scan_default_grid_structure():
    inst = P.generate("SK", 5, 4)
    res = scan_gamma(inst, "hypercube")
    assert res.gammas.shape[0] >= 200
    assert np.all(np.diff(res.gammas) > 0)
    assert res.p_opt == res.p_inf.max() and res.gamma_opt in res.gammas
    c = inst.spread() / 10
    assert res.gammas[0] == pytest.approx(c / 20) and res.gammas[-1] == pytest.approx(20 * c)
    assert res.width_defined and res.width > 0
    assert res.fractional_width == pytest.approx(res.width / res.gamma_opt)


def test_adaptive_agrees_with_linear():
    for model in ("SK", "REM"):
        inst = P.generate(model, 7, 11)
        a = scan_gamma(inst, "hypercube", GridSpec(points=24, mode="adaptive"))
        b = scan_gamma(inst, "hypercube")
        assert a.gamma_opt == pytest.approx(b.gamma_opt, rel=0.02)
        assert a.p_opt == pytest.approx(b.p_opt, rel=1e-3)
        assert a.fractional_width == pytest.approx(b.fractional_width, rel=0.03)


def test_scan_scale_covariance():
    base = P.generate("SK", 6, 2)
    c = 3.7
    scaled = base.with_table(base.energies * c)
    grid = GridSpec(points=40, refine_points=20)
    a, b = scan_gamma(base, "hypercube", grid), scan_gamma(scaled, "hypercube", grid)
    assert b.gamma_opt == pytest.approx(c * a.gamma_opt, rel=1e-9)
    assert np.allclose(a.p_inf, b.p_inf, atol=1e-9)
    assert b.fractional_width == pytest.approx(a.fractional_width, rel=1e-6)


def test_scan_outputs(tmp_path):
    res = scan_gamma(P.generate("REM", 5, 1), "complete", GridSpec(points=30, refine_points=10))
    res.write_csv(tmp_path / "s.csv")
    res.write_summary(tmp_path / "s.json")
    assert (tmp_path / "s.csv").read_text(encoding="utf-8").startswith("gamma,p_inf\n")
    import json

    doc = json.loads((tmp_path / "s.json").read_text(encoding="utf-8"))
    assert {"gamma_opt", "width", "fractional_width", "grid"} <= set(doc)


def test_heuristic_identities():
    n, omega = 7, 2.5
    assert gamma_from_spread(2 * n * omega, n) == pytest.approx(omega)
    assert heuristic_gamma("REM", 10, "analytic", 1.0) == pytest.approx(
        -2 ** 1.5 * math.erf(0) - 2 ** 1.5 * __import__("scipy").special.erfinv(1 / 1024 - 1) / 20)
    assert heuristic_gamma("SK", n, "measured", spreads=[2 * n * omega]) == pytest.approx(omega)
    with pytest.raises(SpecError):
        heuristic_gamma("SK", n, "measured", spreads=[])
    with pytest.raises(SpecError):
        heuristic_gamma("SK", n, "guess")


def test_rem_analytic_against_monte_carlo():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((10_000, 1024))
    mc = (x.max(axis=1) - x.min(axis=1)).mean() / 20
    # the normal-tail estimate overshoots the exact mean range by about 2%
    assert heuristic_gamma("REM", 10, "analytic", 1.0) == pytest.approx(mc, rel=0.03)


def test_measured_heuristic_deterministic():
    a = heuristic_gamma("SK", 6, "measured", n_instances=50, seed=3)
    b = heuristic_gamma("SK", 6, "measured", n_instances=50, seed=3)
    assert a == b


def test_measure_spread_search_and_rem():
    assert measure_energy_spread("SEARCH", 6, None, 10, 1) == 1.0
    mean, se = measure_energy_spread("REM", 10, 1.0, 100, 7, return_stderr=True)
    assert abs(mean - P.spectrum_stats("REM", 10, 1.0)[1]) < 3 * se


def test_grid_validation():
    with pytest.raises(SpecError):
        GridSpec(points=2)
    with pytest.raises(SpecError):
        GridSpec(mode="random")


def _record(records_dir, name):
    import os

    from qwalk.harness import load_record

    path = os.path.join(records_dir, name)
    if not os.path.exists(os.path.join(path, "rows.csv")):
        pytest.fail(f"record {name} missing; run acceptance/run_records.py")
    return load_record(path)


@pytest.mark.slow
def test_rem_peaks_higher_and_narrower_than_sk(records_dir):
    sk, rem = _record(records_dir, "sk_opt"), _record(records_dir, "rem_opt")
    assert np.median(rem.values("p_inf", 11)) > 5 * np.median(sk.values("p_inf", 11))
    fw_sk, fw_rem = sk.values("fractional_width", 11), rem.values("fractional_width", 11)
    assert 0.1 <= np.nanmedian(fw_sk) <= 1.0
    assert np.nanmedian(fw_rem) < 0.3 * np.nanmedian(fw_sk)


@pytest.mark.slow
def test_sk_heuristic_in_centre_of_optimal_rates(records_dir):
    g_opt = _record(records_dir, "sk_opt").values("gamma", 11)
    g_heur = heuristic_gamma("SK", 11, "measured", n_instances=1000, seed=5)
    lo, hi = np.quantile(g_opt, [0.25, 0.75])
    assert lo <= g_heur <= hi
