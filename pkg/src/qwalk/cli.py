"""Command-line interface (``qwalk <subcommand> ...``).

Exit codes: 0 success, 2 capacity error, 3 invalid specification,
4 numerical failure.  Times are in the same units as inverse energies of the
instance (energies already include ``omega``).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics, figures, gamma, harness, problems, spectral
from .drivers import WalkHamiltonian
from .errors import NumericalError, QWalkError, SpecError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(SpecError.exit_code, f"{self.prog}: error: {message}\n")


def _emit(doc) -> None:
    print(json.dumps(doc, indent=1, default=float))


def _hamiltonian(args) -> tuple[problems.ProblemInstance, WalkHamiltonian]:
    inst = problems.load(args.instance)
    return inst, WalkHamiltonian.from_instance(inst, args.graph, args.gamma)


def cmd_generate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(args.count):
        inst = problems.generate(args.model, args.n, problems.instance_seed(args.seed, args.n, i),
                                 args.omega)
        path = out / f"{inst.model.value.lower()}_n{args.n}_{i:05d}.json"
        problems.save(inst, path)
        paths.append(str(path))
    _emit({"written": paths})


def cmd_pinf(args):
    inst, H = _hamiltonian(args)
    spec = spectral.diagonalize(H)
    if args.dump_spectrum:
        spectral.write_spectrum_csv(spec, args.dump_spectrum)
    _emit({"gamma": args.gamma, "graph": args.graph, "p_inf": spectral.p_infinity(spec)})


def cmd_gamma_scan(args):
    inst = problems.load(args.instance)
    grid = gamma.GridSpec(points=args.grid_points, mode=args.mode, refine_points=args.refine_points,
                          factor=args.factor)
    res = gamma.scan_gamma(inst, args.graph, grid)
    res.write_csv(args.out)
    res.write_summary(Path(str(args.out) + ".summary.json"))
    _emit(res.summary())


def _ensemble_spreads(directory: Path, model, n) -> list[float]:
    if (directory / "spec.json").exists():
        rec = harness.load_record(directory)
        return [problems.generate(rec.spec.model, int(r["n"]), int(r["seed"]), rec.spec.omega).spread()
                for r in rec.rows if int(r["n"]) == n]
    spreads = []
    for path in sorted(directory.glob(f"*_n{n}_*.json")):
        inst = problems.load(path)
        if inst.n == n and inst.model is model:
            spreads.append(inst.spread())
    return spreads


def cmd_heuristic_gamma(args):
    model = problems.Model.parse(args.model)
    spreads = None
    if args.source == "measured" and args.ensemble:
        spreads = _ensemble_spreads(Path(args.ensemble), model, args.n)
    g = gamma.heuristic_gamma(model, args.n, args.source, args.omega, args.graph, spreads=spreads,
                              n_instances=args.instances, seed=args.seed)
    _emit({"model": model.value, "n": args.n, "source": args.source, "gamma_heur": g})


def cmd_dynamics(args):
    inst, H = _hamiltonian(args)
    cfg = dynamics.PropagationConfig(theta_max=args.theta_max, stride=args.stride)
    tr = dynamics.energy_trace(H, dynamics.uniform_start(H), args.tmax, cfg)
    if args.dump_trace:
        tr.write_csv(args.dump_trace)
    lo, hi = H.spectral_bounds()
    drift = float(np.abs(tr.total_energy - tr.total_energy[0]).max())
    if drift > 1e-8 * (hi - lo) or tr.norm_drift.max() > 1e-10:
        raise NumericalError(f"propagation drift too large (energy {drift:g})")
    _emit({"samples": int(tr.times.shape[0]), "final_P": float(tr.success[-1]),
           "mean_P": float(np.mean(tr.success)), "max_energy_drift": drift,
           "max_norm_drift": float(tr.norm_drift.max())})


def cmd_mixing(args):
    inst, H = _hamiltonian(args)
    cfg = dynamics.MixingConfig(epsilon=args.epsilon, cap=args.cap, patience=args.patience)
    t0 = 1.0 / inst.omega
    if args.route == "spectral":
        res = spectral.diagonalize(H).mixing_time(cfg, t0)
    else:
        res = dynamics.mixing_time(H, dynamics.uniform_start(H), cfg, t0=t0)
    _emit({"tau_mix": res.tau, "bracket": list(res.bracket), "tau_mix_omega": res.tau * inst.omega,
           "probes": len(res.probes)})


def cmd_ensemble(args):
    spec = harness.EnsembleSpec.load(args.spec)
    if args.workers:
        spec = harness.EnsembleSpec.from_dict({**spec.to_dict(), "workers": args.workers})
    rec = harness.run_ensemble(spec, args.out, resume=args.resume)
    _emit({"rows": len(rec.rows), "out": str(args.out)})


def cmd_fit(args):
    rec = harness.load_record(args.record)
    _emit(harness.fit_scaling(rec, args.observable, args.axes).as_dict())


def cmd_figure(args):
    scale = {}
    if args.scale:
        try:
            scale = json.loads(Path(args.scale).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read scale file: {exc}") from exc
    _emit({"written": [str(p) for p in figures.reproduce_figure(args.tag, scale, args.out)]})


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qwalk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def walk_args(sp):
        sp.add_argument("--instance", required=True)
        sp.add_argument("--graph", choices=["hypercube", "complete"], default="hypercube")
        sp.add_argument("--gamma", type=float, required=True)

    sp = sub.add_parser("generate", help="write seeded instance archives")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--omega", type=float, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("pinf", help="infinite-time success probability")
    walk_args(sp)
    sp.add_argument("--dump-spectrum", default=None)
    sp.set_defaults(func=cmd_pinf)

    sp = sub.add_parser("gamma-scan", help="P_inf against hopping rate")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--graph", choices=["hypercube", "complete"], default="hypercube")
    sp.add_argument("--grid-points", type=int, default=200)
    sp.add_argument("--refine-points", type=int, default=100)
    sp.add_argument("--factor", type=float, default=20.0)
    sp.add_argument("--mode", choices=["linear", "adaptive"], default="linear")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_gamma_scan)

    sp = sub.add_parser("heuristic-gamma", help="energy-balance hopping rate")
    sp.add_argument("--model", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--omega", type=float, default=None)
    sp.add_argument("--source", choices=["measured", "analytic"], default="analytic")
    sp.add_argument("--ensemble", default=None)
    sp.add_argument("--graph", choices=["hypercube", "complete"], default="hypercube")
    sp.add_argument("--instances", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_heuristic_gamma)

    sp = sub.add_parser("dynamics", help="propagate and record an energy trace")
    walk_args(sp)
    sp.add_argument("--tmax", type=float, required=True)
    sp.add_argument("--dump-trace", default=None)
    sp.add_argument("--theta-max", type=float, default=0.1)
    sp.add_argument("--stride", type=int, default=1)
    sp.set_defaults(func=cmd_dynamics)

    sp = sub.add_parser("mixing", help="doubling-probe mixing time")
    walk_args(sp)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--cap", type=int, default=24)
    sp.add_argument("--patience", type=int, default=None)
    sp.add_argument("--route", choices=["spectral", "propagate"], default="spectral")
    sp.set_defaults(func=cmd_mixing)

    sp = sub.add_parser("ensemble", help="run or resume an ensemble")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--resume", action="store_true")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("fit", help="scaling fit of an ensemble record")
    sp.add_argument("--record", required=True)
    sp.add_argument("--observable", required=True)
    sp.add_argument("--axes", choices=["loglin", "loglog"], default="loglin")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("figure", help="plot data for one figure tag")
    sp.add_argument("--tag", required=True, choices=list(figures.TAGS))
    sp.add_argument("--scale", default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_figure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except QWalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
