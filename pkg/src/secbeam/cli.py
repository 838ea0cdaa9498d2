"""Command-line harness.

    secbeam solve         --scenario s.scn --algorithm two_stage --out out/
    secbeam beampattern   --scenario s.scn --out out/
    secbeam sweep         --scenario s.scn --var n_antennas --values 4,8,12,16 \
                          --algorithms two_stage,mrt --trials 200 --out out/
    secbeam lemma1-check  --scenario s.scn --draws 100000 --out out/

Exit codes: 0 success, 1 solver failure, 2 input error.  All outputs are
deterministic given (scenario file, seed); SECBEAM_THREADS caps worker
processes for sweeps.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import experiments
from .channel import build_channels
from .metrics import fssr_objective, iod_sinrs
from .scenario import ScenarioError, lin_to_db, load_scenario
from .solver import SolverError

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _load(args):
    cfg, geom = load_scenario(args.scenario)
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, rng_seed=args.seed)
    return cfg, geom


def _convergence_rows(trace):
    return [(alg, it, f"{obj:.10g}", f"{res:.6g}") for alg, it, obj, res in trace]


def cmd_solve(args):
    cfg, geom = _load(args)
    os.makedirs(args.out, exist_ok=True)
    trace = []
    gamma_e = None if args.gamma_e_db is None else 10.0 ** (args.gamma_e_db / 10.0)
    sol = experiments.solve_scenario(cfg, geom, args.algorithm, gamma_e=gamma_e,
                                     fast=args.fast, trace=trace)
    channels = build_channels(cfg, geom)
    sinrs = iod_sinrs(sol, channels, cfg.noise_iod)
    gamma = sol.gamma_e if math.isfinite(sol.gamma_e) else None
    summary = {
        "algorithm": args.algorithm,
        "n_antennas": cfg.n_antennas,
        "n_iods": cfg.n_iods,
        "gamma_e": gamma,
        "gamma_e_db": None if (gamma is None or gamma <= 0) else lin_to_db(gamma),
        "fssr_bits": None if gamma is None else fssr_objective(sol, channels, gamma, cfg.noise_iod),
        "sum_common_rate_bits": sum(math.log2(1 + gc) for gc, _ in sinrs),
        "iod_sinr_common_db": [lin_to_db(gc) for gc, _ in sinrs],
        "iod_sinr_private_db": [lin_to_db(gp) for _, gp in sinrs],
        "per_antenna_power_w": sol.per_antenna_power().tolist(),
        "rank_one_gaps": sol.rank_gaps,
        "meta": {k: v for k, v in sol.meta.items()
                 if isinstance(v, (int, float, str, bool, list, tuple))},
    }
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, default=float)
    _write_csv(os.path.join(args.out, "convergence.csv"),
               ["algorithm", "iter", "objective", "residual"], _convergence_rows(trace))
    np.savez(
        os.path.join(args.out, "beamformers.npz"),
        w_common=sol.w_common,
        w_private=np.stack(sol.w_private) if sol.w_private else np.zeros(0),
        b_an=sol.b_an,
        v0=sol.v0,
        w_common_vec=sol.w_common_vec,
        w_private_vecs=np.stack(sol.w_private_vecs) if sol.w_private_vecs else np.zeros(0),
    )
    print(f"solved {args.scenario} with {args.algorithm}; outputs in {args.out}")
    return EXIT_OK


def cmd_beampattern(args):
    cfg, geom = _load(args)
    os.makedirs(args.out, exist_ok=True)
    sol = experiments.solve_scenario(cfg, geom, args.algorithm, fast=args.fast)
    rows = experiments.beampattern_rows(sol, cfg, step=args.step)
    header = ["theta_deg", "sinr_common_db"] + [
        f"sinr_private_k{k + 1}_db" for k in range(cfg.n_iods)
    ]
    _write_csv(os.path.join(args.out, "beampattern.csv"), header,
               [[f"{v:.6f}" for v in row] for row in rows])
    print(f"beampattern written to {os.path.join(args.out, 'beampattern.csv')}")
    return EXIT_OK


def cmd_sweep(args):
    cfg, geom = _load(args)
    os.makedirs(args.out, exist_ok=True)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if args.var == "n_antennas":
        values = [int(v) for v in values]
    if not values:
        raise ScenarioError("sweep needs a non-empty --values list")
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for alg in algorithms:
        if alg not in experiments.ALGORITHMS:
            raise ScenarioError(f"unknown algorithm {alg!r}")
    if args.sum_power:
        from dataclasses import replace

        cfg = replace(cfg, sum_power=True)
    rows, _ = experiments.run_sweep(
        cfg, args.var, values, algorithms, trials=args.trials,
        n_geom=args.geoms, seed=cfg.rng_seed, fast=not args.full,
    )
    out = os.path.join(args.out, "sweep.csv")
    _write_csv(out, ["sweep_var", "value", "algorithm", "ssr_mean", "ssr_se", "n_fail"],
               [(v, val, alg, f"{m:.8g}", f"{se:.8g}", nf) for v, val, alg, m, se, nf in rows])
    print(f"sweep written to {out}")
    return EXIT_OK


def cmd_lemma1(args):
    cfg, geom = _load(args)
    os.makedirs(args.out, exist_ok=True)
    sol = experiments.solve_scenario(cfg, geom, args.algorithm, fast=args.fast)
    channels = build_channels(cfg, geom)
    report = experiments.lemma1_check(sol, channels, cfg, draws=args.draws)
    with open(os.path.join(args.out, "lemma1.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
    worst = min(report["empirical_prob"])
    print(
        f"empirical Pr(all Eve SINRs <= cap) >= {worst:.5f} per stream "
        f"(kappa = {report['kappa']}, {report['draws']} draws); "
        f"3-sigma check {'PASS' if report['pass_3sigma'] else 'FAIL'}"
    )
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="secbeam", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, algorithm_default="two_stage"):
        sp.add_argument("--scenario", required=True, help="scenario file path")
        sp.add_argument("--algorithm", default=algorithm_default,
                        choices=list(experiments.ALGORITHMS))
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override scenario seed")
        sp.add_argument("--fast", action="store_true",
                        help="coarse cap search (sweep-grade quality)")

    sp = sub.add_parser("solve", help="solve one scenario and dump artifacts")
    common(sp)
    sp.add_argument("--gamma-e-db", type=float, default=None,
                    help="fixed Eve-SINR cap in dB (minimax algorithm)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("beampattern", help="angle sweep of received SINRs")
    common(sp)
    sp.add_argument("--step", type=float, default=0.5, help="azimuth step in degrees")
    sp.set_defaults(func=cmd_beampattern)

    sp = sub.add_parser("sweep", help="parameter sweep with Monte-Carlo SSR")
    common(sp)
    sp.add_argument("--var", required=True,
                    choices=["n_antennas", "total_power_dbm", "gamma_p_db"])
    sp.add_argument("--values", required=True, help="comma-separated sweep values")
    sp.add_argument("--algorithms", default="two_stage,mrt")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--geoms", type=int, default=3, help="geometry seeds per point")
    sp.add_argument("--sum-power", action="store_true",
                    help="replace per-antenna caps by one sum-power cap")
    sp.add_argument("--full", action="store_true", help="full-quality solves")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("lemma1-check", help="Monte-Carlo secrecy-probability check")
    common(sp)
    sp.add_argument("--draws", type=int, default=100000)
    sp.set_defaults(func=cmd_lemma1)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, RuntimeError, ValueError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
