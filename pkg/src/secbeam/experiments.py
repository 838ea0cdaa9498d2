"""Experiment machinery: scenario solving by algorithm name, beampattern
sweeps, Monte-Carlo secrecy evaluation with reproducible per-trial seeds,
and parallel parameter sweeps."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import baselines
from .channel import build_channels, sample_eve_channels
from .metrics import ssr_of_draw
from .scenario import Geometry, SystemConfig, dbm_to_watts, db_to_lin
from .stage1 import run_algorithm1
from .stage2 import run_algorithm2
from .minimax import run_algorithm3

ALGORITHMS = ("two_stage", "minimax", "mrt", "noan_rs", "upper_bound")


def worker_count(n_tasks=None):
    env = os.environ.get("SECBEAM_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    cap = max(1, cap)
    if n_tasks is not None:
        cap = min(cap, n_tasks)
    return cap


def child_rng(master, *keys):
    """Deterministic independent stream keyed by integers."""
    mix = [int(master) & 0xFFFFFFFF] + [int(k) & 0xFFFFFFFF for k in keys]
    return np.random.default_rng(np.random.SeedSequence(mix))


def random_geometry(rng, k, r=1000.0, span=60.0, min_sep=8.0):
    """IoD placements with a minimum angular separation (rejection sampled)."""
    for _ in range(1000):
        angles = np.sort(rng.uniform(-span, span, size=k))
        if k == 1 or np.min(np.diff(angles)) >= min_sep:
            return Geometry(iod_polar=[(r, float(a)) for a in angles])
    raise RuntimeError("could not draw a separated geometry")


def solve_scenario(cfg: SystemConfig, geom: Geometry, algorithm="two_stage",
                   gamma_e=None, fast=False, trace=None):
    """Dispatch one solve; returns a BeamformingSolution."""
    channels = build_channels(cfg, geom)
    if algorithm == "two_stage":
        kwargs = dict(search_probes=5, refine=False, probe_eps=1e-3) if fast else {}
        return run_algorithm2(channels, cfg, trace=trace, **kwargs)
    if algorithm == "noan_rs":
        kwargs = dict(search_probes=5, refine=False, probe_eps=1e-3) if fast else {}
        return baselines.noan_rs_solution(channels, cfg, trace=trace, **kwargs)
    if algorithm == "minimax":
        ge = cfg.gamma_e_init if gamma_e is None else gamma_e
        sol, _ = run_algorithm3(channels, cfg, ge, trace=trace)
        return sol
    if algorithm == "mrt":
        return baselines.mrt_solution(channels, cfg)
    if algorithm == "upper_bound":
        value, sol = baselines.secrecy_upper_bound(channels, cfg)
        sol.meta["upper_bound_bits"] = value
        return sol
    raise ValueError(f"unknown algorithm {algorithm!r} (choose from {ALGORITHMS})")


def ssr_samples(sol, channels, cfg: SystemConfig, n_draws, seed, key=0):
    """Per-draw system secrecy sum-rates with reproducible draw seeds."""
    vals = np.empty(n_draws)
    for d in range(n_draws):
        rng = child_rng(seed, 0xE7E, key, d)
        eves = sample_eve_channels(rng, cfg.n_eves, cfg.n_antennas)
        vals[d] = ssr_of_draw(sol, channels, eves, cfg)
    return vals


def beampattern_rows(sol, cfg: SystemConfig, r_ref=1000.0, step=0.5, floor_db=-100.0):
    """Received common/private SINR (dB) versus azimuth for a probe receiver
    at the reference range."""
    from .channel import steering

    thetas = np.arange(-90.0, 90.0 + 1e-9, step)
    an = sol.an_covariance()
    covs = sol.all_covariances()
    rows = []
    for th in thetas:
        h = steering(float(th), r_ref, cfg)
        powers = [float(np.real(h.conj() @ (w @ h))) for w in covs]
        an_pow = float(np.real(h.conj() @ (an @ h)))
        tot_priv = sum(powers[1:])
        gamma_c = powers[0] / (tot_priv + an_pow + cfg.noise_iod)
        row = [float(th), _db(gamma_c, floor_db)]
        for k in range(1, len(powers)):
            gk = powers[k] / (tot_priv - powers[k] + an_pow + cfg.noise_iod)
            row.append(_db(gk, floor_db))
        rows.append(row)
    return rows


def _db(x, floor_db):
    if x <= 10.0 ** (floor_db / 10.0):
        return floor_db
    return 10.0 * math.log10(x)


def lemma1_check(sol, channels, cfg: SystemConfig, draws=100000, seed=None):
    """Empirical eavesdropping-probability guarantee: fraction of Rayleigh
    draws where every private stream's worst-Eve SINR stays below the cap."""
    seed = cfg.rng_seed if seed is None else seed
    rng = child_rng(seed, 0x1E44A1)
    q, k = cfg.n_eves, cfg.n_iods
    h = sample_eve_channels(rng, draws * q, cfg.n_antennas)
    covs = sol.all_covariances()
    an = sol.an_covariance()
    powers = np.stack(
        [np.einsum("ij,jk,ik->i", h.conj(), w, h).real for w in covs + [an]], axis=1
    )  # columns: common, private 1..K, AN
    total = powers.sum(axis=1) + cfg.noise_eve
    hits = np.zeros(k, dtype=int)
    for kk in range(k):
        num = powers[:, kk + 1]
        sinr = (num / (total - num)).reshape(draws, q)
        hits[kk] = int(np.sum(sinr.max(axis=1) <= sol.gamma_e))
    prob = hits / draws
    se = np.sqrt(np.maximum(prob * (1.0 - prob), 1e-12) / draws)
    return {
        "draws": draws,
        "gamma_e": sol.gamma_e,
        "empirical_prob": prob.tolist(),
        "binomial_se": se.tolist(),
        "kappa": cfg.secrecy_prob,
        "pass_3sigma": bool(np.all(prob >= cfg.secrecy_prob - 3.0 * se)),
    }


# ---------------------------------------------------------------------------
# sweeps


def apply_sweep_value(cfg: SystemConfig, var, value):
    if var == "n_antennas":
        n = int(value)
        return replace(cfg, n_antennas=n, per_antenna_power=[cfg.total_power() / n] * n)
    if var == "total_power_dbm":
        p = dbm_to_watts(float(value))
        n = cfg.n_antennas
        return replace(cfg, per_antenna_power=[p / n] * n)
    if var == "gamma_p_db":
        return replace(cfg, sinr_targets=[db_to_lin(float(value))] * cfg.n_iods)
    raise ValueError(f"unknown sweep variable {var!r}")


def _sweep_task(args):
    (cfg, var, value, algorithm, geom_idx, seed, draws, fast) = args
    try:
        cfg_pt = apply_sweep_value(cfg, var, value)
        geom = random_geometry(child_rng(seed, 0x6E0, geom_idx), cfg_pt.n_iods)
        sol = solve_scenario(cfg_pt, geom, algorithm, fast=fast)
        channels = build_channels(cfg_pt, geom)
        vals = ssr_samples(sol, channels, cfg_pt, draws, seed, key=geom_idx)
        return (var, value, algorithm, geom_idx, vals, None)
    except Exception as exc:  # recorded, sweep continues
        return (var, value, algorithm, geom_idx, None, f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: SystemConfig, var, values, algorithms, trials=200, n_geom=3,
              seed=None, fast=True, workers=None, progress=None):
    """Runs `algorithms` over the sweep grid; each point is averaged over
    `n_geom` geometry seeds x (trials / n_geom) paired Eve draws.  Returns
    (rows, samples): CSV-ready aggregated rows and the raw per-point sample
    pools keyed by (value, algorithm)."""
    seed = cfg.rng_seed if seed is None else seed
    draws = max(1, trials // n_geom)
    tasks = [
        (cfg, var, value, alg, gi, seed, draws, fast)
        for value in values
        for alg in algorithms
        for gi in range(n_geom)
    ]
    results = []
    nw = worker_count(len(tasks)) if workers is None else workers
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            for res in pool.map(_sweep_task, tasks):
                results.append(res)
                if progress:
                    progress(res)
    else:
        for t in tasks:
            res = _sweep_task(t)
            results.append(res)
            if progress:
                progress(res)

    rows = []
    samples = {}
    for value in values:
        for alg in algorithms:
            pool_vals = []
            fails = 0
            for (v2, val2, alg2, gi, vals, err) in results:
                if val2 == value and alg2 == alg:
                    if err is None:
                        pool_vals.append(vals)
                    else:
                        fails += 1
            if pool_vals:
                allv = np.concatenate(pool_vals)
                mean = float(np.mean(allv))
                se = float(np.std(allv, ddof=1) / math.sqrt(len(allv))) if len(allv) > 1 else 0.0
            else:
                mean, se = float("nan"), float("nan")
            rows.append((var, value, alg, mean, se, fails))
            samples[(value, alg)] = np.concatenate(pool_vals) if pool_vals else np.array([])
    return rows, samples
