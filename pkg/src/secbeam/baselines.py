"""Reference schemes: maximum-ratio transmission, the no-AN rate-splitting
variant, and the Eve-free secrecy upper bound."""

from __future__ import annotations

import math

import numpy as np

from .channel import ChannelSet
from .metrics import BeamformingSolution, system_ssr
from .scenario import SystemConfig
from .stage1 import run_algorithm1
from .stage2 import run_algorithm2


def _mrt_with_split(channels: ChannelSet, cfg: SystemConfig, split):
    """MRT design for one common/private power split.

    Private beams are matched filters; the common beam is the dominant left
    singular vector of the stacked IoD matrix; total power is scaled until
    the most loaded antenna meets its cap with equality."""
    n, k = cfg.n_antennas, cfg.n_iods
    u, _, _ = np.linalg.svd(channels.h_tot)
    w_c = u[:, 0]
    privates = [h / np.linalg.norm(h) for h in channels.iod_channels]
    # unscaled per-antenna load for split weights
    p_priv = (1.0 - split) / max(k, 1)
    load = split * np.abs(w_c) ** 2 + p_priv * sum(np.abs(w) ** 2 for w in privates)
    caps = np.asarray(cfg.per_antenna_power, dtype=float)
    with np.errstate(divide="ignore"):
        alpha = float(np.min(np.where(load > 0, caps / np.maximum(load, 1e-300), np.inf)))
    if not np.isfinite(alpha):
        alpha = 0.0
    w_common = alpha * split * np.outer(w_c, w_c.conj())
    w_private = [alpha * p_priv * np.outer(w, w.conj()) for w in privates]
    sol = BeamformingSolution(
        w_common=w_common,
        w_private=w_private,
        b_an=np.zeros((n - k, n - k), dtype=complex),
        v0=channels.v0,
        gamma_e=float("inf"),
        meta={"solver": "mrt", "power_split": split},
    )
    return sol.finalize()


def mrt_solution(channels: ChannelSet, cfg: SystemConfig, trials=64, seed=None,
                 splits=21):
    """MRT baseline: the common/private power split is swept on a grid and
    the split with the best average system secrecy sum-rate is kept."""
    best = None
    seed = cfg.rng_seed if seed is None else seed
    for split in np.linspace(0.0, 1.0, splits):
        sol = _mrt_with_split(channels, cfg, float(split))
        val = system_ssr(sol, channels, cfg, trials, seed=seed)
        if best is None or val > best[0]:
            best = (val, sol)
    return best[1]


def noan_rs_solution(channels: ChannelSet, cfg: SystemConfig, **kwargs):
    """Rate-splitting design without artificial noise (B frozen at zero)."""
    return run_algorithm2(channels, cfg, an=False, **kwargs)


def secrecy_upper_bound(channels: ChannelSet, cfg: SystemConfig):
    """Eve-free bound: the maximum sum common rate with the secrecy LMIs
    dropped (private SINR targets and power limits kept).  A budget too small
    to meet the targets bounds the rate by zero."""
    from secbeam.solver import InfeasibleError

    n, k = cfg.n_antennas, cfg.n_iods
    try:
        sol, state = run_algorithm1(channels, cfg, gamma_e=math.inf, objective="upper")
        return state.objective_history[-1], sol
    except (InfeasibleError, ValueError):
        zero = BeamformingSolution(
            w_common=np.zeros((n, n), dtype=complex),
            w_private=[np.zeros((n, n), dtype=complex) for _ in range(k)],
            b_an=np.zeros((n - k, n - k), dtype=complex),
            v0=channels.v0,
            gamma_e=float("inf"),
            meta={"solver": "upper_bound", "infeasible": True},
        )
        return 0.0, zero.finalize()
