"""MM/SCA design loop with a fixed Eve-SINR cap.

The non-concave private-interference terms of the focused secrecy sum-rate
are minorized by affine surrogates; each iteration alternates a closed-form
multiplier update with a convex subproblem (log-affine objective over the
secrecy LMIs, power rows, SINR rows and PSD cones) solved by the dense
barrier solver.  All subproblem data is normalized: covariances in units of
total power, channels scaled so the noise floor is one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .hermitian import hvec
from .metrics import BeamformingSolution
from .scenario import SystemConfig
from .secrecy_stats import compute_xi
from .solver import (
    InfeasibleError,
    LMISpec,
    SDPProblem,
    SolverError,
    find_interior,
    kkt_residual,
    solve_barrier,
)

LN2 = math.log(2.0)


def surrogate_value(chi, zeta):
    """Affine-in-zeta lower bound of -log2(zeta): -chi*zeta/ln2 + log2(chi) + 1/ln2."""
    if chi <= 0 or zeta <= 0:
        raise ValueError("surrogate requires positive chi and zeta")
    return -chi * zeta / LN2 + math.log2(chi) + 1.0 / LN2


def update_chi(w_private, channels: ChannelSet, sigma_u2):
    """Closed-form multiplier update: chi_k = 1 / (sum_i h_k^H W_i h_k + sigma^2),
    the maximizer of the surrogate at the current iterate."""
    chi = []
    for h in channels.iod_channels:
        zeta = sigma_u2 + sum(float(np.real(h.conj() @ (w @ h)))
                              for w in w_private)
        chi.append(1.0 / zeta)
    return np.array(chi)


def initial_iterate(cfg: SystemConfig, an=True):
    """Identity initialization, scaled so the streams share the power budget."""
    n, k = cfg.n_antennas, cfg.n_iods
    shares = k + 1 + (1 if an else 0)
    p_tot = cfg.total_power()
    w = [np.eye(n, dtype=complex) * (p_tot / (shares * n)) for _ in range(k + 1)]
    if an:
        b = np.eye(n - k, dtype=complex) * (p_tot / (shares * (n - k)))
    else:
        b = np.zeros((n - k, n - k), dtype=complex)
    return w[0], w[1:], b


@dataclass
class ConvexSubproblem:
    """One Eq.-21-class subproblem in normalized units plus its block map."""

    sdp: SDPProblem
    scale: float  # total power (watts) used for normalization
    n: int
    k: int
    an: bool
    chi_hat: np.ndarray | None = None  # normalized multipliers
    x_interior: np.ndarray | None = None  # strict-feasibility certificate
    g: list = field(default_factory=list)  # normalized channels
    v0: np.ndarray | None = None


def _g_outer(g):
    return np.outer(g, g.conj())


def build_subproblem(
    channels: ChannelSet,
    cfg: SystemConfig,
    gamma_e,
    chi=None,
    an=True,
    objective="rs",
    secrecy=True,
):
    """Assemble the normalized SDP for one MM iteration.

    objective: "rs"    log terms over all streams plus the surrogate linear part
               "p7"    log terms over the common covariance only, with the
                       interference-cap rows (used by the mini-max cross check)
               "upper" Eve-free variant of "rs" (no LMIs regardless of secrecy)
    """
    n, k = cfg.n_antennas, cfg.n_iods
    p_tot = cfg.total_power()
    if p_tot <= 0:
        raise ValueError("zero power budget; nothing to optimize")
    sigma = cfg.noise_iod
    gs = [h * math.sqrt(p_tot / sigma) for h in channels.iod_channels]
    v0 = channels.v0

    dims = [n] * (k + 1) + ([n - k] if an else [])
    prob_dims = dims
    bB = k + 1 if an else None

    lmis = []
    if secrecy and objective != "upper" and np.isfinite(gamma_e):
        xi_hat = compute_xi(cfg.secrecy_prob, cfg.n_eves, gamma_e, cfg.noise_eve, n) / p_tot
        for kk in range(k):
            terms = []
            for i in range(k + 1):  # block 0 = common, 1..K = private
                if i == kk + 1:
                    terms.append((i, 1.0, None))
                else:
                    terms.append((i, -gamma_e, None))
            if an:
                terms.append((bB, -gamma_e, v0))
            lmis.append(LMISpec(xi=xi_hat, m=n, terms=terms))

    prob = SDPProblem(prob_dims, lmis=lmis)

    # power rows
    rows = []
    if cfg.sum_power:
        a = np.zeros(prob.n)
        for i in range(k + 1):
            a[prob.block_slice(i)] = hvec(np.eye(n))
        if an:
            a[prob.block_slice(bB)] = hvec(np.eye(n - k))
        rows.append((a, 1.0))
    else:
        for ant in range(n):
            a = np.zeros(prob.n)
            e = np.zeros((n, n))
            e[ant, ant] = 1.0
            he = hvec(e)
            for i in range(k + 1):
                a[prob.block_slice(i)] = he
            if an:
                u = v0.conj().T[:, ant]
                a[prob.block_slice(bB)] = hvec(np.outer(u, u.conj()))
            rows.append((a, cfg.per_antenna_power[ant] / p_tot))

    # private-SINR rows (as <= rows)
    for kk in range(k):
        g = gs[kk]
        gg = hvec(_g_outer(g))
        target = cfg.sinr_targets[kk]
        a = np.zeros(prob.n)
        a[prob.block_slice(kk + 1)] = -gg
        for i in range(k):
            if i != kk:
                a[prob.block_slice(i + 1)] = target * gg
        if an:
            u = v0.conj().T @ g
            a[prob.block_slice(bB)] = target * hvec(np.outer(u, u.conj()))
        rows.append((a, -target))

    if objective == "p7":
        sigma_p_hat = cfg.sigma_p_value(channels) / sigma
        for kk in range(k):
            gg = hvec(_g_outer(gs[kk]))
            a = np.zeros(prob.n)
            for i in range(k):
                a[prob.block_slice(i + 1)] = gg
            rows.append((a, sigma_p_hat - 1.0))
    prob.lin_rows = rows

    # objective
    log_terms = []
    q = None
    chi_hat = None
    if objective == "p7":
        for kk in range(k):
            a = np.zeros(prob.n)
            a[prob.block_slice(0)] = hvec(_g_outer(gs[kk]))
            log_terms.append((1.0, a, 1.0))
    else:
        if chi is None:
            raise ValueError("rs/upper objectives need the chi multipliers")
        chi_hat = np.asarray(chi, dtype=float) * sigma
        q = np.zeros(prob.n)
        for kk in range(k):
            gg = hvec(_g_outer(gs[kk]))
            a = np.zeros(prob.n)
            a[prob.block_slice(0)] = gg
            for i in range(k):
                a[prob.block_slice(i + 1)] = gg
            log_terms.append((1.0, a, 1.0))
            for i in range(k):
                q[prob.block_slice(i + 1)] -= chi_hat[kk] * gg
    prob.log_terms = log_terms
    prob.q = q

    return ConvexSubproblem(sdp=prob, scale=p_tot, n=n, k=k, an=an, chi_hat=chi_hat, g=gs, v0=v0)


def _to_watts(sub: ConvexSubproblem, x):
    mats = sub.sdp.split(x)
    w = [m * sub.scale for m in mats[: sub.k + 1]]
    b = mats[sub.k + 1] * sub.scale if sub.an else np.zeros((sub.n - sub.k,) * 2, dtype=complex)
    return w[0], w[1:], b


def interior_start(sub: ConvexSubproblem, warm=None):
    """Strictly feasible start: reuse a warm point when it still fits,
    otherwise blend it toward the phase-I certificate, else run phase-I."""
    prob = sub.sdp

    def strict(x):
        ineq, psd = prob.constraint_margins(x)
        ok = (len(ineq) == 0 or ineq.min() > 1e-14) and (len(psd) == 0 or psd.min() > 1e-14)
        return ok and prob.in_domain(x)

    if warm is not None and strict(warm):
        return warm
    if sub.x_interior is None:
        scale = min((r[1] for r in prob.lin_rows), default=1.0)
        sub.x_interior = find_interior(prob, scale=max(scale, 1e-6))
    if warm is not None:
        for lam in (0.9, 0.5, 0.1):
            x = lam * warm + (1.0 - lam) * sub.x_interior
            if strict(x):
                return x
    return sub.x_interior


def solve_subproblem(sub: ConvexSubproblem, cfg: SystemConfig, warm=None, t0=1.0, gap_tol=3e-8):
    """Solve one convex subproblem; returns (W_c, {W_k}, B) in watts plus info.

    Raises InfeasibleError when phase-I certifies an empty interior,
    MaxIterationsError / NumericalError for solver breakdowns.
    """
    x0 = interior_start(sub, warm)
    x, info = solve_barrier(sub.sdp, x0, t0=t0, gap_tol=gap_tol)
    info["kkt_residual"] = kkt_residual(sub.sdp, info)
    info["x"] = x
    w_c, w_list, b = _to_watts(sub, x)
    return w_c, w_list, b, info


@dataclass
class MMState:
    chi: np.ndarray  # multipliers, 1/watts
    w_common: np.ndarray | None = None
    w_private: list | None = None
    b_an: np.ndarray | None = None
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    solver_info: dict = field(default_factory=dict)


def run_algorithm1(
    channels: ChannelSet,
    cfg: SystemConfig,
    gamma_e,
    an=True,
    warm_x=None,
    anchor_x=None,
    objective="rs",
    eps=None,
    max_iters=None,
    trace=None,
):
    """MM loop at fixed Gamma_e; stops when the true objective moves by less
    than eps (default cfg.tol_eps1).  The objective sequence is non-decreasing
    up to solver tolerance; a guard keeps the best iterate if a warm-started
    solve ever regresses."""
    eps = cfg.tol_eps1 if eps is None else eps
    max_iters = cfg.max_mm_iters if max_iters is None else max_iters

    w0_c, w0_p, _ = initial_iterate(cfg, an=an)
    chi = update_chi(w0_p, channels, cfg.noise_iod)
    state = MMState(chi=chi)

    sub = build_subproblem(channels, cfg, gamma_e, chi=chi, an=an, objective=objective)
    if anchor_x is not None:
        ineq, psd = sub.sdp.constraint_margins(anchor_x)
        if (len(ineq) == 0 or ineq.min() > 1e-14) and (len(psd) == 0 or psd.min() > 1e-14):
            sub.x_interior = anchor_x  # reuse the previous interior certificate
    x_prev = warm_x
    t0 = 1.0
    best_x, best_f = None, -np.inf
    for it in range(1, max_iters + 1):
        chi_hat = state.chi * cfg.noise_iod
        _refresh_objective(sub, chi_hat)
        _, _, _, info = solve_subproblem(sub, cfg, warm=x_prev, t0=t0)
        x = info["x"]
        f_bits = _true_rate(sub, x)
        if f_bits < best_f - 1e-12 and best_x is not None:
            x, f_bits = best_x, best_f  # inexact-solve regression guard
        _, w_list, _ = _to_watts(sub, x)
        state.objective_history.append(f_bits)
        state.iterations = it
        state.solver_info = {k: info[k] for k in ("t_final", "newton_steps", "kkt_residual")}
        if trace is not None:
            trace.append(("algorithm1", it, f_bits, info["kkt_residual"]))
        best_x, best_f = x, f_bits
        state.chi = update_chi(w_list, channels, cfg.noise_iod)
        x_prev = x
        # the feasible set is chi-independent; restart two stages cooler
        t0 = max(1.0, info["t_final"] / 100.0)
        if it >= 2 and abs(state.objective_history[-1] - state.objective_history[-2]) < eps:
            break

    w_c, w_list, b = _to_watts(sub, best_x)
    state.w_common, state.w_private, state.b_an = w_c, w_list, b
    sol = BeamformingSolution(
        w_common=w_c,
        w_private=list(w_list),
        b_an=b,
        v0=channels.v0,
        gamma_e=float(gamma_e),
        objective_trace=list(state.objective_history),
        meta={"solver": "stage1_mm", "warm_x": best_x, "an": an},
    )
    sol.finalize()
    return sol, state


def _refresh_objective(sub: ConvexSubproblem, chi_hat):
    """Rebuild the surrogate's linear part in place (feasible set unchanged)."""
    prob = sub.sdp
    q = np.zeros(prob.n)
    for kk in range(sub.k):
        gg = hvec(_g_outer(sub.g[kk]))
        for i in range(sub.k):
            q[prob.block_slice(i + 1)] -= chi_hat[kk] * gg
    prob.q = q
    sub.chi_hat = np.asarray(chi_hat, dtype=float)


def _true_rate(sub: ConvexSubproblem, x):
    """sum_k log2(1 + gamma_c,k) of the normalized iterate.  The residual AN
    leakage at the IoDs (zero up to rounding) is kept in the denominators."""
    mats = sub.sdp.split(x)
    total = 0.0
    for kk, g in enumerate(sub.g):
        sig = float(np.real(g.conj() @ (mats[0] @ g)))
        den = sum(float(np.real(g.conj() @ (mats[i + 1] @ g))) for i in range(sub.k))
        if sub.an:
            u = mats[sub.k + 1]
            gv = g.conj() @ sub.v0
            den += float(np.real(gv @ (u @ gv.conj())))
        total += math.log2(1.0 + sig / (den + 1.0))
    return total
