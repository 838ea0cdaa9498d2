"""Barrier Newton solver for the mini-max reformulation of the common-rate
design at a fixed Eve-SINR cap.

The saddle problem couples a max side (scalar weight on the common beam and
slack covariances for the private/AN budget rows) with a min side (dual
covariances and multiplier vectors) through two scalar equalities.  All
nonnegativity/PSD constraints are handled by 1/sigma-weighted logarithmic
barriers; positive-definiteness of the derived dual matrices (which the
printed trace barriers cannot enforce but the saddle requires) is barriered
through their log-determinants.  Newton steps solve the full linearized KKT
system assembled analytically over a real orthonormal basis of Hermitian
matrices and are damped by a backtracking line search on the residual norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .hermitian import hvec, unhvec, pair_hessian, congruence_map
from .metrics import BeamformingSolution
from .scenario import SystemConfig
from .secrecy_stats import compute_xi

LN2 = math.log(2.0)


class MinimaxError(RuntimeError):
    pass


class StallError(MinimaxError):
    """Backtracking line search underflowed; iteration cannot proceed."""


@dataclass
class MinimaxData:
    """Normalized problem data (total power -> 1, noise floor -> 1)."""

    n: int
    k: int
    g: list  # normalized channels
    h_mats: list  # g g^H outer products
    v0: np.ndarray
    gamma_e: float
    gamma_p: np.ndarray
    xi_hat: float
    p_hat: np.ndarray  # per-antenna power shares
    d_vec: np.ndarray  # Gamma_p * sigma_u^2 in noise units
    b_vec: np.ndarray  # sigma_u^2 - Sigma_p in noise units (negative)
    vartheta: float
    scale: float  # watts per normalized power unit


@dataclass
class MinimaxState:
    data: MinimaxData
    sigma_barrier: float  # varsigma
    x: np.ndarray  # stacked real vector

    def copy_with(self, x):
        return MinimaxState(self.data, self.sigma_barrier, x)


class _Idx:
    """Slices of the stacked real vector."""

    def __init__(self, n, k):
        nn = n * n
        mm = (n - k) * (n - k)
        pos = 0

        def take(size):
            nonlocal pos
            s = slice(pos, pos + size)
            pos += size
            return s

        self.omega = take(1)
        self.w = [take(nn) for _ in range(k)]
        self.b = take(mm)
        self.d = [take(nn) for _ in range(k)]
        self.lam = take(n)
        self.mu = take(k)
        self.ups = take(k)
        self.tau = take(2)
        self.total = pos


def build_data(channels: ChannelSet, cfg: SystemConfig, gamma_e) -> MinimaxData:
    n, k = cfg.n_antennas, cfg.n_iods
    p_tot = cfg.total_power()
    sigma = cfg.noise_iod
    g = [h * math.sqrt(p_tot / sigma) for h in channels.iod_channels]
    sigma_p_hat = cfg.sigma_p_value(channels) / sigma
    return MinimaxData(
        n=n,
        k=k,
        g=g,
        h_mats=[np.outer(v, v.conj()) for v in g],
        v0=channels.v0,
        gamma_e=float(gamma_e),
        gamma_p=np.asarray(cfg.sinr_targets, dtype=float),
        xi_hat=compute_xi(cfg.secrecy_prob, cfg.n_eves, gamma_e, cfg.noise_eve, n) / p_tot,
        p_hat=np.asarray(cfg.per_antenna_power, dtype=float) / p_tot,
        d_vec=np.asarray(cfg.sinr_targets, dtype=float),
        b_vec=np.full(k, 1.0 - sigma_p_hat),
        vartheta=cfg.vartheta_value() / p_tot,
        scale=p_tot,
    )


# ---------------------------------------------------------------------------
# unpacking and derived matrices


def _unpack(data: MinimaxData, x):
    idx = _Idx(data.n, data.k)
    omega = float(x[idx.omega][0])
    w = [unhvec(x[s]) for s in idx.w]
    b = unhvec(x[idx.b])
    d = [unhvec(x[s]) for s in idx.d]
    lam = x[idx.lam]
    mu = x[idx.mu]
    ups = x[idx.ups]
    tau1, tau2 = x[idx.tau]
    return idx, omega, w, b, d, lam, mu, ups, tau1, tau2


def build_dual_matrices(data: MinimaxData, d_mats, lam, mu, ups):
    """Sigma-tilde, the per-stream dual weights Omega_k, the AN dual weight
    Phi, and the constant vector g of the second equality."""
    n, k = data.n, data.k
    ge = data.gamma_e
    sigma_t = np.diag(lam).astype(complex) - ge * sum(d_mats)
    omegas = []
    for j in range(k):
        m = d_mats[j] + np.diag(lam).astype(complex)
        m = m - mu[j] * data.h_mats[j] + ups[j] * data.h_mats[j]
        for i in range(k):
            if i != j:
                m = m + mu[i] * data.gamma_p[i] * data.h_mats[i]
                m = m + ups[i] * data.h_mats[i]
                m = m - ge * d_mats[i]
        omegas.append(0.5 * (m + m.conj().T))
    v0 = data.v0
    phi = v0.conj().T @ np.diag(lam).astype(complex) @ v0
    phi = phi - ge * sum(v0.conj().T @ dm @ v0 for dm in d_mats)
    phi = 0.5 * (phi + phi.conj().T)
    g_vec = np.concatenate([data.p_hat, -data.d_vec, -data.b_vec])
    return 0.5 * (sigma_t + sigma_t.conj().T), omegas, phi, g_vec


def _derived(data: MinimaxData, x):
    idx, omega, w, b, d, lam, mu, ups, tau1, tau2 = _unpack(data, x)
    sigma_t, omegas, phi, _ = build_dual_matrices(data, d, lam, mu, ups)
    return {
        "idx": idx,
        "omega": omega,
        "w": w,
        "b": b,
        "d": d,
        "lam": lam,
        "mu": mu,
        "ups": ups,
        "tau1": tau1,
        "tau2": tau2,
        "sigma_t": sigma_t,
        "omegas": omegas,
        "phi": phi,
    }


def in_domain(data: MinimaxData, x):
    idx, omega, w, b, d, lam, mu, ups, _, _ = _unpack(data, x)
    if omega <= 0 or np.any(lam <= 0) or np.any(mu <= 0) or np.any(ups <= 0):
        return False
    sigma_t, omegas, phi, _ = build_dual_matrices(data, d, lam, mu, ups)
    for m in w + d + [b, sigma_t, phi] + omegas:
        if m.size == 0:
            continue
        try:
            np.linalg.cholesky(0.5 * (m + m.conj().T))
        except np.linalg.LinAlgError:
            return False
    return True


def barrier_objective(data: MinimaxData, x, sigma_barrier):
    """The printed barrier objective (bits): the log-det rate ratio plus
    1/sigma-weighted logs of the scalar weight, the weighted traces of the
    slack covariances, and the min-side variables."""
    der = _derived(data, x)
    sigma_t, omega = der["sigma_t"], der["omega"]
    if omega <= 0:
        raise ValueError("barrier argument omega must be positive")
    sgn, logdet_s = np.linalg.slogdet(sigma_t)
    if sgn <= 0:
        raise ValueError("Sigma must be positive definite")
    val = 0.0
    for hm in data.h_mats:
        sgn2, logdet2 = np.linalg.slogdet(sigma_t + omega * hm)
        val += (logdet2 - logdet_s) / LN2
    bar = math.log2(omega)
    for j in range(data.k):
        t = float(np.real(np.trace(der["omegas"][j] @ der["w"][j])))
        if t <= 0:
            raise ValueError("barrier argument Tr(Omega W) must be positive")
        bar += math.log2(t)
    tb = float(np.real(np.trace(der["phi"] @ der["b"])))
    if tb <= 0:
        raise ValueError("barrier argument Tr(Phi B) must be positive")
    bar += math.log2(tb)
    for j in range(data.k):
        td = float(np.real(np.trace(der["d"][j])))
        if td <= 0:
            raise ValueError("barrier argument Tr(D) must be positive")
        bar -= math.log2(td)
    for v in np.concatenate([der["lam"], der["mu"], der["ups"]]):
        if v <= 0:
            raise ValueError("barrier argument eta must be positive")
        bar -= math.log2(v)
    return val + bar / sigma_barrier


def saddle_value_bits(data: MinimaxData, x):
    """The rate part sum_k log2 |Sigma + omega h h^H| / |Sigma|."""
    der = _derived(data, x)
    _, logdet_s = np.linalg.slogdet(der["sigma_t"])
    val = 0.0
    for hm in data.h_mats:
        _, logdet2 = np.linalg.slogdet(der["sigma_t"] + der["omega"] * hm)
        val += (logdet2 - logdet_s) / LN2
    return val


# ---------------------------------------------------------------------------
# KKT residual


def _equalities(data: MinimaxData, der):
    g1 = der["omega"]
    for j in range(data.k):
        g1 += float(np.real(np.trace(der["omegas"][j] @ der["w"][j])))
    g1 += float(np.real(np.trace(der["phi"] @ der["b"])))
    g2 = data.xi_hat * sum(float(np.real(np.trace(dm))) for dm in der["d"])
    g2 += float(data.p_hat @ der["lam"] - data.d_vec @ der["mu"] - data.b_vec @ der["ups"])
    return g1, g2


def kkt_residual(data: MinimaxData, x, sigma_barrier):
    """Stacked Lagrangian gradients and equality residuals, and their norm."""
    der = _derived(data, x)
    idx = der["idx"]
    n, k = data.n, data.k
    si = 1.0 / sigma_barrier
    ge = data.gamma_e
    tau1, tau2 = der["tau1"], der["tau2"]

    sigma_inv = np.linalg.inv(der["sigma_t"])
    f_mats = [np.linalg.inv(der["sigma_t"] + der["omega"] * hm) for hm in data.h_mats]
    om_inv = [np.linalg.inv(om) for om in der["omegas"]]
    phi_inv_m = np.linalg.inv(der["phi"])
    vphiv = data.v0 @ phi_inv_m @ data.v0.conj().T
    vbv = data.v0 @ der["b"] @ data.v0.conj().T
    w_sum_nn = sum(np.real(np.diag(wj)) for wj in der["w"]) + np.real(np.diag(vbv))

    r = np.zeros(idx.total)
    # omega row
    quad = [float(np.real(g.conj() @ (fm @ g))) for g, fm in zip(data.g, f_mats)]
    r[idx.omega] = sum(quad) + si / der["omega"] - tau1
    # W rows
    for j in range(k):
        r[idx.w[j]] = hvec(si * np.linalg.inv(der["w"][j]) - tau1 * der["omegas"][j])
    # B row
    r[idx.b] = hvec(si * np.linalg.inv(der["b"]) - tau1 * der["phi"])
    # D rows
    fs_minus = sum(f_mats) - k * sigma_inv
    for kk in range(k):
        m = -ge * fs_minus
        m = m - si * np.linalg.inv(der["d"][kk])
        m = m - si * (om_inv[kk] - ge * sum(om_inv[j] for j in range(k) if j != kk))
        m = m + si * ge * vphiv
        lin = der["w"][kk] - ge * sum(der["w"][j] for j in range(k) if j != kk) - ge * vbv
        m = m - tau1 * lin - tau2 * data.xi_hat * np.eye(n)
        r[idx.d[kk]] = hvec(m)
    # lambda rows
    diag_fs = np.real(np.diag(fs_minus))
    diag_om = sum(np.real(np.diag(oi)) for oi in om_inv)
    diag_vphiv = np.real(np.diag(vphiv))
    r[idx.lam] = (
        diag_fs
        - si / der["lam"]
        - si * diag_om
        - si * diag_vphiv
        - tau1 * w_sum_nn
        - tau2 * data.p_hat
    )
    # mu / upsilon rows
    for kk in range(k):
        gk = data.g[kk]
        quad_om = [float(np.real(gk.conj() @ (oi @ gk))) for oi in om_inv]
        q_w = [float(np.real(gk.conj() @ (wj @ gk))) for wj in der["w"]]
        gp = data.gamma_p[kk]
        r[idx.mu.start + kk] = (
            si * (quad_om[kk] - gp * sum(quad_om[j] for j in range(k) if j != kk))
            - si / der["mu"][kk]
            - tau1 * (-q_w[kk] + gp * sum(q_w[j] for j in range(k) if j != kk))
            + tau2 * data.d_vec[kk]
        )
        r[idx.ups.start + kk] = (
            -si * sum(quad_om)
            - si / der["ups"][kk]
            - tau1 * sum(q_w)
            + tau2 * data.b_vec[kk]
        )
    # equality rows
    g1, g2 = _equalities(data, der)
    r[idx.tau.start] = data.vartheta - g1
    r[idx.tau.start + 1] = data.vartheta - g2
    return r, float(np.linalg.norm(r))


# ---------------------------------------------------------------------------
# Newton step: analytic Jacobian of the residual map


def newton_matrix(data: MinimaxData, x, sigma_barrier):
    """Symmetric Jacobian of the stacked KKT residual, assembled block-wise
    over the real Hermitian bases."""
    der = _derived(data, x)
    idx = der["idx"]
    n, k = data.n, data.k
    nn = n * n
    si = 1.0 / sigma_barrier
    ge = data.gamma_e
    tau1 = der["tau1"]

    sigma_inv = np.linalg.inv(der["sigma_t"])
    f_mats = [np.linalg.inv(der["sigma_t"] + der["omega"] * hm) for hm in data.h_mats]
    w_inv = [np.linalg.inv(wj) for wj in der["w"]]
    b_inv = np.linalg.inv(der["b"])
    d_inv = [np.linalg.inv(dm) for dm in der["d"]]
    om_inv = [np.linalg.inv(om) for om in der["omegas"]]
    phi_inv_m = np.linalg.inv(der["phi"])
    vphiv = data.v0 @ phi_inv_m @ data.v0.conj().T
    vbv = data.v0 @ der["b"] @ data.v0.conj().T

    f_vecs = [fm @ g for fm, g in zip(f_mats, data.g)]
    quad = [float(np.real(g.conj() @ fv)) for g, fv in zip(data.g, f_vecs)]
    m_vecs = [[oi @ g for g in data.g] for oi in om_inv]  # m_vecs[j][m]
    smat = [gmat.conj() @ np.stack(mv, axis=1) for gmat, mv in
            zip([np.stack(data.g, axis=0)] * k, m_vecs)]  # smat[j][k, m] = g_k^H Om_j^-1 g_m
    q_w = np.array([[float(np.real(g.conj() @ (wj @ g))) for wj in der["w"]]
                    for g in data.g])  # q_w[k, j]

    kf = [pair_hessian(fm, n, n) for fm in f_mats]
    ks = pair_hessian(sigma_inv, n, n)
    kw = [pair_hessian(wi, n, n) for wi in w_inv]
    kb = pair_hessian(b_inv, n - k, n - k)
    kd = [pair_hessian(di, n, n) for di in d_inv]
    kom = [pair_hessian(oi, n, n) for oi in om_inv]
    kphi = pair_hessian(phi_inv_m, n - k, n - k)
    m_v = congruence_map(data.v0)  # hvec_N -> hvec_{N-K} of V0^H . V0
    vkv = m_v.T @ kphi @ m_v

    eye_nn = np.eye(nn)
    h_e = [hvec(_e(n, i)) for i in range(n)]
    h_u = []
    for i in range(n):
        u = data.v0.conj().T[:, i]
        h_u.append(hvec(np.outer(u, u.conj())))
    h_h = [hvec(hm) for hm in data.h_mats]
    h_ff = [hvec(np.outer(fv, fv.conj())) for fv in f_vecs]
    h_cs = [[hvec(np.outer(fm[:, i], fm[:, i].conj())) for i in range(n)] for fm in f_mats]
    h_s = [hvec(np.outer(sigma_inv[:, i], sigma_inv[:, i].conj())) for i in range(n)]
    h_o = [[hvec(np.outer(oi[:, i], oi[:, i].conj())) for i in range(n)] for oi in om_inv]
    h_q = [hvec(np.outer(vphiv[:, i], vphiv[:, i].conj())) for i in range(n)]
    h_m = [[hvec(np.outer(mv, mv.conj())) for mv in row] for row in m_vecs]

    c_mat = np.where(np.eye(k, dtype=bool), 1.0, -ge)
    gmu = -np.eye(k) + (1.0 - np.eye(k)) * data.gamma_p[None, :]

    jac = np.zeros((idx.total, idx.total))

    def put(sl_r, sl_c, blk):
        jac[sl_r, sl_c] += blk
        if (sl_r.start, sl_r.stop) != (sl_c.start, sl_c.stop):
            jac[sl_c, sl_r] += np.transpose(blk)

    io = idx.omega.start
    # omega row/column
    jac[io, io] = -sum(q * q for q in quad) - si / der["omega"] ** 2
    sum_hff = sum(h_ff)
    for i in range(k):
        put(idx.omega, idx.d[i], ge * sum_hff[None, :])
    jac[io, idx.lam] = -sum(np.abs(fv) ** 2 for fv in f_vecs)
    jac[idx.lam, io] = jac[io, idx.lam]
    jac[io, idx.tau.start] = -1.0
    jac[idx.tau.start, io] = -1.0

    # W blocks
    for j in range(k):
        put(idx.w[j], idx.w[j], -si * kw[j])
        for i in range(k):
            put(idx.w[j], idx.d[i], -tau1 * c_mat[j, i] * eye_nn)
        lam_cols = np.stack(h_e, axis=1)
        put(idx.w[j], idx.lam, -tau1 * lam_cols)
        for i in range(k):
            jac[idx.w[j], idx.mu.start + i] += -tau1 * gmu[j, i] * h_h[i]
            jac[idx.mu.start + i, idx.w[j]] += -tau1 * gmu[j, i] * h_h[i]
            jac[idx.w[j], idx.ups.start + i] += -tau1 * h_h[i]
            jac[idx.ups.start + i, idx.w[j]] += -tau1 * h_h[i]
        hom = hvec(der["omegas"][j])
        jac[idx.w[j], idx.tau.start] += -hom
        jac[idx.tau.start, idx.w[j]] += -hom

    # B block
    put(idx.b, idx.b, -si * kb)
    put(idx.b, idx.lam, -tau1 * np.stack(h_u, axis=1))
    for i in range(k):
        put(idx.b, idx.d[i], tau1 * ge * m_v)
    hphi = hvec(der["phi"])
    jac[idx.b, idx.tau.start] += -hphi
    jac[idx.tau.start, idx.b] += -hphi

    # D blocks
    t_dd = -ge * ge * sum(kf) + k * ge * ge * ks + si * ge * ge * vkv
    for kk in range(k):
        for i in range(kk, k):
            blk = t_dd.copy()
            if i == kk:
                blk += si * kd[kk]
            blk += si * c_mat[kk, i] * kom[kk]
            blk -= si * ge * sum(c_mat[j, i] * kom[j] for j in range(k) if j != kk)
            put(idx.d[kk], idx.d[i], blk)
        lam_cols = np.zeros((nn, n))
        for m in range(n):
            col = -ge * sum(-h_cs[j][m] + h_s[m] for j in range(k))
            col += si * h_o[kk][m]
            col -= si * ge * sum(h_o[j][m] for j in range(k) if j != kk)
            col -= si * ge * h_q[m]
            lam_cols[:, m] = col
        put(idx.d[kk], idx.lam, lam_cols)
        for m in range(k):
            col_mu = si * gmu[kk, m] * h_m[kk][m]
            col_mu -= si * ge * sum(gmu[j, m] * h_m[j][m] for j in range(k) if j != kk)
            jac[idx.d[kk], idx.mu.start + m] += col_mu
            jac[idx.mu.start + m, idx.d[kk]] += col_mu
            col_up = si * h_m[kk][m]
            col_up -= si * ge * sum(h_m[j][m] for j in range(k) if j != kk)
            jac[idx.d[kk], idx.ups.start + m] += col_up
            jac[idx.ups.start + m, idx.d[kk]] += col_up
        lin = der["w"][kk] - ge * sum(der["w"][j] for j in range(k) if j != kk) - ge * vbv
        hlin = hvec(lin)
        jac[idx.d[kk], idx.tau.start] += -hlin
        jac[idx.tau.start, idx.d[kk]] += -hlin
        hxi = data.xi_hat * hvec(np.eye(n))
        jac[idx.d[kk], idx.tau.start + 1] += -hxi
        jac[idx.tau.start + 1, idx.d[kk]] += -hxi

    # lambda block
    lam_lam = sum(-np.abs(fm) ** 2 + np.abs(sigma_inv) ** 2 for fm in f_mats)
    lam_lam = np.real(lam_lam)
    lam_lam += si * sum(np.abs(oi) ** 2 for oi in om_inv).real
    lam_lam += si * np.abs(vphiv) ** 2
    lam_lam += np.diag(si / der["lam"] ** 2)
    jac[idx.lam, idx.lam] += lam_lam
    for m in range(k):
        col_mu = si * sum(gmu[j, m] * np.abs(m_vecs[j][m]) ** 2 for j in range(k))
        jac[idx.lam, idx.mu.start + m] += col_mu
        jac[idx.mu.start + m, idx.lam] += col_mu
        col_up = si * sum(np.abs(m_vecs[j][m]) ** 2 for j in range(k))
        jac[idx.lam, idx.ups.start + m] += col_up
        jac[idx.ups.start + m, idx.lam] += col_up
    w_sum_nn = sum(np.real(np.diag(wj)) for wj in der["w"]) + np.real(np.diag(vbv))
    jac[idx.lam, idx.tau.start] += -w_sum_nn
    jac[idx.tau.start, idx.lam] += -w_sum_nn
    jac[idx.lam, idx.tau.start + 1] += -data.p_hat
    jac[idx.tau.start + 1, idx.lam] += -data.p_hat

    # mu / upsilon block
    for kk in range(k):
        gp = data.gamma_p[kk]
        for m in range(k):
            s_abs = [abs(smat[j][kk, m]) ** 2 for j in range(k)]
            mu_mu = si * (-gmu[kk, m] * s_abs[kk]
                          + gp * sum(gmu[j, m] * s_abs[j] for j in range(k) if j != kk))
            if m == kk:
                mu_mu += si / der["mu"][kk] ** 2
            jac[idx.mu.start + kk, idx.mu.start + m] += mu_mu
            mu_up = si * (-s_abs[kk] + gp * sum(s_abs[j] for j in range(k) if j != kk))
            jac[idx.mu.start + kk, idx.ups.start + m] += mu_up
            jac[idx.ups.start + m, idx.mu.start + kk] += mu_up
            up_up = si * sum(s_abs)
            if m == kk:
                up_up += si / der["ups"][kk] ** 2
            jac[idx.ups.start + kk, idx.ups.start + m] += up_up
        t1_mu = -(-q_w[kk, kk] + gp * sum(q_w[kk, j] for j in range(k) if j != kk))
        jac[idx.mu.start + kk, idx.tau.start] += t1_mu
        jac[idx.tau.start, idx.mu.start + kk] += t1_mu
        jac[idx.mu.start + kk, idx.tau.start + 1] += data.d_vec[kk]
        jac[idx.tau.start + 1, idx.mu.start + kk] += data.d_vec[kk]
        t1_up = -sum(q_w[kk, :])
        jac[idx.ups.start + kk, idx.tau.start] += t1_up
        jac[idx.tau.start, idx.ups.start + kk] += t1_up
        jac[idx.ups.start + kk, idx.tau.start + 1] += data.b_vec[kk]
        jac[idx.tau.start + 1, idx.ups.start + kk] += data.b_vec[kk]
    return 0.5 * (jac + jac.T)


def _e(n, i):
    m = np.zeros((n, n))
    m[i, i] = 1.0
    return m


def newton_step(data: MinimaxData, x, sigma_barrier):
    """Solve the linearized KKT system; Levenberg-regularized retry on a
    singular system, an error after that."""
    r, _ = kkt_residual(data, x, sigma_barrier)
    jac = newton_matrix(data, x, sigma_barrier)
    for shift in (0.0, 1e-10 * max(1.0, float(np.abs(jac).max()))):
        try:
            lu, piv = sla.lu_factor(jac + shift * np.eye(len(r)), check_finite=False)
            step = sla.lu_solve((lu, piv), -r, check_finite=False)
            if np.all(np.isfinite(step)):
                return step
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            continue
    raise MinimaxError("singular KKT system after regularized retry")


def line_search(data: MinimaxData, x, step, sigma_barrier, alpha=0.1, beta=0.5):
    """Backtracking on the residual norm: largest s = beta^m keeping the
    iterate in the barrier domain with r(x + s step) <= (1 - alpha s) r(x)."""
    if not np.any(step):
        return 1.0  # no-op direction leaves the residual unchanged
    _, r0 = kkt_residual(data, x, sigma_barrier)
    s = 1.0
    while s > 1e-12:
        xn = x + s * step
        if in_domain(data, xn):
            _, rn = kkt_residual(data, xn, sigma_barrier)
            if rn <= (1.0 - alpha * s) * r0:
                return s
        s *= beta
    raise StallError("line search underflowed (s < 1e-12)")


# ---------------------------------------------------------------------------
# inner maximization in closed form


def inner_restore(data: MinimaxData, x, sigma_barrier):
    """Solve the max side exactly for the current min-side variables.

    With log-det barriers the slack covariances are scaled inverses of the
    dual weights, W_j = Omega_j^{-1}/(sigma tau1) and B = Phi^{-1}/(sigma
    tau1), and the budget equality pins the scalar weight through a strictly
    monotone scalar equation that bisection solves globally.  Returns the
    state vector with the max side overwritten; raises MinimaxError when the
    min-side point is outside its domain."""
    idx, _, _, _, d, lam, mu, ups, _, tau2 = _unpack(data, x)
    sigma_t, omegas, phi, _ = build_dual_matrices(data, d, lam, mu, ups)
    for m in [sigma_t, phi] + omegas + d:
        try:
            np.linalg.cholesky(0.5 * (m + m.conj().T))
        except np.linalg.LinAlgError:
            raise MinimaxError("min-side point left the dual domain")
    if np.any(lam <= 0) or np.any(mu <= 0) or np.any(ups <= 0):
        raise MinimaxError("min-side multipliers must stay positive")
    si = 1.0 / sigma_barrier
    n, k = data.n, data.k
    m1 = k * n + (n - k)  # total slack trace degree
    q_tilde = []
    for g in data.g:
        q_tilde.append(float(np.real(g.conj() @ np.linalg.solve(sigma_t, g))))

    theta = data.vartheta

    def phi_fun(w):
        return (
            sum(q / (1.0 + w * q) for q in q_tilde)
            + si / w
            - m1 / (sigma_barrier * (theta - w))
        )

    lo, hi = theta * 1e-14, theta * (1.0 - 1e-14)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi_fun(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * theta:
            break
    omega = 0.5 * (lo + hi)
    tau1 = m1 / (sigma_barrier * (theta - omega))
    scale = 1.0 / (sigma_barrier * tau1)
    out = x.copy()
    out[idx.omega] = omega
    for s, om in zip(idx.w, omegas):
        out[s] = hvec(scale * np.linalg.inv(om))
    out[idx.b] = hvec(scale * np.linalg.inv(phi))
    out[idx.tau.start] = tau1
    return out


def _partition(idx: _Idx):
    """Index arrays of the eliminated max side and the reduced min side."""
    x_idx = [idx.omega.start]
    for s in idx.w:
        x_idx.extend(range(s.start, s.stop))
    x_idx.extend(range(idx.b.start, idx.b.stop))
    x_idx.append(idx.tau.start)
    y_idx = []
    for s in idx.d:
        y_idx.extend(range(s.start, s.stop))
    y_idx.extend(range(idx.lam.start, idx.lam.stop))
    y_idx.extend(range(idx.mu.start, idx.mu.stop))
    y_idx.extend(range(idx.ups.start, idx.ups.stop))
    y_idx.append(idx.tau.start + 1)
    return np.array(x_idx), np.array(y_idx)


def reduced_newton_step(data: MinimaxData, x, sigma_barrier):
    """Newton step on the min side with the max side eliminated: the Schur
    complement of the full KKT Jacobian onto the min-side rows (the inner
    rows vanish at an inner-optimal point)."""
    idx = _Idx(data.n, data.k)
    x_ix, y_ix = _partition(idx)
    r, _ = kkt_residual(data, x, sigma_barrier)
    jac = newton_matrix(data, x, sigma_barrier)
    jxx = jac[np.ix_(x_ix, x_ix)]
    jxy = jac[np.ix_(x_ix, y_ix)]
    jyy = jac[np.ix_(y_ix, y_ix)]
    r_y = r[y_ix]
    for shift in (0.0, 1e-10 * max(1.0, float(np.abs(jxx).max()))):
        try:
            lu = sla.lu_factor(jxx + shift * np.eye(len(x_ix)), check_finite=False)
            jxx_inv_jxy = sla.lu_solve(lu, jxy, check_finite=False)
            break
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            continue
    else:
        raise MinimaxError("singular inner block in the reduced Newton system")
    schur = jyy - jxy.T @ jxx_inv_jxy
    for shift in (0.0, 1e-10 * max(1.0, float(np.abs(schur).max()))):
        try:
            lu = sla.lu_factor(schur + shift * np.eye(len(y_ix)), check_finite=False)
            dy = sla.lu_solve(lu, -r_y, check_finite=False)
            if np.all(np.isfinite(dy)):
                return y_ix, dy
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            continue
    raise MinimaxError("singular reduced KKT system after regularized retry")


def _reduced_norm(data, x, sigma_barrier, y_ix):
    r, _ = kkt_residual(data, x, sigma_barrier)
    return float(np.linalg.norm(r[y_ix]))


# ---------------------------------------------------------------------------
# driver


def initial_state(data: MinimaxData, sigma0) -> MinimaxState:
    """Identity-flavored start, scaled to satisfy both equalities exactly
    (the dual covariances are shrunk first so Sigma stays positive definite
    at caps of 0 dB and above)."""
    n, k = data.n, data.k
    idx = _Idx(n, k)
    x = np.zeros(idx.total)
    eps_d = min(1.0, 1.0 / (2.0 * k * data.gamma_e))
    lam = np.ones(n)
    mu = np.ones(k)
    ups = np.ones(k)
    d_mats = [eps_d * np.eye(n, dtype=complex) for _ in range(k)]
    # min-side scale: the second equality is 1-homogeneous in (D, eta)
    for _ in range(60):
        g2 = data.xi_hat * sum(np.trace(dm).real for dm in d_mats)
        g2 += float(data.p_hat @ lam - data.d_vec @ mu - data.b_vec @ ups)
        if g2 > 1e-12:
            break
        mu = mu * 0.5  # the SINR rows make g2 negative; shrink their duals
    c = data.vartheta / g2
    lam, mu, ups = c * lam, c * mu, c * ups
    d_mats = [c * dm for dm in d_mats]

    sigma_t, omegas, phi, _ = build_dual_matrices(data, d_mats, lam, mu, ups)
    omega = 1.0
    w_mats = [np.linalg.inv(om) for om in omegas]  # "unit hat" start
    b_mat = np.linalg.inv(phi)
    g1 = omega + sum(np.trace(om @ wm).real for om, wm in zip(omegas, w_mats))
    g1 += float(np.trace(phi @ b_mat).real)
    a = data.vartheta / g1
    omega *= a
    w_mats = [a * wm for wm in w_mats]
    b_mat = a * b_mat

    x[idx.omega] = omega
    for s, wm in zip(idx.w, w_mats):
        x[s] = hvec(wm)
    x[idx.b] = hvec(b_mat)
    for s, dm in zip(idx.d, d_mats):
        x[s] = hvec(dm)
    x[idx.lam] = lam
    x[idx.mu] = mu
    x[idx.ups] = ups
    x[idx.tau] = 0.0
    state = MinimaxState(data=data, sigma_barrier=float(sigma0), x=x)
    if not in_domain(data, x):
        raise MinimaxError("initial mini-max state is outside the barrier domain")
    return state


def barrier_degree(data: MinimaxData):
    n, k = data.n, data.k
    return 1 + k * n + (n - k) + k * n + (n + 2 * k) + k * n + (n - k)


def run_algorithm3(channels: ChannelSet, cfg: SystemConfig, gamma_e, trace=None,
                   eps=None, max_inner=500, gap_tol=1e-6):
    """Outer barrier loop (growth-factor schedule) around the inner Newton
    iteration on the KKT residual; returns the assembled solution with the
    saddle value and recovery diagnostics attached."""
    eps = cfg.tol_eps3 if eps is None else eps
    data = build_data(channels, cfg, gamma_e)
    state = initial_state(data, cfg.barrier_sigma0)
    nu = barrier_degree(data)
    idx = _Idx(data.n, data.k)
    _, y_ix = _partition(idx)
    outer = 0
    total_newton = 0
    while True:
        outer += 1
        # centering: the max side is restored exactly after every move, so
        # the Newton flow lives on the reduced (convex) min-side system
        state.x = inner_restore(data, state.x, state.sigma_barrier)
        r_y = _reduced_norm(data, state.x, state.sigma_barrier, y_ix)
        inner = 0
        while r_y >= 0.5 * eps and inner < max_inner:
            y_ix2, dy = reduced_newton_step(data, state.x, state.sigma_barrier)
            s = 1.0
            accepted = False
            while s > 1e-12:
                trial = state.x.copy()
                trial[y_ix2] += s * dy
                try:
                    trial = inner_restore(data, trial, state.sigma_barrier)
                except MinimaxError:
                    s *= cfg.ls_beta
                    continue
                r_trial = _reduced_norm(data, trial, state.sigma_barrier, y_ix)
                if r_trial <= (1.0 - cfg.ls_alpha * s) * r_y:
                    state.x = trial
                    r_y = r_trial
                    accepted = True
                    break
                s *= cfg.ls_beta
            if not accepted:
                raise StallError("reduced line search underflowed (s < 1e-12)")
            inner += 1
            total_newton += 1
        rv, r = kkt_residual(data, state.x, state.sigma_barrier)
        if trace is not None:
            trace.append(("algorithm3", outer, saddle_value_bits(data, state.x), r))
        if r >= eps:
            raise MinimaxError(
                f"Newton centering did not reach residual {eps:g} "
                f"(r = {r:.3e} at barrier {state.sigma_barrier:g})"
            )
        if nu / state.sigma_barrier < gap_tol:
            break
        state.sigma_barrier *= cfg.barrier_growth
    value = saddle_value_bits(data, state.x)
    sol = assemble_solution(state, channels, cfg)
    idx = _Idx(data.n, data.k)
    sol.meta.update(
        saddle_value_bits=value,
        barrier_final=state.sigma_barrier,
        kkt_residual=r,
        equality_residuals=tuple(np.abs(rv[idx.tau])),
        outer_iterations=outer,
        newton_steps=total_newton,
        solver="minimax",
    )
    return sol, state


def recover_wc(state: MinimaxState, channels: ChannelSet):
    """Rank-one common-covariance candidates, one per stream, from the
    whitened-channel structure of the saddle; the scaling constant cancels.
    Returns the candidates in watts."""
    data = state.data
    der = _derived(data, state.x)
    omega = der["omega"]
    cands = []
    for g in data.g:
        if omega <= 0:
            cands.append(np.zeros((data.n, data.n), dtype=complex))
            continue
        y = np.linalg.solve(der["sigma_t"], g)
        denom = float(np.real(g.conj() @ y))
        cands.append(omega * np.outer(y, y.conj()) / denom * data.scale)
    return cands


def _combination_wc(data: MinimaxData, der, room_hat):
    """Optimize the common covariance over span{Sigma^-1 g_k} under the
    leftover per-antenna budget (a K x K barrier subproblem)."""
    from .solver import SDPProblem, solve_barrier

    k = data.k
    ys = [np.linalg.solve(der["sigma_t"], g) for g in data.g]
    basis, _ = np.linalg.qr(np.stack(ys, axis=1))
    gproj = [basis.conj().T @ g for g in data.g]
    prob = SDPProblem([k])
    rows = []
    for ant in range(data.n):
        v = basis.conj().T[:, ant]
        rows.append((hvec(np.outer(v, v.conj())), max(float(room_hat[ant]), 1e-14)))
    prob.lin_rows = rows
    prob.log_terms = [(1.0, hvec(np.outer(gp, gp.conj())), 1.0) for gp in gproj]
    eps0 = 0.45 * min(ub for _, ub in rows)
    x0 = prob.join([np.eye(k, dtype=complex) * eps0])
    try:
        x, _ = solve_barrier(prob, x0)
        a = prob.split(x)[0]
        return basis @ a @ basis.conj().T
    except Exception:
        return np.zeros((data.n, data.n), dtype=complex)


def assemble_solution(state: MinimaxState, channels: ChannelSet, cfg: SystemConfig):
    """Assemble a transmit design from the saddle: the best feasible
    common-beam candidate, private beams shaped like the slack covariances
    and scaled to meet the SINR targets with equality, leftover per-antenna
    power filled with AN.  The cap-feasibility margin of the result is
    reported, not asserted."""
    from .secrecy_stats import lmi_margin

    data = state.data
    der = _derived(data, state.x)
    n, k = data.n, data.k
    p = np.asarray(cfg.per_antenna_power, dtype=float)

    shapes = []
    for wj in der["w"]:
        vec = np.linalg.eigh(0.5 * (wj + wj.conj().T))[1][:, -1]
        shapes.append(np.outer(vec, vec.conj()))
    # private scales: SINR equality coupling (normalized units, noise = 1)
    qmat = np.array([[float(np.real(g.conj() @ (sh @ g))) for sh in shapes]
                     for g in data.g])
    a = np.zeros((k, k))
    rhs = np.zeros(k)
    for kk in range(k):
        a[kk, kk] = qmat[kk, kk]
        for i in range(k):
            if i != kk:
                a[kk, i] = -data.gamma_p[kk] * qmat[kk, i]
        rhs[kk] = data.gamma_p[kk]
    try:
        scales = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError:
        scales = np.full(k, np.nan)
    if not np.all(np.isfinite(scales)) or np.any(scales < 0):
        scales = np.array([data.gamma_p[kk] / max(qmat[kk, kk], 1e-300) for kk in range(k)])
    w_private = [s * sh * data.scale for s, sh in zip(scales, shapes)]

    # common beam: a positive combination over the span of the whitened
    # per-stream candidates (the printed recovery is ambiguous about the
    # stream index; optimizing the combination dominates every single
    # candidate), power-capped by the leftover per-antenna budget
    used = sum(np.real(np.diag(w)) for w in w_private)
    room_hat = np.maximum(p - used, 0.0) / data.scale
    w_c = _combination_wc(data, der, room_hat) * data.scale
    candidates = recover_wc(state, channels)
    best_single = None
    for cand in candidates:
        diag = np.real(np.diag(cand))
        with np.errstate(divide="ignore"):
            scl = float(np.min(np.where(diag > 1e-300, room_hat * data.scale / np.maximum(diag, 1e-300), np.inf)))
        wc1 = cand * min(1.0, scl if np.isfinite(scl) else 0.0)
        val = sum(
            math.log2(1.0 + float(np.real(h.conj() @ (wc1 @ h))) / cfg.noise_iod)
            for h in channels.iod_channels
        )
        if best_single is None or val > best_single[0]:
            best_single = (val, wc1)
    val_combo = sum(
        math.log2(1.0 + float(np.real(h.conj() @ (w_c @ h))) / cfg.noise_iod)
        for h in channels.iod_channels
    )
    if best_single is not None and best_single[0] > val_combo:
        w_c = best_single[1]

    # AN fill: leftover power, shaped like the saddle's AN slack
    used2 = used + np.real(np.diag(w_c))
    room = np.maximum(p - used2, 0.0)
    bvb = channels.v0 @ der["b"] @ channels.v0.conj().T
    diag_b = np.real(np.diag(bvb))
    if np.max(diag_b) > 0:
        beta = float(np.min(np.where(diag_b > 1e-18 * np.max(diag_b),
                                     room / np.maximum(diag_b, 1e-300), np.inf)))
        if not np.isfinite(beta):
            beta = 0.0
    else:
        beta = 0.0
    b_an = beta * der["b"]

    sol = BeamformingSolution(
        w_common=w_c,
        w_private=w_private,
        b_an=b_an,
        v0=channels.v0,
        gamma_e=float(data.gamma_e),
        meta={},
    )
    sol.finalize()
    xi = compute_xi(cfg.secrecy_prob, cfg.n_eves, data.gamma_e, cfg.noise_eve, n)
    margins = []
    for kk in range(k):
        others = [w_c] + [w for i, w in enumerate(w_private) if i != kk]
        margins.append(
            lmi_margin(w_private[kk], others, b_an, channels.v0, data.gamma_e, xi)
        )
    sol.meta["lmi_verification_margin"] = margins
    return sol


