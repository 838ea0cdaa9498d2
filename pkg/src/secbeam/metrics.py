"""Rates, SINRs, the focused secrecy sum-rate objective, the Monte-Carlo
system secrecy sum-rate, and rank-one beamformer extraction.

All SINRs are evaluated in covariance form, which is exact for Gaussian
signalling and invariant to the beamformers' global phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, sample_eve_channels
from .scenario import SystemConfig


def _quad(h, m):
    """Real quadratic form h^H M h."""
    return float(np.real(h.conj() @ (m @ h)))


@dataclass
class BeamformingSolution:
    """Transmit covariances (common, private, AN) plus extracted beamformers."""

    w_common: np.ndarray  # N x N Hermitian PSD
    w_private: list[np.ndarray]  # K of N x N Hermitian PSD
    b_an: np.ndarray  # (N-K) x (N-K) Hermitian PSD (possibly empty)
    v0: np.ndarray  # N x (N-K)
    gamma_e: float
    objective_trace: list[float] = field(default_factory=list)
    w_common_vec: np.ndarray | None = None  # extracted rank-one beamformers
    w_private_vecs: list[np.ndarray] | None = None
    rank_gaps: list[float] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def an_covariance(self):
        if self.b_an.size == 0:
            return np.zeros((self.w_common.shape[0],) * 2, dtype=complex)
        return self.v0 @ self.b_an @ self.v0.conj().T

    def all_covariances(self):
        return [self.w_common] + list(self.w_private)

    def per_antenna_power(self):
        tot = sum(np.real(np.diag(w)) for w in self.all_covariances())
        return tot + np.real(np.diag(self.an_covariance()))

    def finalize(self, rank_tol=1e-3, rng=None):
        """Extract rank-one beamformers and record the rank-one gaps."""
        self.rank_gaps = [rank_one_gap(w) for w in self.all_covariances()]
        self.w_common_vec, _ = extract_rank1(self.w_common)
        self.w_private_vecs = [extract_rank1(w)[0] for w in self.w_private]
        return self


@dataclass
class SinrReport:
    common: list[float]  # gamma_c per receiver
    private: list[list[float]]  # gamma_p per receiver per stream k


def iod_sinrs(sol: BeamformingSolution, channels: ChannelSet, sigma_u2):
    """Per-IoD (gamma_c, gamma_p) with SIC: common decoded against all private
    streams plus AN; private k decoded against the other private streams."""
    an = sol.an_covariance()
    out = []
    for k, h in enumerate(channels.iod_channels):
        sig_c = _quad(h, sol.w_common)
        priv = [_quad(h, w) for w in sol.w_private]
        an_pow = _quad(h, an)
        gamma_c = sig_c / (sum(priv) + an_pow + sigma_u2)
        gamma_p = priv[k] / (sum(priv) - priv[k] + an_pow + sigma_u2)
        out.append((gamma_c, gamma_p))
    return out


def eve_sinrs(sol: BeamformingSolution, eve_channels, sigma_e2) -> SinrReport:
    """Eve SINRs: every stream (common and private) interferes with the rest."""
    an = sol.an_covariance()
    covs = sol.all_covariances()
    common, private = [], []
    for h in np.atleast_2d(eve_channels):
        powers = [_quad(h, w) for w in covs]  # [common, p_1..p_K]
        an_pow = _quad(h, an)
        total = sum(powers) + an_pow + sigma_e2
        common.append(powers[0] / (total - powers[0]))
        private.append([p / (total - p) for p in powers[1:]])
    return SinrReport(common=common, private=private)


def fssr_objective(sol: BeamformingSolution, channels: ChannelSet, gamma_e, sigma_u2):
    """Focused secrecy sum-rate: sum_k log2(1+gamma_c,k) - K log2(1+Gamma_e)."""
    if gamma_e < 0:
        raise ValueError("gamma_e must be non-negative")
    rates = [math.log2(1.0 + gc) for gc, _ in iod_sinrs(sol, channels, sigma_u2)]
    return sum(rates) - len(rates) * math.log2(1.0 + gamma_e)


def sum_common_rate(sol, channels, sigma_u2):
    return sum(math.log2(1.0 + gc) for gc, _ in iod_sinrs(sol, channels, sigma_u2))


def ssr_of_draw(sol: BeamformingSolution, channels: ChannelSet, eves, cfg: SystemConfig):
    """System secrecy sum-rate of one Eve draw (the zero branch applies when
    any private SINR target fails, which is Eve-independent)."""
    iod = iod_sinrs(sol, channels, cfg.noise_iod)
    for (_, gp), target in zip(iod, cfg.sinr_targets):
        if gp < target * (1.0 - 1e-9):
            return 0.0
    rep = eve_sinrs(sol, eves, cfg.noise_eve)
    total = 0.0
    for k, (gc, _) in enumerate(iod):
        r_ck = math.log2(1.0 + gc)
        worst = 0.0
        for q in range(len(rep.common)):
            r_ce = math.log2(1.0 + rep.common[q])
            r_pe = math.log2(1.0 + rep.private[q][k])
            worst = max(worst, min(r_ce, r_pe))
        total += r_ck - worst
    return max(total, 0.0)


def system_ssr(sol, channels, cfg: SystemConfig, trials, rng=None, seed=None):
    """Average Eq.-42 secrecy sum-rate over `trials` independent Eve draws."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed if seed is None else seed)
    n = cfg.n_antennas
    vals = []
    for _ in range(trials):
        eves = sample_eve_channels(rng, cfg.n_eves, n)
        vals.append(ssr_of_draw(sol, channels, eves, cfg))
    return float(np.mean(vals))


def rank_one_gap(w):
    tr = float(np.real(np.trace(w)))
    if tr <= 1e-300:
        return 0.0
    lam = float(np.linalg.eigvalsh(0.5 * (w + w.conj().T))[-1])
    return (tr - lam) / tr


def extract_rank1(w):
    """Principal component w = sqrt(lam_max) u_max and the rank-one gap."""
    ws = 0.5 * (w + w.conj().T)
    vals, vecs = np.linalg.eigh(ws)
    lam = max(vals[-1], 0.0)
    vec = vecs[:, -1] * math.sqrt(lam)
    tr = float(np.real(np.trace(ws)))
    gap = (tr - lam) / max(tr, 1e-300)
    return vec, gap


def randomized_rank1(w, feasible, objective, rng, candidates=100):
    """Gaussian-randomization fallback when the principal component is poor:
    draw candidates from CN(0, W), keep the best feasible one."""
    vec, gap = extract_rank1(w)
    best, best_val = None, -np.inf
    if feasible(vec):
        best, best_val = vec, objective(vec)
    ws = 0.5 * (w + w.conj().T)
    vals, vecs = np.linalg.eigh(ws)
    vals = np.clip(vals, 0.0, None)
    root = vecs @ np.diag(np.sqrt(vals)) @ vecs.conj().T
    n = w.shape[0]
    for _ in range(candidates):
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
        cand = root @ z
        # rescale to the original power
        nrm = np.linalg.norm(cand)
        if nrm > 0:
            cand = cand * math.sqrt(max(np.trace(ws).real, 0.0)) / nrm
        if feasible(cand):
            val = objective(cand)
            if val > best_val:
                best, best_val = cand, val
    return (best if best is not None else vec), gap
