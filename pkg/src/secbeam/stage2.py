"""Eve-SINR cap optimization through the Lagrange dual of the cap-minimization
subproblem, solved with a quasi-Newton (BFGS) iteration, plus the closed-form
cap recovery and a generalized-eigenvalue oracle used as the convention-free
correctness reference.

The printed dual of the cap subproblem is maximized over a positive
semidefinite factor parameterization with the scale pinned by the
normalization sum_k Tr(Psi_k W_k) = -1; on that slice its value equals
log2(Gamma_e*) and the stationary-point recovery reproduces the oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .metrics import BeamformingSolution, extract_rank1
from .scenario import SystemConfig
from .secrecy_stats import phi_inv
from .stage1 import run_algorithm1

LN2 = math.log(2.0)


class DualDomainError(ValueError):
    """The implicit constraint -sum Tr(Psi_k Pi_k) > 0 is violated."""


class LineSearchError(RuntimeError):
    pass


def build_pi(w_common, w_private, b_an, v0, cfg: SystemConfig):
    """Pi_k = Phi_N^{-1}(1 - kappa^{1/Q}) sigma_e^2 I + sum_{i != k} W_i + V0 B V0^H.

    Strictly positive definite thanks to the noise-floor identity term.
    """
    n = cfg.n_antennas
    base = phi_inv(1.0 - cfg.secrecy_prob ** (1.0 / cfg.n_eves), n) * cfg.noise_eve * np.eye(n)
    an = v0 @ b_an @ v0.conj().T if b_an.size else 0.0
    total = w_common + sum(w_private) + an
    pis = []
    for k in range(len(w_private)):
        pis.append(base + total - w_private[k])
    return pis


def _tr(a, b):
    return float(np.real(np.trace(a @ b)))


def dual_value(psis, pis, ws):
    """-log2(-sum Tr(Psi Pi)) - sum Tr(Psi W) - 1 on the dual domain."""
    s = sum(_tr(p, q) for p, q in zip(psis, pis))
    if -s <= 0:
        raise DualDomainError("need -sum Tr(Psi Pi) > 0")
    return -math.log2(-s) - sum(_tr(p, w) for p, w in zip(psis, ws)) - 1.0


def dual_gradient(psis, pis, ws):
    """grad_{Psi_k} = Pi_k / (t ln2) - W_k with t = -sum Tr(Psi Pi)."""
    t = -sum(_tr(p, q) for p, q in zip(psis, pis))
    if t <= 0:
        raise DualDomainError("need -sum Tr(Psi Pi) > 0")
    return [pi / (t * LN2) - w for pi, w in zip(pis, ws)]


def recover_gamma_e(psis, pis):
    """Closed-form cap Gamma_e = -1 / sum Tr(Psi_k Pi_k)."""
    s = sum(_tr(p, q) for p, q in zip(psis, pis))
    if -s <= 0:
        raise DualDomainError("need -sum Tr(Psi Pi) > 0")
    return -1.0 / s


def gamma_e_oracle(pis, ws):
    """Minimal feasible cap: max_k lambda_max(Pi_k^{-1/2} W_k Pi_k^{-1/2})."""
    best = 0.0
    for pi, w in zip(pis, ws):
        vals = sla.eigh(
            0.5 * (w + w.conj().T), 0.5 * (pi + pi.conj().T), eigvals_only=True
        )
        best = max(best, float(vals[-1]))
    return best


# ---------------------------------------------------------------------------
# quasi-Newton engine (inverse-Hessian surrogate, exact line search)


@dataclass
class DualState:
    """BFGS state: per-block inverse-Hessian surrogates and last iterate data."""

    x: np.ndarray
    x_mats: list  # inverse-Hessian surrogate per block
    blocks: list  # slices into x
    grad: np.ndarray | None = None
    last_step: np.ndarray | None = None  # Lambda
    last_grad_diff: np.ndarray | None = None  # Xi
    iterations: int = 0
    skipped_updates: int = 0
    values: list = field(default_factory=list)


def _golden_max(f, lo, hi, tol=1e-10, iters=200):
    """Golden-section maximization on [lo, hi]."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if b - a < tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def exact_line_search(f, in_domain, x, direction, init=1.0, dgrad=None):
    """nu = argmax_{nu >= 0} f(x + nu d) restricted to the domain: shrink the
    probe into the domain, expand a rising bracket, golden-section refine,
    then polish (secant on the directional derivative when available)."""

    def fv(nu):
        y = x + nu * direction
        if not in_domain(y):
            return -np.inf
        return f(y)

    step = init
    while step > 1e-14 and not np.isfinite(fv(step)):
        step *= 0.5
    if step <= 1e-14:
        raise LineSearchError("no domain-feasible step along the search direction")
    f0, f_step = fv(0.0), fv(step)
    if f_step < f0:
        lo, hi = 0.0, step
    else:
        prev, cur, f_cur = 0.0, step, f_step
        while cur < 1e12:
            nxt = cur * 2.0
            f_nxt = fv(nxt)
            if not np.isfinite(f_nxt) or f_nxt <= f_cur:
                break
            prev, cur, f_cur = cur, nxt, f_nxt
        lo, hi = prev, cur * 2.0
        if not np.isfinite(fv(hi)):
            # bisect the domain wall between the last feasible point and hi
            good, bad = cur, hi
            for _ in range(80):
                mid = 0.5 * (good + bad)
                if np.isfinite(fv(mid)):
                    good = mid
                else:
                    bad = mid
            hi = good
    nu = _golden_max(fv, lo, hi)
    if dgrad is not None:
        # secant iteration on phi'(nu) = grad(x + nu d)^T d; exact on quadratics
        def dphi(nu_):
            y = x + nu_ * direction
            if not in_domain(y):
                return None
            return float(np.asarray(dgrad(y)) @ direction)

        nu_a, nu_b = nu, nu * (1.0 + 1e-4) + 1e-12
        da, db = dphi(nu_a), dphi(nu_b)
        for _ in range(4):
            if da is None or db is None or abs(db - da) < 1e-300:
                break
            nu_new = nu_b - db * (nu_b - nu_a) / (db - da)
            if not (np.isfinite(nu_new) and nu_new > 0):
                break
            d_new = dphi(nu_new)
            if d_new is None:
                break
            nu_a, da = nu_b, db
            nu_b, db = nu_new, d_new
            if abs(d_new) < 1e-14 * (1.0 + abs(da or 0.0)):
                break
        # accept on first-order optimality: value comparisons drown in
        # rounding noise this close to the maximizer
        d_old = dphi(nu)
        if db is not None and np.isfinite(fv(nu_b)) and (
            d_old is None or abs(db) <= abs(d_old)
        ):
            nu = nu_b
    else:
        # parabolic polish through three points
        for _ in range(2):
            delta = max(1e-5 * (abs(nu) + 1e-5), 1e-10)
            f_m, f_c, f_p = fv(nu - delta), fv(nu), fv(nu + delta)
            if not (np.isfinite(f_m) and np.isfinite(f_p)):
                break
            denom = f_m - 2.0 * f_c + f_p
            if denom >= -1e-300:
                break
            cand = nu + 0.5 * delta * (f_m - f_p) / denom
            if cand > 0 and np.isfinite(fv(cand)) and fv(cand) >= f_c:
                nu = cand
            else:
                break
    return nu if fv(nu) >= f0 else 0.0


def bfgs_update(x_mat, lam, xi):
    """Inverse-Hessian update in its rank-two outer-product form.

    lam is the accepted step, xi the gradient difference of the minimized
    function; returns (updated matrix, applied flag). Skipped when the
    curvature product Tr(Lambda Xi) is not positive."""
    curv = float(lam @ xi)
    if curv <= 1e-14 * (np.linalg.norm(lam) * np.linalg.norm(xi) + 1e-300):
        return x_mat, False
    xxi = x_mat @ xi
    coef = (curv + float(xi @ xxi)) / (curv * curv)
    x_new = x_mat + coef * np.outer(lam, lam)
    x_new -= (np.outer(xxi, lam) + np.outer(lam, xxi)) / curv
    return x_new, True


def bfgs_maximize(f, grad, x0, blocks=None, eps=1e-6, max_iters=500, in_domain=None):
    """Maximize f with per-block BFGS inverse-Hessian surrogates, an exact
    (bracketing + golden section) line search and the squared-step stopping
    rule; skips updates on non-positive curvature so the surrogates stay PD."""
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    if blocks is None:
        blocks = [slice(0, n)]
    if in_domain is None:
        in_domain = lambda _: True
    state = DualState(
        x=x, x_mats=[np.eye(s.stop - s.start) for s in blocks], blocks=list(blocks)
    )
    g = np.asarray(grad(x))
    state.values.append(f(x))
    for it in range(1, max_iters + 1):
        direction = np.zeros(n)
        for s, xm in zip(blocks, state.x_mats):
            direction[s] = xm @ g[s]
        if not np.any(direction):
            break
        nu = exact_line_search(f, in_domain, x, direction, dgrad=grad)
        lam = nu * direction
        x_new = x + lam
        g_new = np.asarray(grad(x_new))
        xi = -(g_new - g)  # gradient difference of the minimized -f
        for bi, s in enumerate(blocks):
            state.x_mats[bi], applied = bfgs_update(state.x_mats[bi], lam[s], xi[s])
            if not applied:
                state.skipped_updates += 1
        x, g = x_new, g_new
        state.x = x
        state.grad = g
        state.last_step = lam
        state.last_grad_diff = xi
        state.iterations = it
        state.values.append(f(x))
        if float(lam @ lam) < eps:
            break
        if float(g @ g) < 1e-24:
            break
    return state


# ---------------------------------------------------------------------------
# cap update via the normalized dual slice


def solve_dual(pis, ws, eps=1e-12, max_iters=1000, seed=0, restarts=2):
    """Maximize the dual over Psi_k = -Z_k / scale with Z_k = L_k L_k^H.

    The dual's value is a ratio of sums over the streams, so its maximum is
    always attained with all mass on a single stream; each stream is
    maximized independently by BFGS on its factor (avoiding the spurious
    stationary manifold where a factor collapses to zero in a joint ascent)
    and the best stream is kept.  On the trace-normalized slice the printed
    dual value and the closed-form recovery reproduce the
    generalized-eigenvalue optimum."""
    k = len(pis)
    n = pis[0].shape[0]
    dl = 2 * n * n
    rng = np.random.default_rng(seed)

    def single(idx):
        w, pi = ws[idx], pis[idx]

        def unpack(x):
            return x[: n * n].reshape(n, n) + 1j * x[n * n :].reshape(n, n)

        def ratio(x):
            l = unpack(x)
            z = l @ l.conj().T
            return _tr(z, w) / _tr(z, pi)

        def in_domain(x):
            l = unpack(x)
            return _tr(l @ l.conj().T, pi) > 1e-300

        def grad(x):
            l = unpack(x)
            z = l @ l.conj().T
            den = _tr(z, pi)
            r = _tr(z, w) / den
            gc = (2.0 / den) * ((w - r * pi) @ l)
            return np.concatenate([gc.real.reshape(-1), gc.imag.reshape(-1)])

        best = None
        for _ in range(restarts):
            l0 = np.eye(n) + 0.05 * (
                rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            )
            x0 = np.concatenate([l0.real.reshape(-1), l0.imag.reshape(-1)])
            state = bfgs_maximize(ratio, grad, x0, eps=eps, max_iters=max_iters,
                                  in_domain=in_domain)
            r = ratio(state.x)
            if best is None or r > best[0]:
                best = (r, state)
        return best

    results = [single(i) for i in range(k)]
    best_idx = int(np.argmax([r for r, _ in results]))
    r_best, state = results[best_idx]
    l = state.x[: n * n].reshape(n, n) + 1j * state.x[n * n :].reshape(n, n)
    z = l @ l.conj().T
    scale = _tr(z, ws[best_idx])
    if scale <= 0:
        raise DualDomainError("dual factor collapsed; private covariance zero?")
    psis = [np.zeros((n, n), dtype=complex) for _ in range(k)]
    psis[best_idx] = -z / scale
    return psis, state


def canonicalize(sol: BeamformingSolution, channels: ChannelSet):
    """Split the solution into physically meaningful parts: rank-one stream
    beams restricted to the IoD-channel span plus an AN block that absorbs
    every bit of null-space power the streams carried.

    IoD-side inner products (hence all IoD SINRs) are untouched; the result
    is used for the cap certificate, not carried forward as an iterate.
    """
    q, _ = np.linalg.qr(channels.h_tot)
    proj = q @ q.conj().T
    v0 = channels.v0

    def clean(w):
        vec, _ = extract_rank1(w)
        vec = proj @ vec
        return np.outer(vec, vec.conj())

    w_c = clean(sol.w_common)
    w_p = [clean(w) for w in sol.w_private]
    total = sol.w_common + sum(sol.w_private)
    b_lump = sol.b_an + v0.conj().T @ total @ v0
    return w_c, w_p, b_lump


# ---------------------------------------------------------------------------
# Algorithm 2: alternate the MM design with the cap update


def run_algorithm2(channels: ChannelSet, cfg: SystemConfig, an=True, trace=None,
                   mm_eps=None, outer_rel_tol=1e-3, search_probes=7,
                   probe_eps=None, refine=True):
    """Two-stage cap optimization.

    Phase one alternates the MM design with the dual-certificate cap update:
    the minimal cap the current (canonicalized) design satisfies.  That
    descends quickly to the activity envelope, where it is a fixed point, so
    phase two performs the one-dimensional search over the cap that the
    outer problem calls for: golden-section on log(cap), each probe scored
    by a warm-started design solve.  The returned solution is the best
    focused-secrecy-sum-rate iterate seen anywhere."""
    from . import metrics  # local import to avoid a cycle at module load

    gamma = cfg.gamma_e_init
    sol, mm = run_algorithm1(channels, cfg, gamma, an=an, trace=trace, eps=mm_eps)
    anchor = sol.meta.get("warm_x")
    fssr = metrics.fssr_objective(sol, channels, gamma, cfg.noise_iod)
    history = [(gamma, fssr)]
    dual_info = {}
    best = (fssr, sol, gamma)
    for outer in range(1, cfg.max_outer_iters + 1):
        # The cap certificate must see the actual beams, not the interior
        # point's artefacts: the threshold xi sits far below the barrier
        # floor and private beams can ride the cap by mutually covered
        # null-space tilt (jamming smuggled outside the AN block).
        # Canonicalize first: rank-one beams projected onto the IoD span
        # (IoD-side products are unchanged), all null-space stream power
        # folded into the AN coverage.
        w_clean_c, w_clean_p, b_lump = canonicalize(sol, channels)
        w_rank1 = w_clean_p
        pis = build_pi(w_clean_c, w_clean_p, b_lump, sol.v0, cfg)
        psis, dstate = solve_dual(pis, w_rank1, seed=cfg.rng_seed + outer)
        gamma_new = recover_gamma_e(psis, pis)
        oracle = gamma_e_oracle(pis, w_rank1)
        dual_info = {
            "bfgs_iterations": dstate.iterations,
            "gamma_bfgs": gamma_new,
            "gamma_oracle": oracle,
            "dual_value": dual_value(psis, pis, w_rank1),
        }
        if not np.isfinite(gamma_new) or gamma_new <= 0:
            gamma_new = oracle
        rel = abs(gamma_new - gamma) / max(gamma, 1e-300)
        if trace is not None:
            trace.append(("algorithm2", outer, fssr, rel))
        if rel < outer_rel_tol:
            gamma = gamma_new
            break
        attempt = gamma_new
        for _ in range(4):
            try:
                sol_new, mm = run_algorithm1(channels, cfg, attempt, an=an,
                                             warm_x=anchor, anchor_x=anchor,
                                             trace=trace, eps=mm_eps)
                break
            except Exception:
                # overshot into infeasibility; back off geometrically
                attempt = math.sqrt(attempt * gamma)
        else:
            break
        gamma = attempt
        sol = sol_new
        anchor = sol.meta.get("warm_x")
        fssr = metrics.fssr_objective(sol, channels, gamma, cfg.noise_iod)
        history.append((gamma, fssr))
        if fssr > best[0]:
            best = (fssr, sol, gamma)

    # phase two: one-dimensional search over the cap below the envelope.
    # Probes run coarse (loose MM tolerance, warm anchors carried downward);
    # the winner is re-solved at full tolerance afterwards.
    cache = {}
    anchor_box = {"x": anchor}
    eps_probe = probe_eps if probe_eps is not None else max(cfg.tol_eps1, 1e-4)

    def score(log_g, eps=None):
        g = math.exp(log_g)
        key = round(log_g, 12)
        if key in cache:
            return cache[key][0]
        try:
            s, _ = run_algorithm1(channels, cfg, g, an=an, warm_x=anchor_box["x"],
                                  anchor_x=anchor_box["x"], trace=trace,
                                  eps=eps if eps is not None else eps_probe)
            f = metrics.fssr_objective(s, channels, g, cfg.noise_iod)
            if s.meta.get("warm_x") is not None:
                anchor_box["x"] = s.meta.get("warm_x")
        except Exception:
            s, f = None, -np.inf
        cache[key] = (f, s, g)
        history.append((g, f))
        return f

    hi = math.log(gamma)
    lo = hi + math.log(1e-3)
    probes = np.linspace(hi, lo, search_probes)  # descending: anchors stay close
    vals = [score(p) for p in probes]
    i_best = int(np.argmax(vals))
    if refine and np.isfinite(vals[i_best]):
        a = probes[min(i_best + 1, len(probes) - 1)]
        b = probes[max(i_best - 1, 0)]
        eps_fine = mm_eps if mm_eps is not None else cfg.tol_eps1
        fine_cache = {}

        def score_fine(log_g):
            key = round(log_g, 12)
            if key in fine_cache:
                return fine_cache[key][0]
            g = math.exp(log_g)
            try:
                s, _ = run_algorithm1(channels, cfg, g, an=an,
                                      warm_x=anchor_box["x"], anchor_x=anchor_box["x"],
                                      trace=trace, eps=eps_fine)
                f = metrics.fssr_objective(s, channels, g, cfg.noise_iod)
                if s.meta.get("warm_x") is not None:
                    anchor_box["x"] = s.meta.get("warm_x")
            except Exception:
                s, f = None, -np.inf
            fine_cache[key] = (f, s, g)
            history.append((g, f))
            return f

        g_star = _golden_max(score_fine, min(a, b), max(a, b),
                             tol=max(outer_rel_tol, 1e-6), iters=60)
        score_fine(g_star)
        # coarse probe noise must not decide the winner: re-score the best
        # coarse candidates at the fine tolerance before comparing
        for _, _, g_cand in sorted(cache.values(), key=lambda v: -v[0])[:2]:
            score_fine(math.log(g_cand))
        merged = fine_cache
    else:
        merged = cache
    if merged:
        f_c, s_c, g_c = max(merged.values(), key=lambda v: v[0])
        if s_c is not None and f_c > best[0]:
            best = (f_c, s_c, g_c)

    fssr, sol, gamma = best
    sol.gamma_e = float(gamma)
    sol.meta["fssr_history"] = history
    sol.meta["dual"] = dual_info
    sol.meta["solver"] = "two_stage"
    return sol
