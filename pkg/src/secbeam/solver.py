"""Dense log-barrier Newton solver for the convex subproblems that arise in
the beamformer designs.

Problem class (maximization over Hermitian PSD blocks X_1..X_B, some of
which may be 1x1 scalars):

    max  sum_j c_j ln(a_j^T x + b_j) + q^T x
    s.t. xi_l I - sum_b coef T_b X_b T_b^H >= 0      (LMIs)
         a_r^T x <= u_r                              (linear rows)
         X_b >= 0                                    (PSD blocks)

where x is the stacked real vectorization (hvec) of the blocks.  The
barrier subproblems are solved by damped Newton with explicit dense
Hessians; the path parameter grows geometrically until the duality-gap
bound (total barrier degree / t) is below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .hermitian import hvec, unhvec, pair_hessian

_JITTER = 1e-10


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    """Phase-I certified that no strictly feasible point exists."""


class MaxIterationsError(SolverError):
    pass


class NumericalError(SolverError):
    """Newton system factorization failed beyond the regularized retry."""


@dataclass
class LMISpec:
    """xi * I_m - sum of coef * (T X_b T^H) must stay PSD.

    terms: list of (block index, coef, t) where t is None (identity, block
    dim m), an m x n_b matrix, or "scalar" for a 1x1 block entering as x*I_m.
    """

    xi: float
    m: int
    terms: list


@dataclass
class SDPProblem:
    block_dims: list[int]
    block_psd: list[bool] | None = None
    log_terms: list = field(default_factory=list)  # (coef, a, offset)
    q: np.ndarray | None = None
    lmis: list[LMISpec] = field(default_factory=list)
    lin_rows: list = field(default_factory=list)  # (a, ub)

    def __post_init__(self):
        if self.block_psd is None:
            self.block_psd = [True] * len(self.block_dims)
        self.offsets = np.cumsum([0] + [d * d for d in self.block_dims])
        self.n = int(self.offsets[-1])

    # -- x <-> matrices ---------------------------------------------------
    def split(self, x):
        return [
            unhvec(x[self.offsets[b] : self.offsets[b + 1]])
            for b in range(len(self.block_dims))
        ]

    def join(self, mats):
        return np.concatenate([hvec(m) for m in mats])

    def block_slice(self, b):
        return slice(int(self.offsets[b]), int(self.offsets[b + 1]))

    def barrier_degree(self):
        nu = sum(lmi.m for lmi in self.lmis) + len(self.lin_rows)
        nu += sum(d for d, psd in zip(self.block_dims, self.block_psd) if psd)
        return nu

    # -- evaluation --------------------------------------------------------
    def objective(self, x):
        val = 0.0 if self.q is None else float(self.q @ x)
        for coef, a, off in self.log_terms:
            v = float(a @ x) + off
            if v <= 0:
                return -np.inf
            val += coef * np.log(v)
        return val

    def lmi_slack(self, x, lmi: LMISpec, mats=None):
        if mats is None:
            mats = self.split(x)
        s = lmi.xi * np.eye(lmi.m, dtype=complex)
        for b, coef, t in lmi.terms:
            xb = mats[b]
            if t is None:
                s -= coef * xb
            elif isinstance(t, str):  # scalar identity
                s -= coef * float(np.real(xb[0, 0])) * np.eye(lmi.m)
            else:
                s -= coef * (t @ xb @ t.conj().T)
        return 0.5 * (s + s.conj().T)

    def constraint_margins(self, x):
        """(inequality margins, psd margins); all must be >= 0 when feasible."""
        mats = self.split(x)
        ineq, psd_m = [], []
        for lmi in self.lmis:
            ineq.append(float(np.linalg.eigvalsh(self.lmi_slack(x, lmi, mats))[0]))
        for a, ub in self.lin_rows:
            ineq.append(float(ub - a @ x))
        for b, (d, psd) in enumerate(zip(self.block_dims, self.block_psd)):
            if psd:
                psd_m.append(float(np.linalg.eigvalsh(0.5 * (mats[b] + mats[b].conj().T))[0]))
        return np.array(ineq), np.array(psd_m)

    def in_domain(self, x):
        mats = self.split(x)
        for b, psd in enumerate(self.block_psd):
            if psd and not _chol_ok(mats[b]):
                return False
        for lmi in self.lmis:
            if not _chol_ok(self.lmi_slack(x, lmi, mats)):
                return False
        for a, ub in self.lin_rows:
            if float(a @ x) >= ub:
                return False
        for coef, a, off in self.log_terms:
            if float(a @ x) + off <= 0:
                return False
        return True


def _chol_ok(m):
    try:
        np.linalg.cholesky(0.5 * (m + m.conj().T))
        return True
    except np.linalg.LinAlgError:
        return False


def _lmi_grad_hess(prob: SDPProblem, lmi: LMISpec, mats, grad, hess):
    """Add gradient/Hessian of -ln det(S) for one LMI."""
    s = prob.lmi_slack(None, lmi, mats)
    sinv = np.linalg.inv(s)
    sinv = 0.5 * (sinv + sinv.conj().T)
    # gradient: d(-lndet S)/dX_b = coef * T^H Sinv T
    for b, coef, t in lmi.terms:
        sl = prob.block_slice(b)
        if t is None:
            grad[sl] += coef * hvec(sinv)
        elif isinstance(t, str):
            grad[sl] += coef * np.real(np.trace(sinv))
        else:
            grad[sl] += coef * hvec(t.conj().T @ sinv @ t)
    # Hessian: pairwise congruence forms through Sinv.  Pairs with identical
    # transforms (e.g. every W-W pair) share one pair_hessian evaluation.
    def tkey(t):
        return "I" if t is None else ("s" if isinstance(t, str) else id(t))

    cache = {}
    nt = len(lmi.terms)
    for i in range(nt):
        bi, ci, ti = lmi.terms[i]
        sli = prob.block_slice(bi)
        for j in range(i, nt):
            bj, cj, tj = lmi.terms[j]
            slj = prob.block_slice(bj)
            key = (tkey(ti), tkey(tj))
            base = cache.get(key)
            if base is None:
                base = _pair_block(prob, sinv, bi, ti, bj, tj)
                cache[key] = base
            blk = base * (ci * cj)
            hess[sli, slj] += blk
            if i != j:
                hess[slj, sli] += blk.T
    return s, sinv


def _pair_block(prob, sinv, bi, ti, bj, tj):
    """Hessian block Re Tr(G (P F P^H)) with P = Ti^H Sinv Tj over hvec bases."""
    di, dj = prob.block_dims[bi], prob.block_dims[bj]
    scalar_i = isinstance(ti, str)
    scalar_j = isinstance(tj, str)
    if scalar_i and scalar_j:
        return np.array([[np.real(np.trace(sinv @ sinv))]])
    if scalar_i or scalar_j:
        # row (or column) against a matrix block: entries hvec(T^H Sinv Sinv T)
        t = tj if scalar_i else ti
        d = dj if scalar_i else di
        s2 = sinv @ sinv
        m = s2 if t is None else t.conj().T @ s2 @ t
        v = hvec(0.5 * (m + m.conj().T))
        return v[None, :] if scalar_i else v[:, None]
    if ti is None and tj is None:
        p = sinv
    elif ti is None:
        p = sinv @ tj
    elif tj is None:
        p = ti.conj().T @ sinv
    else:
        p = ti.conj().T @ sinv @ tj
    return pair_hessian(p, di, dj)


def _barrier_grad_hess(prob: SDPProblem, x, t_path):
    """Gradient and Hessian of psi_t(x) = -t f(x) + barriers (minimized)."""
    n = prob.n
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    mats = prob.split(x)

    # objective part
    if prob.q is not None:
        grad -= t_path * prob.q
    for coef, a, off in prob.log_terms:
        v = float(a @ x) + off
        grad -= t_path * coef * a / v
        hess += t_path * coef * np.outer(a, a) / (v * v)

    # linear-row barriers
    for a, ub in prob.lin_rows:
        slack = float(ub - a @ x)
        grad += a / slack
        hess += np.outer(a, a) / (slack * slack)

    # PSD block barriers
    for b, (d, psd) in enumerate(zip(prob.block_dims, prob.block_psd)):
        if not psd:
            continue
        sl = prob.block_slice(b)
        xinv = np.linalg.inv(mats[b])
        xinv = 0.5 * (xinv + xinv.conj().T)
        grad[sl] -= hvec(xinv)
        hess[sl, sl] += pair_hessian(xinv, d, d)

    # LMI barriers (gradient sign: -lndet of slack that shrinks with X)
    for lmi in prob.lmis:
        _lmi_grad_hess(prob, lmi, mats, grad, hess)
    return grad, hess


def solve_barrier(
    prob: SDPProblem,
    x0,
    t0=1.0,
    mu=10.0,
    gap_tol=3e-8,
    inner_tol=1e-12,
    max_newton=2000,
    callback=None,
):
    """Barrier method from a strictly feasible x0; returns (x, info)."""
    x = np.asarray(x0, dtype=float).copy()
    if not prob.in_domain(x):
        raise SolverError("initial point is not strictly feasible")
    nu = prob.barrier_degree()
    t_path = float(t0)
    newton_total = 0
    while True:
        # centering at fixed t (damped Newton, pure phase once decrement small)
        for _ in range(60):
            if newton_total >= max_newton:
                raise MaxIterationsError(f"barrier solve exceeded {max_newton} Newton steps")
            grad, hess = _barrier_grad_hess(prob, x, t_path)
            step = _solve_newton(hess, -grad)
            decrement = float(-grad @ step)
            if decrement < 0:  # numerical loss of convexity; regularize
                step = _solve_newton(hess + 1e-8 * np.eye(prob.n), -grad)
                decrement = float(-grad @ step)
                if decrement < 0:
                    raise NumericalError("Newton direction is not a descent direction")
            newton_total += 1
            if decrement * 0.5 <= inner_tol:
                break
            s = 1.0
            while s > 1e-14 and not prob.in_domain(x + s * step):
                s *= 0.5
            if decrement > 0.05:
                # damped phase: Armijo on the barrier objective (changes are
                # large here, so its floating-point noise is irrelevant)
                phi0 = _psi(prob, x, t_path)
                while s > 1e-14:
                    if _psi(prob, x + s * step, t_path) <= phi0 - 0.25 * s * decrement:
                        break
                    s *= 0.5
            if s <= 1e-14:
                break  # stalled; accept current center
            x = x + s * step
        if callback is not None:
            callback(x, t_path)
        if nu / t_path < gap_tol:
            break
        t_path *= mu
    info = {
        "t_final": t_path,
        "newton_steps": newton_total,
        "gap_bound": nu / t_path,
        "final_decrement": max(float(decrement), 0.0),
    }
    return x, info


def _psi(prob, x, t_path):
    mats = prob.split(x)
    val = -t_path * prob.objective(x)
    if not np.isfinite(val):
        return np.inf
    for a, ub in prob.lin_rows:
        slack = float(ub - a @ x)
        if slack <= 0:
            return np.inf
        val -= np.log(slack)
    for b, psd in enumerate(prob.block_psd):
        if not psd:
            continue
        sgn, logdet = np.linalg.slogdet(mats[b])
        if sgn <= 0:
            return np.inf
        val -= logdet
    for lmi in prob.lmis:
        sgn, logdet = np.linalg.slogdet(prob.lmi_slack(x, lmi, mats))
        if sgn <= 0:
            return np.inf
        val -= logdet
    return float(val)


def _solve_newton(hess, rhs):
    # Jacobi equilibration keeps the factorization away from subnormals and
    # improves conditioning under the constraints' wildly different scales.
    d = np.sqrt(np.maximum(np.abs(np.diag(hess)), 1e-300))
    hs = hess / np.outer(d, d)
    rs = rhs / d
    try:
        c, low = sla.cho_factor(hs, check_finite=False)
        return sla.cho_solve((c, low), rs, check_finite=False) / d
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
        pass
    try:
        c, low = sla.cho_factor(hs + _JITTER * np.eye(len(rs)), check_finite=False)
        return sla.cho_solve((c, low), rs, check_finite=False) / d
    except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
        pass
    try:  # last resort: eigenvalue-floored solve
        vals, vecs = np.linalg.eigh(0.5 * (hs + hs.T))
        floor = max(vals[-1], 1.0) * 1e-14
        vals = np.maximum(vals, floor)
        return (vecs @ ((vecs.T @ rs) / vals)) / d
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Newton system factorization failed: {exc}") from exc


def kkt_residual(prob: SDPProblem, info):
    """Certified optimality-gap bound of the barrier solution (nats).

    For a self-concordant barrier this is the natural scalar KKT residual:
    the complementarity bound (barrier degree / t) plus the final Newton
    decrement, which together bound f* - f(x).  An infinity-norm
    stationarity vector would be meaningless under the wildly different
    scalings of the power, SINR and secrecy-LMI rows.
    """
    return prob.barrier_degree() / info["t_final"] + info.get("final_decrement", 0.0)


# ---------------------------------------------------------------------------
# phase I


def find_interior(prob: SDPProblem, scale=1.0, margin_frac=1e-3, max_newton=2000):
    """Strictly feasible point for `prob`, or raise InfeasibleError.

    Minimizes a single relaxation scalar u >= 0 added to every LMI and linear
    row until the incumbent blocks are strictly feasible for the original
    constraints with margin, using the same barrier machinery.
    """
    nb = len(prob.block_dims)
    aug_dims = prob.block_dims + [1]
    aug_psd = list(prob.block_psd) + [True]
    lmis = [
        LMISpec(lmi.xi, lmi.m, list(lmi.terms) + [(nb, -1.0, "scalar")]) for lmi in prob.lmis
    ]
    rows = []
    for a, ub in prob.lin_rows:
        a2 = np.concatenate([a, [-1.0]])
        rows.append((a2, ub))
    q = np.zeros(int(np.sum(np.array(aug_dims) ** 2)))
    q[-1] = -1.0  # maximize -u
    aug = SDPProblem(aug_dims, aug_psd, log_terms=[], q=q, lmis=lmis, lin_rows=rows)

    eps = scale * margin_frac
    mats0 = [np.eye(d) * eps for d in prob.block_dims]
    x_part = prob.join(mats0)
    ineq0, _ = prob.constraint_margins(x_part)
    worst = -float(ineq0.min()) if len(ineq0) else 0.0
    u0 = max(0.0, worst) + max(scale * 0.1, 1e-6)
    x = np.concatenate([x_part, [u0]])

    target = scale * margin_frac

    class _Found(Exception):
        pass

    holder = {}

    def check(xc, t_path):
        base = xc[:-1]
        ineq, psd_m = prob.constraint_margins(base)
        ineq_ok = (len(ineq) == 0) or (ineq.min() >= target)
        psd_ok = (len(psd_m) == 0) or (psd_m.min() > 0.0)
        if ineq_ok and psd_ok:
            holder["x"] = base
            raise _Found

    try:
        solve_barrier(aug, x, t0=1.0 / max(u0, 1e-12), mu=20.0, gap_tol=1e-10,
                      max_newton=max_newton, callback=check)
    except _Found:
        return holder["x"]
    except MaxIterationsError:
        pass
    raise InfeasibleError(
        "phase-I could not find a strictly feasible point (constraints are "
        "infeasible or have empty interior)"
    )
