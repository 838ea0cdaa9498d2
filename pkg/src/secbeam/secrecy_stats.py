"""Chance-constraint machinery: the inverse-chi-square quantile, the xi
constant that deterministically caps the Eve SINR with probability kappa,
and the resulting linear-matrix-inequality margin."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc

_TOL = 1e-12


def phi_cdf(y, n):
    """Forward c.d.f. Pr(1/X <= y) for X ~ Gamma(n, 1) (chi-square with 2n DoF, halved)."""
    if y <= 0:
        return 0.0
    # Pr(X >= 1/y) = Q(n, 1/y)
    return float(1.0 - gammainc(n, 1.0 / y))


def _gammainc_inv(n, p):
    """Inverse of the regularized lower incomplete gamma in its second argument.

    Bisection bracket followed by Newton polish on gammainc(n, x) = p; the
    derivative is the Gamma(n,1) density.
    """
    lo, hi = 0.0, max(4.0 * n, 10.0)
    while gammainc(n, hi) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ArithmeticError("gamma inverse bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gammainc(n, mid) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6 * max(1.0, hi):
            break
    x = 0.5 * (lo + hi)
    lognorm = math.lgamma(n)
    for _ in range(100):
        f = gammainc(n, x) - p
        if abs(f) < _TOL:
            break
        pdf = math.exp((n - 1.0) * math.log(x) - x - lognorm)
        if pdf <= 0:
            break
        step = f / pdf
        x_new = x - step
        if x_new <= lo or x_new >= hi:  # keep the bisection bracket
            x_new = 0.5 * (lo + hi)
        if gammainc(n, x_new) < p:
            lo = x_new
        else:
            hi = x_new
        if abs(x_new - x) < _TOL * max(1.0, x):
            x = x_new
            break
        x = x_new
    return x


def phi_inv(p, n):
    """Quantile of 1/X for X ~ Gamma(n, 1): the y with Pr(1/X <= y) = p.

    Equals 1 / G^{-1}(n, 1-p) with G the regularized lower incomplete gamma;
    strictly increasing in p.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0,1), got {p}")
    if n < 1:
        raise ValueError("n must be a positive integer")
    return 1.0 / _gammainc_inv(n, 1.0 - p)


def compute_xi(kappa, q, gamma_e, sigma_e2, n):
    """xi = Phi_N^{-1}(1 - kappa^{1/Q}) * Gamma_e * sigma_e^2 (watts)."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0,1), got {kappa}")
    if q < 1 or gamma_e < 0 or sigma_e2 <= 0:
        raise ValueError("need Q >= 1, gamma_e >= 0, sigma_e^2 > 0")
    if gamma_e == 0.0:
        return 0.0
    return phi_inv(1.0 - kappa ** (1.0 / q), n) * gamma_e * sigma_e2


def leakage_matrix(w_k, w_others, b, v0, gamma_e):
    """A = W_k - Gamma_e * sum_i W_i - Gamma_e * V0 B V0^H for one private stream."""
    a = np.array(w_k, dtype=complex, copy=True)
    for w in w_others:
        a -= gamma_e * w
    if b is not None and b.size:
        a -= gamma_e * (v0 @ b @ v0.conj().T)
    return a


def lmi_margin(w_k, w_others, b, v0, gamma_e, xi):
    """xi - lambda_max(A); the secrecy LMI for stream k holds iff >= 0."""
    a = leakage_matrix(w_k, w_others, b, v0, gamma_e)
    if a.shape[0] != a.shape[1]:
        raise ValueError("leakage matrix must be square")
    a = 0.5 * (a + a.conj().T)
    lam_max = float(np.linalg.eigvalsh(a)[-1])
    return xi - lam_max
