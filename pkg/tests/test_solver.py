import math

import numpy as np
import pytest

from secbeam.hermitian import congruence_map, hvec, pair_hessian, unhvec
from secbeam.solver import (
    InfeasibleError,
    LMISpec,
    SDPProblem,
    find_interior,
    solve_barrier,
)


def test_hvec_roundtrip_and_isometry(rng):
    for n in (1, 2, 5):
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a = a + a.conj().T
        b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = b + b.conj().T
        assert np.allclose(unhvec(hvec(a)), a)
        assert np.isclose(hvec(a) @ hvec(b), np.trace(a @ b).real)


def test_pair_hessian_bilinear_identity(rng):
    n, m = 4, 2
    p = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    h = pair_hessian(p, n, m)
    f = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    f = f + f.conj().T
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g = g + g.conj().T
    assert np.isclose(hvec(g) @ h @ hvec(f), np.trace(g @ p @ f @ p.conj().T).real)


def test_congruence_map(rng):
    n, m = 5, 3
    t = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    mmap = congruence_map(t)
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    x = x + x.conj().T
    assert np.allclose(unhvec(mmap @ hvec(x)), t.conj().T @ x @ t)


def test_scalar_barrier_problem():
    # maximize ln(x + 1) s.t. x <= 3, x >= 0 (1x1 block): optimum x = 3
    prob = SDPProblem([1])
    prob.log_terms = [(1.0, np.array([1.0]), 1.0)]
    prob.lin_rows = [(np.array([1.0]), 3.0)]
    x, info = solve_barrier(prob, np.array([0.5]), gap_tol=1e-10)
    assert abs(x[0] - 3.0) < 1e-7
    assert abs(prob.objective(x) - math.log(4.0)) < 1e-7


def test_trace_capped_logdet():
    # maximize ln(tr(A X) + 1) with X PSD 2x2, tr X <= 2: optimum aligns with
    # A's top eigenvector at full trace
    a = np.diag([2.0, 1.0]).astype(complex)
    prob = SDPProblem([2])
    prob.log_terms = [(1.0, hvec(a), 1.0)]
    prob.lin_rows = [(hvec(np.eye(2)), 2.0)]
    x, info = solve_barrier(prob, prob.join([0.2 * np.eye(2)]), gap_tol=1e-10)
    xm = prob.split(x)[0]
    assert abs(np.trace(xm).real - 2.0) < 1e-6
    assert abs(float(np.real(np.trace(a @ xm))) - 4.0) < 1e-5


def test_lmi_caps_block():
    # maximize tr(X) s.t. X <= I (LMI), X >= 0: optimum X = I
    prob = SDPProblem([2])
    prob.q = hvec(np.eye(2))
    prob.lmis = [LMISpec(xi=1.0, m=2, terms=[(0, 1.0, None)])]
    x, _ = solve_barrier(prob, prob.join([0.1 * np.eye(2)]), gap_tol=1e-10)
    assert np.allclose(prob.split(x)[0], np.eye(2), atol=1e-6)


def test_scalar_identity_lmi_term():
    # minimize u over the slack LMI S = (u - 3) I >= 0: the scalar enters the
    # matrix inequality through the identity coupling; optimum u = 3
    prob = SDPProblem([1])
    prob.q = np.array([-1.0])  # maximize -u
    prob.lmis = [LMISpec(xi=-3.0, m=2, terms=[(0, -1.0, "scalar")])]
    x, _ = solve_barrier(prob, np.array([4.0]), gap_tol=1e-10)
    assert abs(x[0] - 3.0) <= 1e-6


def test_mixed_transform_lmi(rng):
    # X PSD 2x2, V fixed 3x2: V X V^H <= I. maximize tr(X).
    v = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    prob = SDPProblem([2])
    prob.q = hvec(np.eye(2))
    prob.lmis = [LMISpec(xi=1.0, m=3, terms=[(0, 1.0, v)])]
    x0 = prob.join([1e-3 * np.eye(2)])
    x, _ = solve_barrier(prob, x0, gap_tol=1e-10)
    xm = prob.split(x)[0]
    s = np.eye(3) - v @ xm @ v.conj().T
    assert np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0] >= -1e-8
    # KKT: the top of the feasible set is reached (largest eigenvalue of the
    # slack hits zero within tolerance)
    assert np.linalg.eigvalsh(0.5 * (s + s.conj().T))[0] <= 1e-4


def test_find_interior_and_infeasibility():
    # feasible: x >= 0 (PSD scalar), x <= 1, -x <= -0.2  (0.2 <= x <= 1)
    prob = SDPProblem([1])
    prob.lin_rows = [(np.array([1.0]), 1.0), (np.array([-1.0]), -0.2)]
    x = find_interior(prob, scale=1.0)
    assert 0.2 < x[0] < 1.0
    # infeasible: x <= 0.2 and x >= 0.8
    prob2 = SDPProblem([1])
    prob2.lin_rows = [(np.array([1.0]), 0.2), (np.array([-1.0]), -0.8)]
    with pytest.raises(InfeasibleError):
        find_interior(prob2, scale=1.0)


def test_infeasible_start_rejected():
    prob = SDPProblem([1])
    prob.lin_rows = [(np.array([1.0]), 1.0)]
    with pytest.raises(Exception):
        solve_barrier(prob, np.array([2.0]))
