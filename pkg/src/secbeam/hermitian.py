"""Real-vectorization helpers for Hermitian matrix variables.

A Hermitian n x n matrix is mapped to n^2 real coordinates over the
Frobenius-orthonormal basis {E_ii} + {(E_ij + E_ji)/sqrt2} + {(iE_ij - iE_ji)/sqrt2},
so Euclidean inner products of coordinate vectors equal real trace inner
products of the matrices.
"""

from __future__ import annotations

import numpy as np

_CACHE: dict[int, dict] = {}


def _tables(n: int) -> dict:
    tab = _CACHE.get(n)
    if tab is None:
        iu = np.triu_indices(n, 1)
        basis = np.zeros((n * n, n, n), dtype=complex)
        for a in range(n):
            basis[a, a, a] = 1.0
        m = len(iu[0])
        s = 1.0 / np.sqrt(2.0)
        for t, (i, j) in enumerate(zip(*iu)):
            basis[n + t, i, j] = s
            basis[n + t, j, i] = s
            basis[n + m + t, i, j] = 1j * s
            basis[n + m + t, j, i] = -1j * s
        # columns of u are column-major vec of each basis element
        u = np.stack([basis[a].flatten("F") for a in range(n * n)], axis=1)
        flat = basis.reshape(n * n, n * n)  # row a = basis element a, row-major
        tab = {"iu": iu, "u": u, "stack": basis, "flat_conj": flat.conj()}
        _CACHE[n] = tab
    return tab


def hvec(m: np.ndarray) -> np.ndarray:
    """Hermitian matrix -> real coordinate vector of length n^2."""
    n = m.shape[0]
    iu = _tables(n)["iu"]
    sq2 = np.sqrt(2.0)
    return np.concatenate([np.real(np.diag(m)), sq2 * np.real(m[iu]), sq2 * np.imag(m[iu])])


def unhvec(x: np.ndarray) -> np.ndarray:
    """Inverse of hvec."""
    n = int(round(np.sqrt(len(x))))
    iu = _tables(n)["iu"]
    m = np.zeros((n, n), dtype=complex)
    np.fill_diagonal(m, x[:n])
    k = len(iu[0])
    off = (x[n : n + k] + 1j * x[n + k :]) / np.sqrt(2.0)
    m[iu] = off
    m[iu[1], iu[0]] = off.conj()
    return m


def umat(n: int) -> np.ndarray:
    """Complex (n^2, n^2) matrix whose columns are vec_F of the basis elements."""
    return _tables(n)["u"]


def pair_hessian(p: np.ndarray, n_row: int, n_col: int) -> np.ndarray:
    """Real matrix of the bilinear form (G, F) -> Re Tr(G P F P^H) over the
    Hermitian bases of dimensions n_row (G) and n_col (F); p is n_row x n_col."""
    bas_c = _tables(n_col)["stack"]  # (nc^2, nc, nc)
    flat_r = _tables(n_row)["flat_conj"]  # (nr^2, nr*nr), conjugated
    # T_b = P F_b P^H for every basis element F_b, batched as two gemms
    a = np.tensordot(bas_c, p.conj(), axes=([2], [1]))  # (nc^2, nc, nr)
    t = np.tensordot(p, a, axes=([1], [1]))  # (nr, nc^2, nr)
    t = np.swapaxes(t, 0, 1).reshape(n_col * n_col, n_row * n_row)
    # H[a, b] = Re sum_ij conj(G_a[i,j]) T_b[i,j]
    return np.real(flat_r @ t.T)


def quad_map(p: np.ndarray, n_out: int, n_in: int) -> np.ndarray:
    """Real matrix of the linear map X -> P X P^H in hvec coordinates."""
    return pair_hessian(p, n_out, n_in)


def congruence_map(t: np.ndarray) -> np.ndarray:
    """Real matrix of X -> T^H X T in hvec coordinates (T is n_in x n_out)."""
    n_in, n_out = t.shape
    return pair_hessian(t.conj().T, n_out, n_in)
