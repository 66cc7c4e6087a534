"""Row construction for the generalized determinant ``D(nu, x)``.

For strictly increasing ``nu`` this is ``det[exp(nu_j x_k)]``; when drifts
coincide each repeated value contributes derivative rows
``x^m exp(v x) / m!``. Nearly equal drifts make the plain exponential matrix
numerically singular, so drifts closer than ``CLUSTER_GAP`` are grouped and
their rows replaced by Newton divided differences of ``nu -> exp(nu x)``,
evaluated from a Taylor series about the group centre. The two
representations differ by the constant

    W(nu) = prod over pairs (j<k) in the same group with nu_j != nu_k of (nu_k - nu_j),

so ``D(nu, x) = W(nu) * det(rows)``; exact coincidences reproduce the
derivative rows with the ``1/m!`` normalisation. The exponential factors
``exp(c_j x_k)`` (``c_j`` the group centre of row j) are rescaled by the row and
column potentials of :func:`monge_potentials`, so the diagonal is 1 and no
entry exceeds 1; the log of the scale is carried separately.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

CLUSTER_GAP = 1e-2


def monge_potentials(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row and column potentials ``u, v`` with ``u_j + v_j = L_jj``.

    For a supermodular log-matrix (``L_jk = a_j b_k`` or a Gaussian kernel with
    both arguments increasing) the identity is the maximal assignment and
    ``L_jk <= u_j + v_k`` everywhere, so ``exp(L - u - v)`` has unit diagonal
    and entries at most 1. Batched over leading axes.
    """
    n = L.shape[-1]
    u = np.zeros(L.shape[:-1])
    diag = np.diagonal(L, axis1=-2, axis2=-1)
    for k in range(n - 1):
        lo = L[..., k + 1, k] - diag[..., k]
        hi = diag[..., k + 1] - L[..., k, k + 1]
        u[..., k + 1] = u[..., k] + 0.5 * (lo + hi)
    return u, diag - u


def slogdet_log_matrix(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(sign, log|det exp(L)|)`` without under- or overflow of the entries."""
    u, v = monge_potentials(L)
    sign, logabs = np.linalg.slogdet(np.exp(L - u[..., :, None] - v[..., None, :]))
    return sign, logabs + u.sum(axis=-1) + v.sum(axis=-1)


class ExpRows:
    def __init__(self, nu: tuple[float, ...]):
        nu_arr = np.asarray(nu, dtype=float)
        if np.any(np.diff(nu_arr) < 0):
            raise ValueError("drift vector must be weakly increasing")
        self.nu = nu_arr
        self.n = len(nu_arr)
        groups: list[list[int]] = [[0]]
        for j in range(1, self.n):
            if nu_arr[j] - nu_arr[j - 1] <= CLUSTER_GAP:
                groups[-1].append(j)
            else:
                groups.append([j])
        self.groups = groups
        self.centers = [float(np.mean(nu_arr[g])) for g in groups]
        self.spread = max(float(nu_arr[g[-1]] - nu_arr[g[0]]) for g in groups)
        log_w, sign_w = 0.0, 1.0
        for g in groups:
            for a in range(len(g)):
                for b in range(a + 1, len(g)):
                    d = nu_arr[g[b]] - nu_arr[g[a]]
                    if d != 0.0:
                        log_w += math.log(abs(d))
                        sign_w *= math.copysign(1.0, d)
        self.log_w = log_w
        self.sign_w = sign_w
        # row j belongs to group gi at position r; its derivative row is
        # nu_j * row_j + row_{j-1} inside the group
        self.lower = np.zeros((self.n, self.n))
        for g in groups:
            for r, j in enumerate(g):
                self.lower[j, j] = nu_arr[j]
                if r > 0:
                    self.lower[j, j - 1] = 1.0

    def _h_table(self, g: list[int], c: float, kmax: int) -> np.ndarray:
        """Complete homogeneous symmetric polynomials ``h_k`` of the shifted
        nodes ``nu_{g[0..r]} - c`` for every prefix length ``r``."""
        delta = self.nu[g] - c
        m = len(g)
        H = np.zeros((m, kmax + 1))
        H[0] = delta[0] ** np.arange(kmax + 1)
        for r in range(1, m):
            H[r, 0] = 1.0
            for k in range(1, kmax + 1):
                H[r, k] = H[r - 1, k] + delta[r] * H[r, k - 1]
        return H

    def matrix(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Scaled matrix ``M[..., j, k]`` and the total log scale."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError("size mismatch between drift vector and configuration")
        batch = x.shape[:-1]
        M = np.empty(batch + (self.n, self.n))
        xmax = float(np.max(np.abs(x))) if x.size else 0.0
        row_c = np.empty(self.n)
        for g, c in zip(self.groups, self.centers):
            row_c[g] = c
        E = row_c[:, None] * x[..., None, :]
        u, v = monge_potentials(E)
        base_all = np.exp(E - u[..., :, None] - v[..., None, :])
        for g, c in zip(self.groups, self.centers):
            if len(g) == 1 and self.nu[g[0]] == c:
                M[..., g[0], :] = base_all[..., g[0], :]
                continue
            kmax = 30 + int(6.0 * xmax * (self.nu[g[-1]] - self.nu[g[0]]) + len(g))
            H = self._h_table(g, c, kmax)
            # a[n] = x^n / n!
            nterms = kmax + len(g)
            a = np.empty(x.shape + (nterms,))
            a[..., 0] = 1.0
            for n in range(1, nterms):
                a[..., n] = a[..., n - 1] * x / n
            for r, j in enumerate(g):
                series = np.einsum("...n,n->...", a[..., r : r + kmax + 1], H[r])
                M[..., j, :] = base_all[..., j, :] * series
        return M, u.sum(axis=-1) + v.sum(axis=-1)

    def slogdet(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(sign, log|D(nu, x)|)`` batched over leading axes of ``x``."""
        M, logscale = self.matrix(x)
        sign, logabs = np.linalg.slogdet(M)
        return sign * self.sign_w, logabs + logscale + self.log_w

    def slogdet_rows(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(sign, log|D/W|)``: the determinant without the constant ``W``."""
        M, logscale = self.matrix(x)
        sign, logabs = np.linalg.slogdet(M)
        return sign, logabs + logscale

    def grad_log(self, x: np.ndarray) -> np.ndarray:
        """``d/dx_k log|D(nu, x)|`` for every k (the h-transform drift)."""
        M, _ = self.matrix(x)
        dM = np.einsum("jl,...lk->...jk", self.lower, M)
        # d log det = diag(M^{-1} dM) with dM differing from M in column k only
        sol = np.linalg.solve(M, dM)
        return np.diagonal(sol, axis1=-2, axis2=-1).copy()


@lru_cache(maxsize=256)
def exp_rows(nu: tuple[float, ...]) -> ExpRows:
    return ExpRows(nu)


def log_reduced_vandermonde(nu: np.ndarray) -> float:
    """``log prod_{j<k, nu_j != nu_k} (nu_k - nu_j)`` for weakly increasing ``nu``."""
    out = 0.0
    for j in range(len(nu)):
        for k in range(j + 1, len(nu)):
            d = nu[k] - nu[j]
            if d != 0.0:
                out += math.log(d)
    return out
