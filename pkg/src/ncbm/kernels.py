"""Correlation kernels of the drifted process started from ``N delta_0``.

The inner integral over the real line,

    F_m(t, y) = int p(t, -i y | t mu') (i mu')^m dmu' = t^{-1-m/2} He_m(y / sqrt t),

turns every kernel with finitely many drifts into a finite sum once the entire
function ``Phi`` is expanded in powers of ``i mu'``. Residues at repeated
drifts are taken with truncated power-series arithmetic (no numerical
differentiation). For large drift sets the monomial expansion is badly
conditioned and the same integral is computed by an exact Gauss-Hermite
rule applied to the product form of ``Phi``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import integrate

from .core import PointMeasure, SpaceTimePoint, check_time, gaussian_density
from .errors import InvalidTau, NonPositiveTime

#: above this particle number the simple-drift kernel switches to Gauss-Hermite
MONOMIAL_MAX_N = 12


# -- building blocks ----------------------------------------------------------


def phi_entire(xi: PointMeasure, a: complex, z: complex) -> complex:
    """``prod_{u in xi, u != a} (1 - (z - a)/(u - a))`` with multiplicities."""
    if xi.kind != "finite":
        raise ValueError("phi_entire needs a finite measure")
    out = complex(1.0)
    for u, m in xi.atoms:
        if u == a:
            continue
        out *= (1.0 - (z - a) / (u - a)) ** m
    return out


def hermite_moments(mmax: int, t, y) -> np.ndarray:
    """``F_0 .. F_mmax`` stacked on a new trailing axis."""
    t = float(t)
    u = np.asarray(y, dtype=float) / math.sqrt(t)
    out = np.empty(u.shape + (mmax + 1,))
    he_prev = np.ones_like(u)
    out[..., 0] = he_prev / t
    if mmax >= 1:
        he = u.copy()
        out[..., 1] = he * t ** -1.5
        for m in range(1, mmax):
            he_prev, he = he, u * he - m * he_prev
            out[..., m + 1] = he * t ** (-1.0 - (m + 1) / 2.0)
    return out


def hermite_moment(m: int, t, y):
    """``F_m(t, y) = t^{-1-m/2} He_m(y/sqrt(t))`` (probabilists' Hermite)."""
    check_time(t)
    if m < 0:
        raise ValueError("moment order must be nonnegative")
    out = hermite_moments(m, t, y)[..., m]
    return float(out) if np.ndim(out) == 0 else out


def _indicator_term(s: float, x, t: float, y):
    if s < t:
        return gaussian_density(t - s, math.sqrt(s / t) * np.asarray(y), math.sqrt(t / s) * np.asarray(x))
    return 0.0


def _as_measure(nu) -> PointMeasure:
    if isinstance(nu, PointMeasure):
        return nu
    return PointMeasure.from_points(np.ravel(np.asarray(nu, dtype=float)))


def _check_st(s, t) -> None:
    if not (s > 0 and t > 0):
        raise NonPositiveTime(f"kernel times must be positive, got s={s!r}, t={t!r}")


# -- power series helpers (ascending coefficients) ------------------------------


def _gaussian_taylor(s: float, x: np.ndarray, v: float, order: int) -> np.ndarray:
    """Taylor coefficients in ``h`` of ``p(s, x | s(v + h)) / p(s, x | s v)``."""
    a = -s * (v - x / s)
    b = -0.5 * s
    e = np.zeros(x.shape + (order + 1,))
    e[..., 0] = 1.0
    if order >= 1:
        e[..., 1] = a
    for n in range(1, order):
        e[..., n + 1] = (a * e[..., n] + 2.0 * b * e[..., n - 1]) / (n + 1)
    return e


# -- finite-drift kernels ------------------------------------------------------


def _residue_coefficients(nu: PointMeasure, s: float, x: np.ndarray) -> np.ndarray:
    """Return ``C[..., i]``: the sum over supp(nu) of the residues in ``mu`` of
    ``p(s, x | s mu) P(z) / ((z - mu) P(mu))`` as a polynomial ``sum_i C_i z^i``,
    with ``P(w) = prod_{u in nu} (u - w)``.

    At an atom ``v`` of multiplicity ``m`` the residue is
    ``Phi(nu, v, z) sum_r E_r (z - v)^{m-1-r}`` where ``E_r`` is the
    ``h^{m-1-r}`` coefficient of ``p(s, x | s(v+h)) prod_{u != v}(1 - h/(u-v))^{-m_u}``.
    Everything is built from products of linear factors, so nearby drifts
    cost no accuracy beyond the size of the terms themselves.
    """
    n = nu.size
    out = np.zeros(x.shape + (n,))
    for v, m in nu.atoms:
        order = m - 1
        phi = np.array([1.0])
        series = np.zeros(order + 1)
        series[0] = 1.0
        for u, mu_ in nu.atoms:
            if u == v:
                continue
            d = u - v
            geo = (1.0 / d) ** np.arange(order + 1)
            for _ in range(mu_):
                phi = npoly.polymul(phi, [1.0 + v / d, -1.0 / d])
                series = npoly.polymul(series, geo)[: order + 1]
        gauss = _gaussian_taylor(s, x, v, order) * np.asarray(gaussian_density(s, x, s * v))[..., None]
        shift = np.array([1.0])  # (z - v)^k, k = 0..order
        for r in range(order, -1, -1):
            # E_r = [h^{order-r}] gauss * series
            k = order - r
            e_r = np.einsum("...a,a->...", gauss[..., : k + 1], series[k::-1])
            poly = npoly.polymul(phi, shift)
            out[..., : len(poly)] += e_r[..., None] * poly
            shift = npoly.polymul(shift, [-v, 1.0])
    return out


def kernel_residue(nu, s: float, x, t: float, y, return_imag: bool = False):
    """Kernel from the contour-integral representation via residues.

    Handles drifts with multiplicity (higher-order poles). The inner integral
    is assembled with complex coefficients in powers of ``mu'``; the result is
    real and the imaginary residue is returned when ``return_imag`` is set.
    """
    _check_st(s, t)
    nu = _as_measure(nu)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = nu.size
    C = _residue_coefficients(nu, s, x)
    ipow = 1j ** np.arange(n)
    # int p(t,-iy|t mu') mu'^m dmu' = (-i)^m F_m
    moments = hermite_moments(n - 1, t, y) * (-1j) ** np.arange(n)
    val = math.sqrt(s * t) * np.einsum("...i,...i->...", C * ipow, moments)
    val = val - _indicator_term(s, x, t, y)
    re = np.real(val)
    if return_imag:
        return re, np.imag(val)
    return float(re) if np.ndim(re) == 0 else re


def _phi_polynomials(nu_pts: np.ndarray) -> list[np.ndarray]:
    """Monomial coefficients (in ``z``) of ``Phi(nu, nu_j, z)`` for each j."""
    polys = []
    for j, vj in enumerate(nu_pts):
        c = np.array([1.0])
        for k, vk in enumerate(nu_pts):
            if k != j:
                c = npoly.polymul(c, np.array([vk, -1.0]) / (vk - vj))
        polys.append(c)
    return polys


def kernel_simple(nu, s: float, x, t: float, y):
    """Kernel for pairwise distinct drifts (sum over drifts, no contour)."""
    _check_st(s, t)
    nu = _as_measure(nu)
    if not nu.simple():
        raise ValueError("kernel_simple needs pairwise distinct drifts")
    pts = nu.support()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(pts) > MONOMIAL_MAX_N:
        inner = _phi_integrals_gauss_hermite(pts, t, y)
    else:
        F = hermite_moments(len(pts) - 1, t, y)
        inner = np.stack([F[..., : len(c)] @ c for c in _phi_polynomials(pts)], axis=-1)
    px = np.stack([np.asarray(gaussian_density(s, x, s * v)) for v in pts], axis=-1)
    val = math.sqrt(s * t) * (px * inner).sum(axis=-1) - _indicator_term(s, x, t, y)
    return float(val) if np.ndim(val) == 0 else val


def _phi_integrals_gauss_hermite(pts: np.ndarray, t: float, y: np.ndarray) -> np.ndarray:
    """``int p(t,-iy|t mu') Phi(nu, nu_j, i mu') dmu'`` for every j.

    Equals ``E[Phi(y/t + i W)]/t`` with ``W ~ N(0, 1/t)``; the Gauss-Hermite rule
    with more than ``N/2`` nodes integrates the degree ``N-1`` polynomial exactly.
    """
    n = len(pts)
    g, w = np.polynomial.hermite_e.hermegauss(n // 2 + 24)
    w = w / math.sqrt(2.0 * math.pi)
    z = y[..., None] / t + 1j * g / math.sqrt(t)  # (..., nodes)
    logs = np.log(pts[:, None, None] - z.reshape(1, -1, len(g)) + 0j)  # (N, |y|, nodes)
    total = logs.sum(axis=0)
    diffs = pts[None, :] - pts[:, None] + 0j
    np.fill_diagonal(diffs, 1.0)
    norm = np.log(diffs).sum(axis=1)  # log prod_{k != j}(nu_k - nu_j)
    phi = np.exp(total[None] - logs - norm[:, None, None])  # (N, |y|, nodes)
    res = (phi * w).sum(axis=-1).real / t  # (N, |y|)
    return np.moveaxis(res, 0, -1).reshape(y.shape + (n,))


def kernel_finite(
    nu,
    s: float,
    x,
    t: float,
    y,
    method: Literal["auto", "residue", "simple"] = "auto",
):
    """Correlation kernel ``K_nu(s, x; t, y)`` for finitely many drifts.

    ``nu`` is a finite :class:`PointMeasure` (or a sequence of drifts, merged
    into one). ``x`` and ``y`` broadcast against each other.
    """
    nu = _as_measure(nu)
    if nu.kind != "finite":
        raise ValueError("kernel_finite needs a finite drift measure")
    if method == "auto":
        method = "simple" if nu.simple() else "residue"
    if method == "simple":
        return kernel_simple(nu, s, x, t, y)
    return kernel_residue(nu, s, x, t, y)


def kernel_equal_time(nu, t: float, x, y):
    """Equal-time kernel written with the Gaussian factor carried by ``y``.

    ``t sum_j p(t, y | t nu_j) int p(t, -i x | t mu') prod_{k != j}(1 - (i mu' - nu_j)/(nu_k - nu_j)) dmu'``.
    This is the transpose of ``kernel_finite(nu, t, ., t, .)``; both generate
    the same correlation functions.
    """
    check_time(t)
    nu = _as_measure(nu)
    if not nu.simple():
        raise ValueError("equal-time kernel needs pairwise distinct drifts")
    pts = nu.support()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(pts)
    # expand the product directly in powers of mu' with complex coefficients
    moments = hermite_moments(n - 1, t, x) * (-1j) ** np.arange(n)
    total = 0.0
    for j, vj in enumerate(pts):
        c = np.array([1.0 + 0j])
        for k, vk in enumerate(pts):
            if k != j:
                # 1 - (i mu' - nu_j)/(nu_k - nu_j) = (nu_k - i mu')/(nu_k - nu_j)
                c = npoly.polymul(c, np.array([vk, -1j]) / (vk - vj))
        total = total + gaussian_density(t, y, t * vj) * (moments[..., : len(c)] @ c)
    val = np.real(t * total)
    return float(val) if np.ndim(val) == 0 else val


# -- theta function and the integer-lattice kernel -----------------------------


def _theta3_series(v: np.ndarray, tau: complex) -> np.ndarray:
    """Direct lattice sum, windowed around the dominant index for each ``v``.

    Terms decay like ``exp(-pi Im(tau) (n - n*)^2)`` away from the peak index;
    the window keeps every term above ``1e-18`` of the peak, bounding the
    discarded tail by ``1e-16`` relative to the largest term.
    """
    im = tau.imag
    k = int(math.ceil(math.sqrt(math.log(1e18) / (math.pi * im)))) + 2
    nstar = np.rint(-np.imag(v) / im)
    offsets = np.arange(-k, k + 1)
    n = nstar[..., None] + offsets
    expo = 2j * math.pi * v[..., None] * n + 1j * math.pi * tau * n * n
    peak = expo.real.max(axis=-1, keepdims=True)
    return np.exp(expo - peak).sum(axis=-1) * np.exp(peak[..., 0])


def theta3(v, tau: complex, transform: Literal["auto", "never", "always"] = "auto"):
    """``sum_{n in Z} exp(2 pi i v n + pi i tau n^2)`` for ``Im tau > 0``.

    With ``transform="auto"`` the modulus is first reduced by ``tau -> tau - k``
    and ``tau -> -1/tau`` until ``|tau| >= 1``, so the nome never exceeds
    ``exp(-pi sqrt(3)/2)``.
    """
    tau = complex(tau)
    if not tau.imag > 0:
        raise InvalidTau(f"Im(tau) must be positive, got {tau!r}")
    v = np.asarray(v, dtype=complex)
    scalar = v.ndim == 0
    v = np.atleast_1d(v)
    logpref = np.zeros(v.shape, dtype=complex)
    if transform != "never":
        for _ in range(64):
            k = round(tau.real)
            if k:
                v = v + k / 2.0
                tau = tau - k
            if abs(tau) >= 1.0 and transform == "auto":
                break
            if transform == "always" and abs(tau) >= 1.0 and _ > 0:
                break
            # theta(v, tau) = (-i tau)^{-1/2} exp(-pi i v^2/tau) theta(v/tau, -1/tau)
            logpref = logpref - 0.5 * cmath.log(-1j * tau) - 1j * math.pi * v * v / tau
            v = v / tau
            tau = -1.0 / tau
    out = _theta3_series(v, tau) * np.exp(logpref)
    return complex(out[0]) if scalar else out


def kernel_lattice(s: float, x: float, t: float, y: float, tol: float = 1e-9, return_imag: bool = False):
    """Kernel of the infinite system with one drift at every integer.

    ``(1/2pi) int_{|w| <= pi/sqrt(st)} exp(w^2 (s-t)/2 + i w (y sqrt(s/t) - x sqrt(t/s)))
    theta3(x/s - i w sqrt(t/s), 2 pi i / s) dw - 1(s<t) p(t-s, sqrt(s/t) y | sqrt(t/s) x)``,
    the limit of :func:`kernel_finite` over the truncations ``Z cap [-L, L]``.
    The ``w`` integral uses Gauss-Legendre rules doubled until two successive
    estimates agree to ``tol``.
    """
    _check_st(s, t)
    half = math.pi / math.sqrt(s * t)
    a = math.sqrt(t / s)
    b = y * math.sqrt(s / t) - x * a
    tau = 2j * math.pi / s

    def rule(npts: int) -> complex:
        nodes, weights = np.polynomial.legendre.leggauss(npts)
        w = half * nodes
        f = np.exp(w * w * (s - t) / 2.0 + 1j * w * b) * theta3(x / s - 1j * w * a, tau)
        return complex((f * weights).sum() * half / (2.0 * math.pi))

    npts = 64
    prev = rule(npts)
    while True:
        npts *= 2
        cur = rule(npts)
        if abs(cur - prev) < tol or npts >= 1 << 14:
            break
        prev = cur
    val = cur - _indicator_term(s, x, t, y)
    if return_imag:
        return val.real, val.imag
    return float(val.real)


def sine_kernel(dt: float, dy: float) -> float:
    """Extended sine kernel of density one, ``K_sin(t - s, y - x)``."""
    dt = float(dt)
    dy = float(dy)
    if dt == 0.0:
        return float(np.sinc(dy))
    omega = math.pi * dy
    if dt > 0:
        f = lambda u: math.exp(math.pi**2 * u * u * dt / 2.0)
        if omega == 0.0:
            return integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
        return integrate.quad(f, 0.0, 1.0, weight="cos", wvar=omega, epsabs=1e-14, epsrel=1e-13)[0]
    # integrand below 1e-16 beyond upper
    upper = math.sqrt(2.0 * math.log(1e16) / (math.pi**2 * -dt))
    if upper <= 1.0:
        return 0.0
    f = lambda u: math.exp(math.pi**2 * u * u * dt / 2.0)
    if omega == 0.0:
        val = integrate.quad(f, 1.0, upper, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    else:
        val = integrate.quad(
            f, 1.0, upper, weight="cos", wvar=omega, epsabs=1e-14, epsrel=1e-12, limit=2000
        )[0]
    return -val


# -- kernel specs and correlation functions ------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate.

    ``family`` is ``"finite-nu"`` (needs a finite ``nu``), ``"lattice-theta"``
    (drifts at every integer; with ``L`` set, the finite truncation
    ``Z cap [-L, L]`` is used instead of the theta formula) or ``"sine"``.
    """

    family: Literal["finite-nu", "lattice-theta", "sine"]
    nu: PointMeasure | None = None
    L: float | None = None

    def __post_init__(self) -> None:
        if self.family == "finite-nu":
            if self.nu is None or self.nu.kind != "finite":
                raise ValueError("finite-nu kernels need a finite drift measure")
        elif self.family == "lattice-theta":
            if self.nu is not None and self.nu.kind != "lattice":
                raise ValueError("lattice-theta kernels need the lattice drift measure")
        elif self.family != "sine":
            raise ValueError(f"unknown kernel family {self.family!r}")

    def kernel(self) -> Callable[[float, float, float, float], float]:
        if self.family == "finite-nu":
            nu = self.nu
            return lambda s, x, t, y: kernel_finite(nu, s, x, t, y)
        if self.family == "lattice-theta":
            if self.L is not None:
                trunc = PointMeasure.integer_lattice().truncate(self.L)
                return lambda s, x, t, y: kernel_simple(trunc, s, x, t, y)
            return kernel_lattice
        return lambda s, x, t, y: sine_kernel(t - s, y - x)

    def __call__(self, s: float, x: float, t: float, y: float) -> float:
        return float(self.kernel()(s, x, t, y))

    def to_json(self) -> str:
        obj: dict = {"family": self.family}
        if self.nu is not None:
            obj["nu"] = json.loads(self.nu.to_json())
        if self.L is not None:
            obj["L"] = self.L
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str | dict) -> "KernelSpec":
        obj = json.loads(text) if isinstance(text, str) else text
        family = obj["family"]
        nu = obj.get("nu")
        if nu is not None:
            nu = PointMeasure.from_json(nu)
        elif family == "lattice-theta":
            nu = PointMeasure.integer_lattice()
        return cls(family, nu, obj.get("L"))


def kernel_matrix(spec: KernelSpec, pts: Sequence[SpaceTimePoint]) -> np.ndarray:
    k = spec.kernel()
    n = len(pts)
    out = np.empty((n, n))
    for j, p in enumerate(pts):
        for l, q in enumerate(pts):
            out[j, l] = k(p.t, p.x, q.t, q.x)
    return out


def correlation_from_kernel(spec: KernelSpec, pts: Sequence[SpaceTimePoint]) -> float:
    """``det[K(t_j, x_j; t_k, x_k)]`` over the given space-time points."""
    if not pts:
        raise ValueError("need at least one point")
    pts = [p if isinstance(p, SpaceTimePoint) else SpaceTimePoint(*p) for p in pts]
    for p in pts:
        if not p.t > 0:
            raise NonPositiveTime("correlation functions need positive times")
    return float(np.linalg.det(kernel_matrix(spec, pts)))
