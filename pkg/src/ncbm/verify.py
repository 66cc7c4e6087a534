"""Independent oracles and the identity / statistics harness.

The oracles here deliberately avoid the evaluation routes used by
:mod:`ncbm.densities` and :mod:`ncbm.kernels`:

* determinants of at most 3x3 matrices by explicit permutation sums;
* exponential determinants ``det[exp(a_j b_k)]`` through Newton divided
  differences obtained by trapezoidal contour integration, which stays
  accurate when the ``a_j`` nearly or exactly coincide;
* correlation functions by direct quadrature of the joint density;
* the kernel's double integral by contour and real-line trapezoid rules.

Every check returns a :class:`CheckReport`; :func:`run_all` runs a suite.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, stats

from . import densities, kernels, sampler
from .core import PointMeasure, SpaceTimePoint, survival_constant
from .errors import TooLarge

# -- report type ----------------------------------------------------------------


@dataclass
class CheckReport:
    """Outcome of one check. ``passed`` is ``max_rel_err <= tolerance`` unless
    the check is statistical, in which case it is ``p_value > tolerance``."""

    name: str
    max_abs_err: float
    max_rel_err: float
    samples: int
    passed: bool
    tolerance: float
    p_value: float | None = None
    runtime: float = 0.0
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return clean(v.item())
            if isinstance(v, np.bool_):
                return bool(v)
            return v

        return json.dumps(clean(asdict(self)))


def _report(name, abs_errs, rel_errs, tol, t0, **details) -> CheckReport:
    abs_errs = np.asarray(abs_errs, dtype=float)
    rel_errs = np.asarray(rel_errs, dtype=float)
    max_rel = float(np.max(rel_errs)) if rel_errs.size else 0.0
    return CheckReport(
        name=name,
        max_abs_err=float(np.max(abs_errs)) if abs_errs.size else 0.0,
        max_rel_err=max_rel,
        samples=int(rel_errs.size),
        passed=bool(max_rel <= tol),
        tolerance=tol,
        runtime=time.perf_counter() - t0,
        details=details,
    )


def _stat_report(name, pvals, alpha, samples, t0, **details) -> CheckReport:
    p = float(np.min(pvals))
    return CheckReport(
        name=name,
        max_abs_err=float("nan"),
        max_rel_err=float("nan"),
        samples=int(samples),
        passed=bool(p > alpha),
        tolerance=alpha,
        p_value=p,
        runtime=time.perf_counter() - t0,
        details=details,
    )


def _rel(a, b, floor: float = 0.0):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(np.abs(b), floor)


# -- oracle building blocks ---------------------------------------------------------


def _perm_det(m: np.ndarray) -> float:
    """Determinant by the Leibniz permutation sum (small matrices only)."""
    n = m.shape[0]
    if n > 3:
        raise TooLarge("permutation-sum determinant is limited to 3x3")
    total = 0.0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1.0
        for i in range(n):
            prod *= m[i, perm[i]]
        total += (-1) ** inv * prod
    return total


def _gauss(t, y, x):
    return np.exp(-((y - x) ** 2) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def _vdm(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1])
    n = x.shape[-1]
    for j in range(n):
        for k in range(j + 1, n):
            out = out * (x[..., k] - x[..., j])
    return out


def newton_rows(a: Sequence[float], b: np.ndarray, nodes: int = 128) -> np.ndarray:
    """``R[..., j, k] = f[a_1..a_j](b_k)`` for ``f(z) = exp(z b)``.

    Divided differences are contour integrals
    ``(1/2 pi i) oint exp(z b) / prod_{i<=j}(z - a_i) dz`` over a circle
    enclosing every ``a_i``; the trapezoid rule converges geometrically.
    ``det[exp(a_j b_k)] = h_N(a) det R`` holds for distinct ``a`` and ``det R``
    is its continuous extension to coincident ``a``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    centre = 0.5 * (a.min() + a.max())
    radius = 0.5 * (a.max() - a.min()) + 0.5
    theta = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes
    z = centre + radius * np.exp(1j * theta)
    dz = radius * np.exp(1j * theta) / nodes  # (1/2 pi i) dz on each node
    denom = np.cumprod(z[None, :] - a[:, None], axis=0)  # (N, nodes)
    ez = np.exp(b[..., :, None] * z)  # (..., N_b, nodes)
    rows = np.einsum("jn,...kn->...jk", dz / denom, ez)
    return rows.real


def oracle_origin_density(t: float, y, nu) -> np.ndarray:
    """Joint density at time ``t`` from ``N delta_0`` with drift ``nu`` for
    ordered ``y``; zero outside the Weyl chamber. Batched over ``y``."""
    y = np.asarray(y, dtype=float)
    nu = np.asarray(nu, dtype=float)
    n = nu.size
    rows = newton_rows(nu, y)
    if n <= 3 and y.ndim == 1:
        det = _perm_det(rows)
    else:
        det = np.linalg.det(rows)
    val = (
        (2.0 * np.pi * t) ** (-n / 2.0)
        * np.exp(-t * (nu @ nu) / 2.0 - (y * y).sum(axis=-1) / (2.0 * t))
        * _vdm(y / t)
        * det
    )
    ordered = np.all(np.diff(y, axis=-1) > 0, axis=-1)
    return np.where(ordered, val, 0.0)


def oracle_km(t: float, y: np.ndarray, x: np.ndarray) -> float:
    m = _gauss(t, np.asarray(y)[:, None], np.asarray(x)[None, :])
    return _perm_det(m)


def oracle_correlation_bruteforce(nu, t: float, pts: Sequence[float], N: int | None = None, tol: float = 1e-10) -> float:
    """Equal-time correlation function ``rho(t, pts)`` of the drifted process
    from ``N delta_0`` by integrating the joint density over the free particles.

    ``rho_n(x) = 1/(N-n)! int f(sort(x, z)) dz`` with ``f`` the density on
    the ordered chamber.
    """
    nu = np.asarray(PointMeasure.from_points(np.ravel(nu)).points() if not isinstance(nu, PointMeasure) else nu.points())
    n = len(nu) if N is None else int(N)
    if n != len(nu):
        raise ValueError("N must equal the number of drifts")
    if n > 3:
        raise TooLarge("brute-force correlations are limited to N <= 3")
    pts = [float(p) for p in pts]
    if len(pts) > n or not pts:
        raise ValueError("need 1..N points")
    lo = min(t * nu.min(), 0.0) - 10.0 * math.sqrt(t) - 1.0
    hi = max(t * nu.max(), 0.0) + 10.0 * math.sqrt(t) + 1.0

    def f(*free):
        return float(oracle_origin_density(t, np.sort(np.array(pts + list(free))), nu))

    free = n - len(pts)
    if free == 0:
        return f()
    brk = sorted(pts)
    if free == 1:
        return integrate.quad(f, lo, hi, points=brk, epsabs=tol * 1e-3, epsrel=tol, limit=400)[0]
    inner = lambda z1: integrate.quad(
        lambda z2: f(z1, z2), lo, hi, points=sorted(brk + [z1]), epsabs=tol * 1e-3, epsrel=tol, limit=400
    )[0]
    val = integrate.quad(inner, lo, hi, points=brk, epsabs=tol * 1e-3, epsrel=tol, limit=400)[0]
    return val / 2.0


def oracle_kernel_contour(nu, s: float, x: float, t: float, y: float, nodes: int = 512, mu_nodes: int = 801) -> complex:
    """Kernel by direct quadrature of its double-integral representation.

    The factor ``prod_u (1 - (z - mu)/(u - mu)) / (z - mu)`` with ``z = i mu'`` is
    split as ``Q(z, mu)/P(mu) + 1/(z - mu)``, ``P(w) = prod (u - w)``; the second
    term has no singularity inside the contour and integrates to zero, so only
    the polynomial ``Q`` is used (z is never enclosed). The ``mu`` circle has
    centre ``(min+max)/2`` and radius ``(max-min)/2 + 1``; ``mu'`` uses a
    half-step-offset trapezoid rule on the real line.
    """
    pts = np.asarray(PointMeasure.from_points(np.ravel(nu)).points() if not isinstance(nu, PointMeasure) else nu.points())
    coeffs = np.poly(pts)[::-1] * (-1.0) ** len(pts)  # P(w) = prod(u - w) ascending
    centre = 0.5 * (pts.min() + pts.max())
    radius = 0.5 * (pts.max() - pts.min()) + 1.0
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    mu = centre + radius * np.exp(1j * theta)
    w_mu = radius * np.exp(1j * theta) / nodes
    width = 12.0 / math.sqrt(t) + abs(y) / t
    h = 2.0 * width / mu_nodes
    mp = -width + h * (np.arange(mu_nodes) + 0.5)
    z = 1j * mp
    # Q(z, mu) = sum_k a_k sum_{j<k} z^j mu^{k-1-j}
    Q = np.zeros((nodes, mu_nodes), dtype=complex)
    for k in range(1, len(coeffs)):
        for j in range(k):
            Q += coeffs[k] * (mu[:, None] ** (k - 1 - j)) * (z[None, :] ** j)
    P = np.prod(pts[:, None] - mu[None, :], axis=0)
    g_mu = np.exp(-((x - s * mu) ** 2) / (2.0 * s)) / math.sqrt(2.0 * math.pi * s)
    g_mp = np.exp(y * y / (2.0 * t) - 1j * y * mp - t * mp * mp / 2.0) / math.sqrt(2.0 * math.pi * t)
    inner = (Q * g_mp[None, :]).sum(axis=1) * h
    val = math.sqrt(s * t) * np.sum(w_mu * g_mu * inner / P)
    if s < t:
        val -= _gauss(t - s, math.sqrt(s / t) * y, math.sqrt(t / s) * x)
    return complex(val)


# -- checks: identities -------------------------------------------------------------


def _random_config(rng, n, centre=0.0, scale=1.0):
    return np.sort(centre + scale * rng.standard_normal(n))


def check_reciprocal(N: int, nu=None, times=None, grid: int = 200, seed: int = 1) -> CheckReport:
    """Single-time reciprocal relation: the origin-start drifted density at
    ``(t, y)`` equals ``t^{-N}`` times the driftless density from ``nu`` at
    ``(1/t, y/t)``. Random ``(t, y, nu)`` unless ``nu``/``times`` are given."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    abs_e, rel_e = [], []
    for i in range(grid):
        t = float(times[i % len(times)]) if times is not None else float(np.exp(rng.uniform(-1.5, 1.5)))
        v = np.asarray(nu, dtype=float) if nu is not None else _random_config(rng, N, scale=1.5)
        y = np.sort(t * v + math.sqrt(t) * rng.standard_normal(N))
        if N > 1 and np.any(np.diff(y) <= 0):
            continue
        lhs = densities.drifted_density_from_origin(t, y, v)
        rhs = t ** (-N) * densities.noncolliding_density(1.0 / t, y / t, v)
        abs_e.append(abs(lhs - rhs))
        rel_e.append(abs(lhs - rhs) / abs(rhs))
    return _report(f"reciprocal_density_N{N}", abs_e, rel_e, 1e-10, t0)


def check_reciprocal_multitime(N: int = 2, tuples: int = 100, seed: int = 2) -> CheckReport:
    """Two-time reciprocal relation: the origin-start drifted joint density of
    ``(x1 at t1, x2 at t2)`` equals ``(t1 t2)^{-N}`` times the driftless joint
    density from ``nu`` of ``(x2/t2 at 1/t2, x1/t1 at 1/t1)``."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    abs_e, rel_e = [], []
    while len(rel_e) < tuples:
        t1, t2 = np.sort(np.exp(rng.uniform(-1.2, 1.2, 2)))
        v = _random_config(rng, N, scale=1.5)
        x1 = np.sort(t1 * v + math.sqrt(t1) * rng.standard_normal(N))
        x2 = np.sort(x1 + (t2 - t1) * v + math.sqrt(t2 - t1) * rng.standard_normal(N))
        if N > 1 and (np.any(np.diff(x1) <= 0) or np.any(np.diff(x2) <= 0)):
            continue
        mc = densities.MultitimeConfiguration.build((t1, t2), (x1, x2))
        lhs = densities.multitime_density(mc, PointMeasure.delta(N), v)
        rhs = (
            (t1 * t2) ** (-N)
            * densities.noncolliding_density(1.0 / t2, x2 / t2, v)
            * densities.noncolliding_density(1.0 / t1 - 1.0 / t2, x1 / t1, x2 / t2)
        )
        abs_e.append(abs(lhs - rhs))
        rel_e.append(abs(lhs - rhs) / abs(rhs))
    return _report(f"reciprocal_multitime_N{N}", abs_e, rel_e, 1e-10, t0)


def check_qn_inversion(N: int, tuples: int = 100, seed: int = 3) -> CheckReport:
    """``q_N(t2-t1, x2|x1) = (t1 t2)^{-N/2} exp(-|x2|^2/2t2 + |x1|^2/2t1)
    q_N(1/t1 - 1/t2, x1/t1 | x2/t2)``, also checked against a permutation-sum
    evaluation of the left side."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    abs_e, rel_e, oracle_e = [], [], []
    while len(rel_e) < tuples:
        t1, t2 = np.sort(np.exp(rng.uniform(-1.2, 1.2, 2)))
        x1 = _random_config(rng, N, scale=1.5)
        x2 = np.sort(x1 + math.sqrt(t2 - t1) * rng.standard_normal(N))
        if N > 1 and (np.any(np.diff(x1) <= 0) or np.any(np.diff(x2) <= 0)):
            continue
        lhs = densities.km_determinant(t2 - t1, x2, x1)
        rhs = (
            (t1 * t2) ** (-N / 2.0)
            * math.exp(-(x2 @ x2) / (2.0 * t2) + (x1 @ x1) / (2.0 * t1))
            * densities.km_determinant(1.0 / t1 - 1.0 / t2, x1 / t1, x2 / t2)
        )
        ref = oracle_km(t2 - t1, x2, x1)
        abs_e.append(abs(lhs - rhs))
        rel_e.append(abs(lhs - rhs) / abs(rhs))
        oracle_e.append(abs(lhs - ref) / abs(ref))
    rep = _report(f"qn_inversion_N{N}", abs_e, rel_e, 1e-10, t0, max_rel_vs_permutation_sum=max(oracle_e))
    return rep


def schur_ratio(a: np.ndarray, b: np.ndarray) -> float:
    """``det[exp(a_j b_k)] prod Gamma(j) / (h_N(a) h_N(b))`` via divided differences."""
    n = len(a)
    rows = newton_rows(a, b)
    return float(np.linalg.det(rows) * math.prod(math.gamma(j) for j in range(1, n + 1)) / _vdm(b))


def check_schur_asymptotics(
    N: int = 3,
    b: Sequence[float] = (-0.7, 0.4, 1.3),
    scales: Sequence[float] = (0.2, 0.1, 0.05, 0.025, 0.0125),
    direction: Sequence[float] | None = None,
    x: Sequence[float] = (-1.0, 0.2, 0.9),
    y: Sequence[float] = (-0.4, 0.5, 2.1),
    nu_scale: float = 1e-4,
) -> CheckReport:
    """Small-``a`` asymptotics of the exponential determinant.

    (i) ``|ratio(eps * alpha) - 1|`` is first order in ``eps``: the error
    ratio under halving must lie in [0.3, 0.7].
    (ii) ``det[exp(nu y)]/det[exp(nu x)] -> h_N(y)/h_N(x)``: the error is
    itself first order in ``|nu|``, so the limit is read off by Richardson
    extrapolation from ``|nu|`` and ``|nu|/2`` and must match to 1e-6.
    """
    t0 = time.perf_counter()
    b = np.asarray(b[:N], dtype=float)
    alpha = np.asarray(direction, dtype=float) if direction is not None else np.linspace(0.3, 1.0, N)
    errs = [abs(schur_ratio(e * alpha, b) - 1.0) for e in scales]
    ratios = [errs[i + 1] / errs[i] for i in range(len(errs) - 1)]
    ratio_ok = all(0.3 <= r <= 0.7 for r in ratios)
    xa = np.asarray(x[:N], dtype=float)
    ya = np.asarray(y[:N], dtype=float)
    target = _vdm(ya) / _vdm(xa)

    def quotient(eps):
        nu = eps * alpha
        return np.linalg.det(newton_rows(nu, ya)) / np.linalg.det(newton_rows(nu, xa))

    raw = quotient(nu_scale)
    extrap = 2.0 * quotient(nu_scale / 2.0) - raw
    lim_err = abs(extrap - target) / abs(target)
    rep = CheckReport(
        name=f"schur_asymptotics_N{N}",
        max_abs_err=float(abs(extrap - target)),
        max_rel_err=float(lim_err),
        samples=len(scales) + 2,
        passed=bool(ratio_ok and lim_err <= 1e-6),
        tolerance=1e-6,
        runtime=time.perf_counter() - t0,
        details={
            "errors": errs,
            "halving_ratios": ratios,
            "ratio_window": [0.3, 0.7],
            "ratio_limit_raw_rel_err": float(abs(raw - target) / abs(target)),
            "ratio_limit_extrapolated_rel_err": float(lim_err),
        },
    )
    return rep


def check_backward_kolmogorov(h: float = 1e-3, seed: int = 4, points: int = 20, nu=None) -> CheckReport:
    """Finite-difference residual of the backward equation in the start ``x``
    for ``N = 2``: ``d_t p = (1/2) Lap_x p + grad_x log g(x) . grad_x p`` with
    ``g = h_N`` (driftless) or ``g = D(nu, .)`` (drifted)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    rel_e, abs_e = [], []
    if nu is None:
        p = lambda t, y, x: densities.noncolliding_density(t, y, x)
        glog = lambda x: np.array([1.0 / (x[0] - x[1]), 1.0 / (x[1] - x[0])])
    else:
        nua = np.asarray(nu, dtype=float)
        p = lambda t, y, x: densities.drifted_density(t, y, x, nua)
        e = lambda x: math.exp(nua[0] * x[0] + nua[1] * x[1]) - math.exp(nua[0] * x[1] + nua[1] * x[0])
        glog = lambda x: np.array(
            [
                (nua[0] * math.exp(nua[0] * x[0] + nua[1] * x[1]) - nua[1] * math.exp(nua[0] * x[1] + nua[1] * x[0])) / e(x),
                (nua[1] * math.exp(nua[0] * x[0] + nua[1] * x[1]) - nua[0] * math.exp(nua[0] * x[1] + nua[1] * x[0])) / e(x),
            ]
        )
    while len(rel_e) < points:
        t = float(rng.uniform(0.5, 2.0))
        x = np.sort(rng.uniform(-1.0, 1.0, 2))
        y = np.sort(x + rng.normal(0.0, math.sqrt(t), 2))
        if x[1] - x[0] < 0.3 or y[1] - y[0] < 0.1:
            continue
        dt = (p(t + h, y, x) - p(t - h, y, x)) / (2 * h)
        grad = np.zeros(2)
        lap = 0.0
        base = p(t, y, x)
        for k in range(2):
            e_k = np.zeros(2)
            e_k[k] = h
            fp, fm = p(t, y, x + e_k), p(t, y, x - e_k)
            grad[k] = (fp - fm) / (2 * h)
            lap += (fp - 2 * base + fm) / (h * h)
        drift = glog(x) @ grad
        res = dt - 0.5 * lap - drift
        scale = abs(dt) + abs(0.5 * lap) + abs(drift)
        abs_e.append(abs(res))
        rel_e.append(abs(res) / scale)
    label = "backward_kolmogorov" + ("" if nu is None else "_drifted")
    return _report(label, abs_e, rel_e, 1e-3, t0)


# -- checks: kernels --------------------------------------------------------------


def check_kernel_vs_bruteforce(nu, t: float, grid: Sequence[float], tol: float = 1e-5) -> CheckReport:
    """Kernel determinants against brute-force correlation integrals on every
    one-point set and every two-point set drawn from ``grid``."""
    t0 = time.perf_counter()
    nu_m = nu if isinstance(nu, PointMeasure) else PointMeasure.from_points(np.ravel(nu))
    spec = kernels.KernelSpec("finite-nu", nu_m)
    sets = [(g,) for g in grid]
    if nu_m.size >= 2:
        sets += list(itertools.combinations(grid, 2))
    abs_e, rel_e = [], []
    for pts in sets:
        k = kernels.correlation_from_kernel(spec, [SpaceTimePoint(t, p) for p in pts])
        o = oracle_correlation_bruteforce(nu_m, t, pts)
        abs_e.append(abs(k - o))
        rel_e.append(abs(k - o) / max(abs(o), 1e-12))
    return _report(f"kernel_vs_bruteforce_N{nu_m.size}", abs_e, rel_e, tol, t0, nu=nu_m.points(), t=t)


def check_residue_vs_simple(cases: int = 40, seed: int = 5, tol: float = 1e-10) -> CheckReport:
    """Residue evaluation against the sum over simple drifts."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    abs_e, rel_e = [], []
    for _ in range(cases):
        n = int(rng.integers(1, 6))
        nu = PointMeasure.from_points(np.round(rng.uniform(-2, 2, n), 6))
        s, t = np.exp(rng.uniform(-1, 1, 2))
        x, y = rng.normal(0, 1.5, 2)
        a = kernels.kernel_residue(nu, s, x, t, y)
        b = kernels.kernel_simple(nu, s, x, t, y)
        abs_e.append(abs(a - b))
        rel_e.append(abs(a - b) / max(abs(b), 1e-3))
    return _report("residue_vs_simple", abs_e, rel_e, tol, t0)


def check_residue_vs_contour(tol: float = 1e-8) -> CheckReport:
    """Residue evaluation against direct contour/real-line quadrature,
    including drifts of multiplicity two and three."""
    t0 = time.perf_counter()
    cases = [
        ((0.0, 1.0), 1.0, 0.3, 1.0, -0.2),
        ((0.0, 1.0), 0.7, 0.3, 1.4, 0.5),
        ((-1.0, 0.5, 2.0), 1.2, 0.1, 0.8, 0.9),
        ((0.0, 0.0), 1.0, 0.4, 1.0, -0.3),
        ((0.0, 0.0, 1.5), 0.6, -0.2, 1.1, 0.4),
        ((-0.5, 1.0, 1.0), 1.5, 0.7, 0.9, 0.2),
        ((0.0, 0.0, 0.0), 1.0, 0.5, 2.0, -0.5),
    ]
    abs_e, rel_e, imag = [], [], []
    for nu, s, x, t, y in cases:
        m = PointMeasure.from_points(nu)
        re, im = kernels.kernel_residue(m, s, x, t, y, return_imag=True)
        ref = oracle_kernel_contour(m, s, x, t, y)
        abs_e.append(abs(re - ref.real))
        rel_e.append(abs(re - ref.real) / max(abs(ref.real), 1e-3))
        imag.append(abs(im))
    return _report("residue_vs_contour", abs_e, rel_e, tol, t0, max_imag_residue=max(imag))


def check_equal_time_forms(cases: int = 40, seed: int = 6, tol: float = 1e-10) -> CheckReport:
    """``kernel_finite(nu, t, x, t, y)`` equals the equal-time form at ``(y, x)``."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    abs_e, rel_e = [], []
    for _ in range(cases):
        n = int(rng.integers(1, 6))
        nu = PointMeasure.from_points(np.round(rng.uniform(-2, 2, n), 6))
        t = float(np.exp(rng.uniform(-1, 1)))
        x, y = rng.normal(0, 1.5, 2)
        a = kernels.kernel_finite(nu, t, x, t, y)
        b = kernels.kernel_equal_time(nu, t, y, x)
        abs_e.append(abs(a - b))
        rel_e.append(abs(a - b) / max(abs(b), 1e-3))
    return _report("equal_time_forms", abs_e, rel_e, tol, t0)


def check_one_point_mass(nus=((0.0,), (0.0, 1.0), (-1.0, 0.0, 0.0)), times=(0.5, 1.0, 2.0), tol: float = 1e-6) -> CheckReport:
    """``int K(t, x; t, x) dx = N``."""
    t0 = time.perf_counter()
    abs_e, rel_e = [], []
    for nu in nus:
        m = PointMeasure.from_points(nu)
        for t in times:
            lo = t * min(nu) - 12.0 * math.sqrt(t) - 2.0
            hi = t * max(nu) + 12.0 * math.sqrt(t) + 2.0
            mass = integrate.quad(lambda x: kernels.kernel_finite(m, t, x, t, x), lo, hi, epsabs=1e-11, epsrel=1e-11, limit=200)[0]
            abs_e.append(abs(mass - m.size))
            rel_e.append(abs(mass - m.size) / m.size)
    return _report("one_point_mass", abs_e, rel_e, tol, t0)


def _one_point_origin(t: float, y: float, n: int) -> float:
    return oracle_correlation_bruteforce(np.zeros(n), t, [y])


def check_self_duality(times=(0.5, 2.0), ys=(-1.0, -0.3, 0.0, 0.4, 1.2), tol: float = 1e-8) -> CheckReport:
    """Driftless ``N = 2`` from the origin: the one-point function of
    ``(1/t) o Xi(t)``, i.e. ``t rho_t(t y)``, equals ``rho_{1/t}(y)``."""
    t0 = time.perf_counter()
    abs_e, rel_e = [], []
    for t in times:
        for y in ys:
            a = t * _one_point_origin(t, t * y, 2)
            b = _one_point_origin(1.0 / t, y, 2)
            abs_e.append(abs(a - b))
            rel_e.append(abs(a - b) / abs(b))
    return _report("self_duality", abs_e, rel_e, tol, t0)


_TRUNC_ARGS = ((1.0, 0.3, 1.0, 0.3), (0.7, 0.2, 1.1, -0.3), (1.5, -0.4, 0.6, 0.1), (2.0, 0.5, 2.0, -0.5))


def check_truncation(Ls: Sequence[int] = (20, 40, 80), args=_TRUNC_ARGS, tol: float = 1e-6) -> CheckReport:
    """Kernels of the truncations ``Z cap [-L, L]`` against the lattice kernel:
    the sup difference must decrease in ``L`` and end below ``tol``."""
    t0 = time.perf_counter()
    lattice = [kernels.kernel_lattice(*a) for a in args]
    diffs, values = [], []
    for L in Ls:
        trunc = PointMeasure.integer_lattice().truncate(L)
        values.append([kernels.kernel_simple(trunc, *a) for a in args])
        diffs.append(max(abs(v - k) for v, k in zip(values[-1], lattice)))
    monotone = all(b < a for a, b in zip(diffs, diffs[1:]))
    # diagnostic only: one Richardson step assuming an O(1/L) error
    extrapolated = max(abs(2 * b - a - k) for a, b, k in zip(values[-2], values[-1], lattice)) if len(Ls) > 1 else None
    return CheckReport(
        name="lattice_truncation",
        max_abs_err=diffs[-1],
        max_rel_err=diffs[-1],
        samples=len(args) * len(Ls),
        passed=bool(monotone and diffs[-1] < tol),
        tolerance=tol,
        runtime=time.perf_counter() - t0,
        details={"L": list(Ls), "sup_diff": diffs, "monotone": monotone, "halving_ratios": [b / a for a, b in zip(diffs, diffs[1:])], "richardson_sup_diff": extrapolated},
    )


# equal-time and small time-shift offsets; the O(1/u) error constant grows with |t - s|
_SINE_OFFSETS = tuple((s, 0.0, t, y) for s, t in ((0.0, 0.0), (0.0, 0.2), (0.2, 0.0)) for y in (0.0, 0.25, 0.5, 1.0))


def scaled_lattice_kernel(u: float, s: float, x: float, t: float, y: float) -> float:
    """Lattice kernel at times ``1/(u+s), 1/(u+t)`` and points ``x/(u+s), y/(u+t)``,
    divided by ``sqrt((u+s)(u+t))``; tends to the sine kernel ``K(t-s, y-x)``."""
    a, b = u + s, u + t
    return kernels.kernel_lattice(1.0 / a, x / a, 1.0 / b, y / b) / math.sqrt(a * b)


def check_sine_limit(us: Sequence[float] = (10.0, 40.0, 160.0), offsets=_SINE_OFFSETS, tol: float = 1e-3) -> CheckReport:
    t0 = time.perf_counter()
    errs = []
    for u in us:
        errs.append(
            max(abs(scaled_lattice_kernel(u, s, x, t, y) - kernels.sine_kernel(t - s, y - x)) for s, x, t, y in offsets)
        )
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    return CheckReport(
        name="sine_limit",
        max_abs_err=errs[-1],
        max_rel_err=errs[-1],
        samples=len(us) * len(offsets),
        passed=bool(decreasing and errs[-1] < tol),
        tolerance=tol,
        runtime=time.perf_counter() - t0,
        details={"u": list(us), "sup_err": errs, "decreasing": decreasing},
    )


def check_theta_modular(taus=(0.6j, 0.8j, 1.0j, 1.3j, 0.2 + 0.9j, -0.4 + 1.1j), vs=(0.0, 0.3, 0.1 + 0.2j, -0.4 - 0.3j), tol: float = 1e-12) -> CheckReport:
    t0 = time.perf_counter()
    abs_e, rel_e = [], []
    for tau in taus:
        for v in vs:
            a = kernels.theta3(v, tau, transform="never")
            b = kernels.theta3(v, tau, transform="always")
            abs_e.append(abs(a - b))
            rel_e.append(abs(a - b) / abs(a))
    return _report("theta_modular", abs_e, rel_e, tol, t0)


# -- checks: Monte Carlo -------------------------------------------------------------


def check_survival_mc(N: int, x, nu=None, T: float = 100.0, paths: int = 100_000, seed: int = 7, steps: int = 400) -> CheckReport:
    """Monte Carlo probability that independent Brownian motions from ``x`` with
    drifts ``nu`` stay ordered up to ``T``.

    Paths are sampled on a quadratic time grid; between grid points each
    adjacent pair survives with the Brownian-bridge probability
    ``1 - exp(-d0 d1 / dt)`` (exact for two particles). The driftless target is
    ``c_N T^{-N(N-1)/4} h_N(x)``; the drifted target is the large-``T`` limit
    ``exp(-nu.x) det[exp(nu_j x_k)]``. Passes when within 3 sigma.
    """
    t0 = time.perf_counter()
    x = np.asarray(x, dtype=float)
    nu = np.zeros(N) if nu is None else np.asarray(nu, dtype=float)
    grid = T * (np.arange(steps + 1) / steps) ** 2
    weights = []
    for rng in (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(-(-paths // 8192))):
        m = min(8192, paths - 8192 * len(weights))
        pos = np.tile(x, (m, 1))
        w = np.ones(m)
        for k in range(steps):
            dt = grid[k + 1] - grid[k]
            new = pos + nu * dt + math.sqrt(dt) * rng.standard_normal((m, N))
            d0 = np.diff(pos, axis=1)
            d1 = np.diff(new, axis=1)
            alive = np.all(d1 > 0, axis=1)
            cross = np.prod(1.0 - np.exp(-np.clip(d0 * d1, 0.0, None) / dt), axis=1)
            w = w * np.where(alive, cross, 0.0)
            pos = new
        weights.append(w)
    w = np.concatenate(weights)
    est = float(w.mean())
    sigma = float(w.std(ddof=1) / math.sqrt(w.size))
    if np.all(nu == 0):
        target = survival_constant(N) * T ** (-N * (N - 1) / 4.0) * _vdm(x)
        label = f"survival_driftless_N{N}"
    else:
        e = np.exp(np.outer(nu, x))
        target = float(math.exp(-nu @ x) * np.linalg.det(e))
        label = f"survival_drifted_N{N}"
    # with one particle every path survives and the spread is exactly zero
    diff = abs(est - target)
    z = float(diff / sigma) if sigma > 0 else (0.0 if diff <= 1e-12 else math.inf)
    return CheckReport(
        name=label,
        max_abs_err=diff,
        max_rel_err=float(diff / abs(target)),
        samples=paths,
        passed=bool(z <= 3.0),
        tolerance=3.0,
        runtime=time.perf_counter() - t0,
        details={"T": T, "estimate": est, "sigma": sigma, "target": float(target), "z": z},
    )


def check_survival_drifted_sequence(Ts=(1.0, 4.0, 16.0), paths: int = 100_000, seed: int = 8) -> CheckReport:
    """Drifted survival for ``N=2, x=(0,1), nu=(0,1)`` approaching ``e^{-1}(e-1)``:
    the deviation must shrink along ``Ts`` and the last estimate be within 3 sigma."""
    t0 = time.perf_counter()
    reps = [check_survival_mc(2, (0.0, 1.0), (0.0, 1.0), T, paths, seed + i, steps=200) for i, T in enumerate(Ts)]
    devs = [r.details["estimate"] - r.details["target"] for r in reps]
    shrinking = all(abs(b) <= abs(a) + 3 * r.details["sigma"] for a, b, r in zip(devs, devs[1:], reps[1:]))
    last = reps[-1]
    return CheckReport(
        name="survival_drifted_limit",
        max_abs_err=last.max_abs_err,
        max_rel_err=last.max_rel_err,
        samples=paths * len(Ts),
        passed=bool(shrinking and last.passed),
        tolerance=3.0,
        runtime=time.perf_counter() - t0,
        details={"T": list(Ts), "estimates": [r.details["estimate"] for r in reps], "target": last.details["target"], "sigmas": [r.details["sigma"] for r in reps]},
    )


def _chi2_cells(nu, t: float, samples: np.ndarray, bins: int = 10, order: int = 16):
    """Cell probabilities for ordered pairs by tensor Gauss-Legendre on the
    oracle density; sparse cells are pooled with the remainder."""
    lo1, hi1 = np.quantile(samples[:, 0], [0.01, 0.99])
    lo2, hi2 = np.quantile(samples[:, 1], [0.01, 0.99])
    e1 = np.linspace(lo1, hi1, bins + 1)
    e2 = np.linspace(lo2, hi2, bins + 1)
    g, w = np.polynomial.legendre.leggauss(order)
    probs = np.zeros((bins, bins))
    for i in range(bins):
        a1, b1 = e1[i], e1[i + 1]
        for j in range(bins):
            a2, b2 = e2[j], e2[j + 1]
            if b2 <= a1:
                continue
            y1 = 0.5 * (b1 - a1) * g + 0.5 * (a1 + b1)
            y2 = 0.5 * (b2 - a2) * g + 0.5 * (a2 + b2)
            Y = np.stack(np.meshgrid(y1, y2, indexing="ij"), axis=-1).reshape(-1, 2)
            f = oracle_origin_density(t, Y, nu).reshape(order, order)
            probs[i, j] = 0.25 * (b1 - a1) * (b2 - a2) * (w[:, None] * w[None, :] * f).sum()
    counts, _, _ = np.histogram2d(samples[:, 0], samples[:, 1], bins=[e1, e2])
    return probs.ravel(), counts.ravel()


def check_matrix_model_chi2(nu=(0.0, 1.0), t: float = 1.0, n_samples: int = 100_000, seed: int = 9, alpha: float = 0.01) -> CheckReport:
    """Matrix-model draws against the origin-start density, chi-squared on a
    2-D grid of cells (cells straddling the diagonal use the density's zero
    extension), remainder pooled."""
    t0 = time.perf_counter()
    nu = np.asarray(nu, dtype=float)
    s = sampler.sample_fixed_time(nu, t, len(nu), seed, n_samples)
    probs, counts = _chi2_cells(nu, t, s)
    exp_counts = probs * n_samples
    keep = exp_counts >= 5
    obs = np.append(counts[keep], n_samples - counts[keep].sum())
    ex = np.append(exp_counts[keep], n_samples - exp_counts[keep].sum())
    res = stats.chisquare(obs, ex)
    return _stat_report("matrix_model_chi2", [res.pvalue], alpha, n_samples, t0, cells=int(obs.size), statistic=float(res.statistic))


def check_sde_vs_matrix(nu=(0.0, 1.0), t: float = 1.0, n_paths: int = 10_000, seed: int = 10, alpha: float = 0.01, dt_max: float = 1e-3) -> CheckReport:
    """SDE continued from the entrance draw at ``t0 = 1e-3`` against direct
    matrix-model samples at ``t``: two-sample KS on each order statistic."""
    t0 = time.perf_counter()
    nu = np.asarray(nu, dtype=float)
    cfg = sampler.SdeConfig(t_end=t, dt_max=dt_max, t0=1e-3)
    _, pos = sampler.simulate_ensemble(PointMeasure.delta(len(nu)), nu, cfg, n_paths, seed)
    direct = sampler.sample_fixed_time(nu, t, len(nu), seed + 1000, n_paths)
    pv = [stats.ks_2samp(pos[:, -1, j], direct[:, j]).pvalue for j in range(len(nu))]
    return _stat_report("sde_vs_matrix_model", pv, alpha, n_paths, t0, p_values=pv)


def check_reciprocal_mc(nu=(0.0, 1.0), times=(0.5, 2.0), n_paths: int = 10_000, seed: int = 11, alpha: float = 0.01, dt_max: float = 1e-3) -> CheckReport:
    """Monte Carlo reciprocal relation: ``(1/t) X(t)`` from the origin with drift
    ``nu`` (SDE from the entrance draw) against ``X(1/t)`` started from ``nu``
    without drift (SDE), per order statistic two-sample KS."""
    t0 = time.perf_counter()
    nu = np.asarray(nu, dtype=float)
    n = len(nu)
    pv = []
    for i, t in enumerate(times):
        cfg_a = sampler.SdeConfig(t_end=t, dt_max=dt_max, t0=1e-3)
        _, a = sampler.simulate_ensemble(PointMeasure.delta(n), nu, cfg_a, n_paths, seed + 2 * i)
        cfg_b = sampler.SdeConfig(t_end=1.0 / t, dt_max=dt_max)
        _, b = sampler.simulate_ensemble(PointMeasure.from_points(nu), np.zeros(n), cfg_b, n_paths, seed + 2 * i + 1)
        pv += [stats.ks_2samp(a[:, -1, j] / t, b[:, -1, j]).pvalue for j in range(n)]
    return _stat_report("reciprocal_mc", pv, alpha, 2 * n_paths * len(times), t0, p_values=pv, times=list(times))


# -- suites ---------------------------------------------------------------------------


def _quick_suite(seed: int) -> list[Callable[[], CheckReport]]:
    return [
        lambda: check_reciprocal(1, grid=30, seed=seed),
        lambda: check_reciprocal(2, grid=30, seed=seed),
        lambda: check_reciprocal(3, grid=30, seed=seed),
        lambda: check_reciprocal_multitime(2, 20, seed=seed),
        lambda: check_qn_inversion(2, 20, seed=seed),
        lambda: check_qn_inversion(3, 20, seed=seed),
        lambda: check_residue_vs_simple(10, seed=seed),
        lambda: check_residue_vs_contour(),
        lambda: check_equal_time_forms(10, seed=seed),
        lambda: check_kernel_vs_bruteforce((0.0, 1.0), 1.0, (-0.5, 0.5, 1.5)),
        lambda: check_schur_asymptotics(),
        lambda: check_backward_kolmogorov(points=5, seed=seed),
        lambda: check_theta_modular(),
        lambda: check_survival_mc(2, (0.0, 1.0), T=100.0, paths=20_000, seed=seed, steps=100),
        lambda: check_matrix_model_chi2(n_samples=20_000, seed=seed),
    ]


def _default_suite(seed: int) -> list[Callable[[], CheckReport]]:
    return [
        lambda: check_reciprocal(1, seed=seed),
        lambda: check_reciprocal(2, seed=seed),
        lambda: check_reciprocal(3, seed=seed),
        lambda: check_reciprocal_multitime(2, 100, seed=seed),
        lambda: check_qn_inversion(1, 100, seed=seed),
        lambda: check_qn_inversion(2, 100, seed=seed),
        lambda: check_qn_inversion(3, 100, seed=seed),
        lambda: check_residue_vs_simple(40, seed=seed),
        lambda: check_residue_vs_contour(),
        lambda: check_equal_time_forms(40, seed=seed),
        lambda: check_kernel_vs_bruteforce((0.0, 1.0), 1.0, (-0.5, 0.5, 1.5)),
        lambda: check_kernel_vs_bruteforce((0.0, 0.0), 1.0, (-0.5, 0.3, 1.1)),
        lambda: check_kernel_vs_bruteforce((-1.0, 0.0, 1.0), 1.0, (-0.8, 0.6)),
        lambda: check_one_point_mass(),
        lambda: check_self_duality(),
        lambda: check_schur_asymptotics(),
        lambda: check_backward_kolmogorov(seed=seed),
        lambda: check_backward_kolmogorov(seed=seed, nu=(0.0, 1.0)),
        lambda: check_theta_modular(),
        lambda: check_truncation(),
        lambda: check_sine_limit(),
        lambda: check_survival_mc(2, (0.0, 1.0), T=100.0, seed=seed),
        lambda: check_survival_mc(3, (0.0, 1.0, 2.0), T=50.0, seed=seed + 1),
        lambda: check_survival_drifted_sequence(seed=seed + 2),
        lambda: check_matrix_model_chi2(seed=seed),
        lambda: check_sde_vs_matrix(seed=seed),
        lambda: check_reciprocal_mc(seed=seed),
    ]


SUITES = {"quick": _quick_suite, "default": _default_suite}


def run_all(config: dict | None = None) -> list[CheckReport]:
    """Run a suite of checks. ``config`` keys: ``suite`` (``"quick"`` or
    ``"default"``) and ``seed`` (offsets the seeds of every randomized check)."""
    config = dict(config or {})
    suite = config.get("suite", "quick")
    seed = int(config.get("seed", 42))
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    reports = [check() for check in SUITES[suite](seed)]
    return sorted(reports, key=lambda r: r.name)


def summary_table(reports: Iterable[CheckReport]) -> str:
    lines = [f"{'check':32s} {'result':6s} {'max_rel_err':>12s} {'p_value':>10s} {'tol':>9s} {'secs':>7s}"]
    for r in reports:
        pv = "" if r.p_value is None else f"{r.p_value:.3g}"
        mre = "" if not math.isfinite(r.max_rel_err) else f"{r.max_rel_err:.3g}"
        lines.append(
            f"{r.name:32s} {'PASS' if r.passed else 'FAIL':6s} {mre:>12s} {pv:>10s} {r.tolerance:>9.3g} {r.runtime:>7.2f}"
        )
    return "\n".join(lines)
