"""Transition and joint densities of noncolliding Brownian motion with drift.

All functions accept either a single configuration (a :class:`WeylVector` or
a 1-D sequence, returning a float) or a batch given as an array whose last
axis indexes particles (returning an array). Every quantity is assembled in
log space and exponentiated once at the end; pass ``log=True`` to get the
``(sign, log|value|)`` pair instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._confluent import exp_rows, log_reduced_vandermonde, slogdet_log_matrix
from .core import (
    LOG_2PI,
    PointMeasure,
    WeylVector,
    as_weyl,
    check_time,
    log_vandermonde,
)
from .errors import DegenerateStart, OrderViolation, SizeMismatch


def _config(v, strictness: str = "open") -> tuple[np.ndarray, bool]:
    """Return ``(array, batched)``; validates ordering along the last axis."""
    if isinstance(v, (WeylVector, PointMeasure)):
        return as_weyl(v, strictness).array, False
    arr = np.asarray(v, dtype=float)
    if arr.ndim <= 1:
        return as_weyl(np.atleast_1d(arr), strictness).array, False
    d = np.diff(arr, axis=-1)
    if strictness == "open" and np.any(d <= 0):
        raise OrderViolation("configuration batch contains non-increasing rows")
    if strictness == "closed" and np.any(d < 0):
        raise OrderViolation("configuration batch contains decreasing rows")
    return arr, True


def _drift(nu) -> np.ndarray:
    return _config(nu, "closed")[0]


def _finish(sign, logabs, batched: bool, log: bool):
    if log:
        if batched:
            return sign, logabs
        return float(sign), float(logabs)
    val = sign * np.exp(logabs)
    return val if batched else float(val)


def _same_size(*arrs: np.ndarray) -> int:
    n = arrs[0].shape[-1]
    for a in arrs[1:]:
        if a.shape[-1] != n:
            raise SizeMismatch(f"expected {n} particles, got {a.shape[-1]}")
    return n


# -- Karlin-McGregor --------------------------------------------------------


def log_km_determinant(t, y: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched ``(sign, log|det[p(t, y_j | x_k)]|)``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    logp = -((y[..., :, None] - x[..., None, :]) ** 2) / (2.0 * t[..., None, None])
    sign, logabs = slogdet_log_matrix(logp)
    n = y.shape[-1]
    return sign, logabs - 0.5 * n * (LOG_2PI + np.log(t))


def km_determinant(t, y, x, log: bool = False):
    """Absorbing-wall transition density ``q_N(t, y | x) = det[p(t, y_j | x_k)]``."""
    check_time(t)
    ya, yb = _config(y)
    xa, xb = _config(x)
    _same_size(ya, xa)
    sign, logabs = log_km_determinant(t, ya, xa)
    return _finish(sign, logabs, yb or xb, log)


# -- confluent exponential determinant --------------------------------------


def confluent_drift_determinant(nu, x, log: bool = False):
    """Generalized ``D(nu, x)``: ``det[exp(nu_j x_k)]`` with derivative rows
    ``x^m exp(v x)/m!`` for the m-th repetition of a drift value ``v``."""
    nua = _drift(nu)
    xa = np.asarray(x.values if isinstance(x, WeylVector) else x, dtype=float)
    batched = xa.ndim > 1
    xa = np.atleast_1d(xa)
    _same_size(nua, xa)
    sign, logabs = exp_rows(tuple(nua)).slogdet(xa)
    return _finish(sign, logabs, batched, log)


# -- single-time densities ---------------------------------------------------


def noncolliding_density(t, y, x, log: bool = False):
    """Driftless transition density ``h_N(y)/h_N(x) q_N(t, y | x)``."""
    check_time(t)
    ya, yb = _config(y)
    xa, xb = _config(x, "closed")
    _same_size(ya, xa)
    sx, lx = log_vandermonde(xa)
    if np.any(sx == 0):
        raise DegenerateStart(
            "start configuration has coincident particles; "
            "use drifted_density_from_origin for the collapsed start"
        )
    sy, ly = log_vandermonde(ya)
    sq, lq = log_km_determinant(t, ya, xa)
    return _finish(sy * sx * sq, ly - lx + lq, yb or xb, log)


def drifted_density(t, y, x, nu, log: bool = False):
    """Transition density with drift vector ``nu`` (weakly increasing).

    ``exp(-t|nu|^2/2) D(nu, y)/D(nu, x) q_N(t, y | x)``. The start ``x`` must be
    strictly ordered, or fully collapsed onto one point (handled by
    translation of :func:`drifted_density_from_origin`).
    """
    check_time(t)
    nua = _drift(nu)
    ya, yb = _config(y)
    xa, xb = _config(x, "closed")
    n = _same_size(ya, xa, nua)
    if n > 1:
        gaps = np.diff(xa, axis=-1)
        collapsed = np.all(gaps == 0, axis=-1)
        if np.any(collapsed):
            if xb or yb:
                if not np.all(collapsed):
                    raise DegenerateStart("mixed collapsed and ordered starts in one batch")
            return drifted_density_from_origin(t, ya - xa[..., :1], nua, log=log)
        if np.any(gaps == 0):
            raise DegenerateStart(
                "partially coincident start configurations are not supported"
            )
    rows = exp_rows(tuple(nua))
    sy, ly = rows.slogdet_rows(ya)
    sx, lx = rows.slogdet_rows(xa)
    sq, lq = log_km_determinant(t, ya, xa)
    logv = -0.5 * t * float(nua @ nua) + ly - lx + lq
    return _finish(sy * sx * sq, logv, yb or xb, log)


def drifted_density_from_origin(t, y, nu, log: bool = False):
    """Density at time ``t`` of the drifted process started from ``N delta_0``.

    Uses ``(2 pi t)^{-N/2} exp(-t|nu|^2/2 - |y|^2/2t) h_N(y/t) D(nu, y) / h'(nu)``,
    where ``h'`` is the product of differences over pairs of *distinct* drift
    values. For simple ``nu`` this equals
    ``t^{-N} h_N(y/t)/h_N(nu) q_N(1/t, y/t | nu)``; repeated drifts are the
    continuous limit of that expression.
    """
    check_time(t)
    nua = _drift(nu)
    ya, yb = _config(y)
    n = _same_size(ya, nua)
    sd, ld = exp_rows(tuple(nua)).slogdet(ya)
    sh, lh = log_vandermonde(ya / t)
    logv = (
        -0.5 * n * (LOG_2PI + math.log(t))
        - 0.5 * t * float(nua @ nua)
        - (ya * ya).sum(axis=-1) / (2.0 * t)
        + lh
        + ld
        - log_reduced_vandermonde(nua)
    )
    return _finish(sd * sh, logv, yb, log)


# -- multitime densities -----------------------------------------------------


@dataclass(frozen=True)
class MultitimeConfiguration:
    """Configurations ``x^(1..M)`` observed at increasing times ``t_1 < ... < t_M``."""

    times: tuple[float, ...]
    configs: tuple[WeylVector, ...]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.configs) or not self.times:
            raise SizeMismatch("need one configuration per time")
        check_time(self.times[0], "times")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise OrderViolation("times must be strictly increasing")
        n = len(self.configs[0])
        if any(len(c) != n for c in self.configs):
            raise SizeMismatch("all configurations must have the same particle count")

    @classmethod
    def build(cls, times: Sequence[float], configs: Sequence) -> "MultitimeConfiguration":
        return cls(tuple(float(t) for t in times), tuple(as_weyl(c) for c in configs))

    @property
    def n(self) -> int:
        return len(self.configs[0])


def _start_array(start) -> np.ndarray:
    if isinstance(start, PointMeasure):
        return np.asarray(start.points(), dtype=float)
    return as_weyl(start, "closed").array


def multitime_density(mc: MultitimeConfiguration, start, nu, log: bool = False):
    """Joint density of ``(X(t_1), ..., X(t_M))``: a product of one-step densities.

    ``start`` is a :class:`PointMeasure` or closed configuration; the fully
    collapsed start uses the origin-entrance density for the first factor.
    """
    x0 = _start_array(start)
    nua = _drift(nu)
    _same_size(x0, nua, mc.configs[0].array)
    sign, total = drifted_density(mc.times[0], mc.configs[0], x0, nua, log=True)
    for m in range(1, len(mc.times)):
        s, lv = drifted_density(
            mc.times[m] - mc.times[m - 1], mc.configs[m], mc.configs[m - 1], nua, log=True
        )
        sign *= s
        total += lv
    return _finish(sign, total, False, log)
