"""Configuration and measure types plus the scalar building blocks.

Everything here is immutable. Positions are plain float64; ordering checks
are exact comparisons with no tolerance, and coincident atoms of a
:class:`PointMeasure` are merged only when the floats are bitwise equal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import NonPositiveFactor, NonPositiveTime, OrderViolation

Strictness = Literal["open", "closed"]
MeasureKind = Literal["finite", "lattice"]

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class WeylVector:
    """An ordered real N-vector.

    ``strictness="open"`` demands ``values[j] < values[j+1]`` (the open Weyl
    chamber); ``"closed"`` allows ties.
    """

    values: tuple[float, ...]
    strictness: Strictness = "open"

    def __post_init__(self) -> None:
        if len(self.values) < 1:
            raise ValueError("WeylVector needs at least one entry")
        if self.strictness not in ("open", "closed"):
            raise ValueError(f"unknown strictness {self.strictness!r}")
        v = self.values
        for j in range(len(v) - 1):
            if self.strictness == "open" and not v[j] < v[j + 1]:
                raise OrderViolation(
                    f"entries {j},{j + 1} not strictly increasing: {v[j]!r} >= {v[j + 1]!r}"
                )
            if self.strictness == "closed" and not v[j] <= v[j + 1]:
                raise OrderViolation(
                    f"entries {j},{j + 1} decreasing: {v[j]!r} > {v[j + 1]!r}"
                )

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, j):
        return self.values[j]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def is_simple(self) -> bool:
        return all(a < b for a, b in zip(self.values, self.values[1:]))

    @property
    def is_collapsed(self) -> bool:
        """True when every entry is the same point (N particles at one site)."""
        return all(a == self.values[0] for a in self.values)

    def to_measure(self) -> "PointMeasure":
        return PointMeasure.from_points(self.values)


def make_weyl_vector(values: Iterable[float], strictness: Strictness = "open") -> WeylVector:
    """Validate ``values`` and wrap them as a :class:`WeylVector`."""
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValueError("values must be nonempty")
    return WeylVector(vals, strictness)


def as_weyl(values, strictness: Strictness = "open") -> WeylVector:
    """Coerce a WeylVector, PointMeasure or sequence to a WeylVector.

    An existing WeylVector is re-validated only if it is weaker than requested.
    """
    if isinstance(values, WeylVector):
        if values.strictness == strictness or strictness == "closed":
            return values
        return WeylVector(values.values, strictness)
    if isinstance(values, PointMeasure):
        return WeylVector(tuple(values.points()), strictness)
    return make_weyl_vector(np.ravel(np.asarray(values, dtype=float)).tolist(), strictness)


@dataclass(frozen=True)
class PointMeasure:
    """Sum of point masses with positive integer multiplicities.

    ``kind="lattice"`` denotes the integer lattice measure (one atom at every
    integer). It stores no atoms and is materialised through :meth:`truncate`.
    """

    atoms: tuple[tuple[float, int], ...] = field(default=())
    kind: MeasureKind = "finite"

    def __post_init__(self) -> None:
        if self.kind not in ("finite", "lattice"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "lattice":
            if self.atoms:
                raise ValueError("lattice measures carry no explicit atoms")
            return
        prev = -math.inf
        for loc, mult in self.atoms:
            if not loc > prev:
                raise OrderViolation("atom locations must be strictly increasing")
            if int(mult) != mult or mult < 1:
                raise ValueError(f"multiplicity must be a positive integer, got {mult!r}")
            prev = loc

    @classmethod
    def from_points(cls, points: Iterable[float]) -> "PointMeasure":
        """Sort ``points`` and merge bitwise-equal entries into multiplicities."""
        counts: dict[float, int] = {}
        for p in points:
            p = float(p)
            counts[p] = counts.get(p, 0) + 1
        return cls(tuple(sorted(counts.items())), "finite")

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, int]]) -> "PointMeasure":
        counts: dict[float, int] = {}
        for loc, mult in atoms:
            counts[float(loc)] = counts.get(float(loc), 0) + int(mult)
        return cls(tuple(sorted(counts.items())), "finite")

    @classmethod
    def delta(cls, n: int, at: float = 0.0) -> "PointMeasure":
        """``n`` particles stacked at ``at`` (``N delta_0`` by default)."""
        return cls(((float(at), int(n)),), "finite")

    @classmethod
    def integer_lattice(cls) -> "PointMeasure":
        return cls((), "lattice")

    @property
    def total_mass(self) -> float:
        if self.kind == "lattice":
            return math.inf
        return float(sum(m for _, m in self.atoms))

    @property
    def size(self) -> int:
        if self.kind == "lattice":
            raise ValueError("lattice measure has infinite mass")
        return sum(m for _, m in self.atoms)

    def simple(self) -> bool:
        """True iff no point carries multiplicity above one."""
        return self.kind == "lattice" or all(m == 1 for _, m in self.atoms)

    def support(self) -> np.ndarray:
        return np.array([loc for loc, _ in self.atoms], dtype=float)

    def multiplicities(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=int)

    def points(self) -> list[float]:
        """Atoms listed with repetition, in increasing order."""
        if self.kind == "lattice":
            raise ValueError("cannot list the points of an infinite measure")
        return [loc for loc, m in self.atoms for _ in range(m)]

    def truncate(self, L: float) -> "PointMeasure":
        """Restriction to ``[-L, L]``."""
        if self.kind == "lattice":
            n = math.floor(L)
            return PointMeasure(tuple((float(k), 1) for k in range(-n, n + 1)), "finite")
        return PointMeasure(tuple((loc, m) for loc, m in self.atoms if -L <= loc <= L), "finite")

    def to_json(self) -> str:
        return json.dumps({"atoms": [[loc, m] for loc, m in self.atoms], "kind": self.kind})

    @classmethod
    def from_json(cls, text: str | dict) -> "PointMeasure":
        obj = json.loads(text) if isinstance(text, str) else text
        kind = obj.get("kind", "finite")
        if kind == "lattice":
            return cls.integer_lattice()
        return cls.from_atoms((a[0], a[1]) for a in obj.get("atoms", []))


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float
    x: float

    def __post_init__(self) -> None:
        if not self.t >= 0:
            raise NonPositiveTime(f"time must be >= 0, got {self.t!r}")


def vandermonde(x) -> float:
    """Product of differences ``prod_{j<k} (x_k - x_j)``."""
    v = x.values if isinstance(x, WeylVector) else tuple(np.ravel(x))
    out = 1.0
    for j in range(len(v)):
        for k in range(j + 1, len(v)):
            out *= v[k] - v[j]
    return float(out)


def log_vandermonde(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched ``(sign, log|h_N|)`` over the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    sign = np.ones(x.shape[:-1])
    logabs = np.zeros(x.shape[:-1])
    for j in range(n):
        for k in range(j + 1, n):
            d = x[..., k] - x[..., j]
            sign = sign * np.sign(d)
            with np.errstate(divide="ignore"):
                logabs = logabs + np.log(np.abs(d))
    return sign, logabs


def dilate(xi: PointMeasure, c: float) -> PointMeasure:
    """Dilatation ``c o xi``: every atom moved from ``u`` to ``c*u``."""
    if not c > 0:
        raise NonPositiveFactor(f"dilatation factor must be positive, got {c!r}")
    if xi.kind == "lattice":
        if c == 1:
            return xi
        raise ValueError("dilatation of the integer lattice is not a lattice measure")
    return PointMeasure(tuple((loc * c, m) for loc, m in xi.atoms), "finite")


def check_time(t, name: str = "t") -> None:
    if not np.all(np.asarray(t) > 0):
        raise NonPositiveTime(f"{name} must be > 0, got {t!r}")


def gaussian_density(t, y, x):
    """Heat kernel ``(2 pi t)^{-1/2} exp(-(y-x)^2 / 2t)``; broadcasts over arrays."""
    check_time(t)
    t = np.asarray(t, dtype=float)
    out = np.exp(-((np.asarray(y) - np.asarray(x)) ** 2) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)
    return float(out) if np.ndim(out) == 0 else out


def log_gaussian_density(t, y, x):
    check_time(t)
    return -((np.asarray(y) - np.asarray(x)) ** 2) / (2.0 * t) - 0.5 * (LOG_2PI + np.log(t))


def survival_constant(n: int) -> float:
    """``c_N = pi^{-N/2} prod_{j=1}^{N} Gamma(j/2)/Gamma(j)``."""
    out = math.pi ** (-n / 2.0)
    for j in range(1, n + 1):
        out *= math.gamma(j / 2.0) / math.gamma(j)
    return out


def parse_floats(values: Sequence[float] | str) -> list[float]:
    if isinstance(values, str):
        return [float(v) for v in values.split(",") if v.strip()]
    return [float(v) for v in values]
