"""Samplers: Euler-Maruyama for the interacting SDE and an exact matrix model.

The SDE drift is ``grad log D(nu, x)``, the Doob-transform drift whose
transition density is :func:`ncbm.densities.drifted_density`. For drifts that
all coincide this is the Dyson repulsion ``sum_{k != j} 1/(x_j - x_k)`` plus
the common drift; for distinct drifts it is *not* ``nu_j`` plus the Dyson
repulsion (that process has a different law). The latter is available as
``drift="literal"`` for comparison.

Randomness: paths are grouped in fixed-size chunks, chunk ``c`` drawing from
``SeedSequence(seed).spawn(...)[c]``, so results do not depend on how the
work is scheduled and each chunk can be regenerated on its own.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Literal, Sequence

import numpy as np

from ._confluent import exp_rows
from .core import PointMeasure, WeylVector, as_weyl, check_time
from .errors import OrderViolation, SizeMismatch, StepFailure

CHUNK = 1024
DEFAULT_SEED = 20130101
Scheme = Literal["euler-maruyama", "matrix-model"]


@dataclass(frozen=True)
class SdeConfig:
    """Step control for :func:`simulate_sde`.

    ``dt = min(dt_max, c * min_gap**2, time to next record)``; a proposal that
    breaks the ordering is rejected and retried with half the step and fresh
    noise. ``t0`` is the entrance time used for the collapsed start.
    """

    t_end: float = 1.0
    dt_max: float = 1e-3
    c: float = 0.1
    dt_min: float = 1e-12  # floor on rejection halving, relative to the proposed step
    record_times: tuple[float, ...] | None = None
    t0: float = 1e-3
    drift: Literal["exact", "literal"] = "exact"

    def __post_init__(self) -> None:
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if self.drift not in ("exact", "literal"):
            raise ValueError(f"unknown drift mode {self.drift!r}")
        rec = self.records()
        if any(b <= a for a, b in zip(rec, rec[1:])) or rec[-1] > self.t_end or rec[0] < 0:
            raise ValueError("record_times must be increasing within [0, t_end]")

    def records(self) -> tuple[float, ...]:
        if self.record_times is None:
            return (float(self.t_end),)
        return tuple(float(r) for r in self.record_times)


@dataclass(frozen=True)
class SamplePath:
    """Positions ``positions[k]`` (strictly ordered) observed at ``times[k]``."""

    times: np.ndarray
    positions: np.ndarray
    seed: int | None
    scheme: Scheme

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)
        if pos.shape[0] != times.shape[0]:
            raise SizeMismatch("one configuration per recorded time is required")
        if times.size and times[0] < 0:
            raise ValueError("times must be nonnegative")
        if np.any(np.diff(times) <= 0):
            raise OrderViolation("times must be strictly increasing")
        if np.any(np.diff(pos, axis=-1) <= 0):
            raise OrderViolation("positions must be strictly ordered at every time")

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def at(self, k: int) -> WeylVector:
        return WeylVector(tuple(self.positions[k].tolist()))


# -- matrix model ----------------------------------------------------------------


def _chunk_rngs(seed: int, n_items: int, chunk: int = CHUNK) -> list[np.random.Generator]:
    n_chunks = max(1, -(-n_items // chunk))
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_chunks)]


def _gue_source_eigs(rng: np.random.Generator, nu: np.ndarray, t: float, m: int) -> np.ndarray:
    n = len(nu)
    a = rng.standard_normal((m, n, n)) * math.sqrt(t / 2.0)
    b = rng.standard_normal((m, n, n)) * math.sqrt(t / 2.0)
    # G = (A + A^T)/sqrt2 + i (B - B^T)/sqrt2: off-diagonal E|G_jk|^2 = t, diagonal variance t
    g = (a + np.swapaxes(a, 1, 2)) / math.sqrt(2.0) + 1j * (b - np.swapaxes(b, 1, 2)) / math.sqrt(2.0)
    g = g + np.eye(n) * (t * nu)
    return np.linalg.eigvalsh(g)


def sample_fixed_time(nu, t: float, N: int | None = None, seed: int = DEFAULT_SEED, n_samples: int | None = None):
    """Exact draw(s) of the configuration at time ``t`` of the drifted process
    started from ``N delta_0``: sorted eigenvalues of ``G + t diag(nu)``.

    ``G`` is Hermitian with independent centred complex Gaussian entries of
    variance ``t`` (real diagonal of variance ``t``). Returns a
    :class:`WeylVector` when ``n_samples`` is None, otherwise an array of shape
    ``(n_samples, N)``.
    """
    check_time(t)
    nua = as_weyl(nu, "closed").array
    if N is not None and N != len(nua):
        raise SizeMismatch(f"drift vector has {len(nua)} entries, N={N}")
    m = 1 if n_samples is None else int(n_samples)
    rngs = _chunk_rngs(seed, m)
    out = np.concatenate(
        [_gue_source_eigs(rng, nua, t, min(CHUNK, m - c * CHUNK)) for c, rng in enumerate(rngs)]
    )
    if n_samples is None:
        return WeylVector(tuple(out[0].tolist()))
    return out


def entrance_step(nu, t0: float, N: int | None = None, seed: int = DEFAULT_SEED, n_samples: int | None = None):
    """Exact configuration at the small time ``t0`` from ``N delta_0``: the
    initial condition for SDE paths started from the collapsed point."""
    return sample_fixed_time(nu, t0, N, seed, n_samples)


# -- Euler-Maruyama ----------------------------------------------------------------


def _drift_fn(nu: np.ndarray, mode: str):
    if mode == "literal":
        def literal(x: np.ndarray) -> np.ndarray:
            d = x[..., :, None] - x[..., None, :]
            np.einsum("...jj->...j", d)[...] = np.inf
            return nu + (1.0 / d).sum(axis=-1)

        return literal
    rows = exp_rows(tuple(nu))
    return rows.grad_log


def _start_positions(start, n: int) -> tuple[np.ndarray | None, bool]:
    if isinstance(start, PointMeasure):
        if start.kind != "finite":
            raise ValueError("start must be a finite measure")
        if start.size != n:
            raise SizeMismatch(f"start has mass {start.size}, drift has {n} entries")
        if len(start.atoms) == 1 and n > 1:
            if start.atoms[0][0] != 0.0:
                raise ValueError("collapsed starts are supported at the origin only")
            return None, True
        if not start.simple():
            raise ValueError("start must be N delta_0 or a simple measure")
        return np.asarray(start.points()), False
    arr = as_weyl(start, "closed").array
    if len(arr) != n:
        raise SizeMismatch("start and drift sizes differ")
    if n > 1 and np.all(arr == arr[0]):
        if arr[0] != 0.0:
            raise ValueError("collapsed starts are supported at the origin only")
        return None, True
    as_weyl(arr, "open")
    return arr, False


def _integrate_chunk(
    x: np.ndarray,
    t_start: float,
    drift,
    cfg: SdeConfig,
    rng: np.random.Generator,
    records: Sequence[float],
) -> np.ndarray:
    """Advance a batch of configurations ``x`` (shape (P, N)) from ``t_start``,
    returning positions at every record time (shape (P, len(records), N))."""
    p, n = x.shape
    out = np.empty((p, len(records), n))
    t = np.full(p, t_start)
    k = np.zeros(p, dtype=int)  # next record index
    # record times equal to the start are filled right away
    rec = np.asarray(records, dtype=float)
    while True:
        hit = (k < len(rec)) & (np.abs(rec[np.minimum(k, len(rec) - 1)] - t) <= 1e-13 * np.maximum(1.0, t))
        if np.any(hit):
            idx = np.nonzero(hit)[0]
            out[idx, k[idx]] = x[idx]
            k[idx] += 1
            continue
        active = np.nonzero(k < len(rec))[0]
        if active.size == 0:
            return out
        xa = x[active]
        target = rec[k[active]]
        gap = np.diff(xa, axis=-1).min(axis=-1) if n > 1 else np.full(active.size, np.inf)
        dt = np.minimum(cfg.dt_max, cfg.c * gap * gap)
        dt = np.minimum(dt, target - t[active])
        b = drift(xa)
        pending = np.ones(active.size, dtype=bool)
        dt0 = dt.copy()
        while np.any(pending):
            ii = np.nonzero(pending)[0]
            noise = rng.standard_normal((ii.size, n))
            prop = xa[ii] + b[ii] * dt[ii, None] + noise * np.sqrt(dt[ii])[:, None]
            ok = np.all(np.diff(prop, axis=-1) > 0, axis=-1) if n > 1 else np.ones(ii.size, bool)
            good = ii[ok]
            xa[good] = prop[ok]
            pending[good] = False
            bad = ii[~ok]
            dt[bad] *= 0.5
            if np.any(dt[bad] < cfg.dt_min * dt0[bad]):
                raise StepFailure(
                    f"step rejected until dt shrank by {1 / cfg.dt_min:g} at t={float(t[active[bad]].min()):.6g}"
                )
        x[active] = xa
        # land exactly on record times to avoid drift in the clock
        newt = t[active] + dt
        land = np.abs(newt - target) <= 1e-13 * np.maximum(1.0, target)
        newt[land] = target[land]
        t[active] = newt


def simulate_ensemble(
    start,
    nu,
    cfg: SdeConfig,
    n_paths: int,
    seed: int = DEFAULT_SEED,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``n_paths`` independent paths of the drifted process.

    Returns ``(times, positions)`` with ``positions`` of shape
    ``(n_paths, len(times), N)``. A collapsed start ``N delta_0`` is entered
    with an exact matrix-model draw at ``cfg.t0``; the recorded times then
    begin at ``t0``, otherwise at 0.
    """
    nua = as_weyl(nu, "closed").array
    n = len(nua)
    x0, collapsed = _start_positions(start, n)
    drift = _drift_fn(nua, cfg.drift)
    t_start = cfg.t0 if collapsed else 0.0
    records = [r for r in cfg.records() if r > t_start]
    times = np.array([t_start] + records)
    chunks = []
    for c, rng in enumerate(_chunk_rngs(seed, n_paths)):
        m = min(CHUNK, n_paths - c * CHUNK)
        if collapsed:
            x = _gue_source_eigs(rng, nua, cfg.t0, m)
        else:
            x = np.tile(x0, (m, 1))
        chunks.append(_integrate_chunk(x, t_start, drift, cfg, rng, times))
    return times, np.concatenate(chunks)


def simulate_sde(start, nu, cfg: SdeConfig, seed: int = DEFAULT_SEED) -> SamplePath:
    """One Euler-Maruyama path; identical ``(seed, cfg)`` give identical paths."""
    times, pos = simulate_ensemble(start, nu, cfg, 1, seed)
    return SamplePath(times, pos[0], seed, "euler-maruyama")


# -- export ---------------------------------------------------------------------------

MAGIC = b"NCBMPATH"


def write_paths_csv(fh, paths: Iterable[SamplePath], header: Sequence[str] = ()) -> None:
    """CSV with columns ``path, time, x_1..x_N``; ``header`` lines are written
    first as ``#`` comments."""
    paths = list(paths)
    for line in header:
        fh.write(f"# {line}\n")
    n = paths[0].n if paths else 0
    fh.write(",".join(["path", "time"] + [f"x_{j + 1}" for j in range(n)]) + "\n")
    for i, p in enumerate(paths):
        for t, row in zip(p.times, p.positions):
            fh.write(",".join([str(i), f"{t:.17g}"] + [f"{v:.17g}" for v in row]) + "\n")


def read_paths_csv(fh) -> list[SamplePath]:
    rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    body = rows[1:]
    groups: dict[int, list[list[float]]] = {}
    for r in body:
        groups.setdefault(int(r[0]), []).append([float(v) for v in r[1:]])
    out = []
    for i in sorted(groups):
        arr = np.asarray(groups[i])
        out.append(SamplePath(arr[:, 0], arr[:, 1:], None, "euler-maruyama"))
    return out


def write_path_binary(fh: BinaryIO, path: SamplePath) -> None:
    """Binary frame: ``b"NCBMPATH"``, ``<u4`` N, ``<u4`` T, then T rows of
    little-endian float64 ``(time, x_1, ..., x_N)``."""
    fh.write(MAGIC)
    fh.write(struct.pack("<II", path.n, len(path.times)))
    payload = np.column_stack([path.times, path.positions]).astype("<f8")
    fh.write(payload.tobytes())


def read_path_binary(fh: BinaryIO) -> SamplePath:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise ValueError("not an NCBMPATH frame")
    n, count = struct.unpack("<II", fh.read(8))
    data = np.frombuffer(fh.read(8 * count * (n + 1)), dtype="<f8").reshape(count, n + 1)
    return SamplePath(data[:, 0].astype(float), data[:, 1:].astype(float), None, "euler-maruyama")
