"""Command-line front end: ``python3 -m ncbm {density,kernel,sample,verify}``.

Every output starts with ``#`` provenance lines (command line, seed, version).
Numbers are written with ``%.17g``. Exit status: 0 success, 1 a verification
check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import re
import shlex
import sys
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from . import __version__, densities, kernels, sampler, verify
from .core import PointMeasure, parse_floats
from .errors import NcbmError

DEFAULT_SEED = sampler.DEFAULT_SEED


class UsageError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (stop included when hit) or a comma list."""
    if ":" not in text:
        return np.asarray(parse_floats(text))
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise UsageError(f"bad grid {text!r}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _g(v: float) -> str:
    return "%.17g" % v


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _provenance(fh, argv: Sequence[str], seed) -> None:
    fh.write(f"# command: ncbm {shlex.join(argv)}\n")
    fh.write(f"# seed: {seed}\n")
    fh.write(f"# version: {__version__}\n")


def _nu_arg(text: str | None) -> np.ndarray:
    if text is None:
        raise UsageError("--nu is required")
    return np.sort(np.asarray(parse_floats(text)))


# -- subcommands ---------------------------------------------------------------------


def cmd_density(args, argv) -> int:
    nu = _nu_arg(args.nu)
    n = len(nu)
    times = parse_floats(args.t)
    ys = parse_grid(args.y_grid)
    start = None if args.x is None else np.asarray(parse_floats(args.x))
    if start is not None and len(start) != n:
        raise UsageError("--x and --nu must have the same length")
    with _open_out(args.out) as fh:
        _provenance(fh, argv, None)
        for t in times:
            for y in itertools.product(ys, repeat=n):
                y = np.asarray(y)
                if n > 1 and np.any(np.diff(y) <= 0):
                    continue
                if start is None:
                    sign, lv = densities.drifted_density_from_origin(t, y, nu, log=True)
                else:
                    sign, lv = densities.drifted_density(t, y, start, nu, log=True)
                rec = {
                    "t": t,
                    "x": None if start is None else start.tolist(),
                    "y": y.tolist(),
                    "nu": nu.tolist(),
                    "value": float(sign * np.exp(lv)),
                    "log_value": float(lv) if sign > 0 else None,
                }
                fh.write(json.dumps(rec) + "\n")
    return 0


def _kernel_spec(args) -> kernels.KernelSpec:
    if args.spec is not None:
        return kernels.KernelSpec.from_json(args.spec)
    if args.family == "finite-nu":
        return kernels.KernelSpec("finite-nu", PointMeasure.from_points(_nu_arg(args.nu)))
    if args.family == "lattice-theta":
        return kernels.KernelSpec("lattice-theta", PointMeasure.integer_lattice(), args.truncation_L)
    return kernels.KernelSpec("sine")


def cmd_kernel(args, argv) -> int:
    spec = _kernel_spec(args)
    rows = []
    if spec.family == "sine":
        if args.dy_grid is None:
            raise UsageError("the sine family needs --dy-grid (and --dt)")
        dt = float(args.dt)
        for dy in parse_grid(args.dy_grid):
            rows.append((0.0, 0.0, dt, dy, kernels.sine_kernel(dt, dy)))
    else:
        if args.t is None or args.x_grid is None:
            raise UsageError("--t and --x-grid are required")
        t = float(args.t)
        s = float(args.s) if args.s is not None else t
        xs = parse_grid(args.x_grid)
        ys = parse_grid(args.y_grid) if args.y_grid is not None else None
        k = spec.kernel()
        for x in xs:
            for y in ([x] if ys is None else ys):
                rows.append((s, x, t, y, float(k(s, x, t, y))))
    with _open_out(args.out) as fh:
        _provenance(fh, argv, None)
        fh.write(f"# kernel: {spec.to_json()}\n")
        fh.write("s,x,t,y,K\n")
        for r in rows:
            fh.write(",".join(_g(v) for v in r) + "\n")
    return 0


def cmd_sample(args, argv) -> int:
    nu = _nu_arg(args.nu)
    seed = args.seed
    t = float(args.t)
    header = [f"command: ncbm {shlex.join(argv)}", f"seed: {seed}", f"version: {__version__}", f"scheme: {args.scheme}"]
    if args.scheme == "matrix-model":
        draws = sampler.sample_fixed_time(nu, t, len(nu), seed, args.n_samples)
        paths = [sampler.SamplePath(np.array([t]), d[None, :], seed, "matrix-model") for d in draws]
    else:
        start = PointMeasure.delta(len(nu)) if args.start is None else PointMeasure.from_points(parse_floats(args.start))
        drift = np.zeros(len(nu)) if args.driftless else nu
        records = tuple(parse_floats(args.record_times)) if args.record_times else None
        cfg = sampler.SdeConfig(t_end=t, dt_max=args.dt_max, record_times=records)
        times, pos = sampler.simulate_ensemble(start, drift, cfg, args.n_samples, seed)
        paths = [sampler.SamplePath(times, p, seed, "euler-maruyama") for p in pos]
    if args.format == "binary":
        if args.out == "-":
            raise UsageError("binary output needs --out FILE")
        with open(args.out, "wb") as fh:
            for p in paths:
                sampler.write_path_binary(fh, p)
        return 0
    with _open_out(args.out) as fh:
        sampler.write_paths_csv(fh, paths, header)
    return 0


def cmd_verify(args, argv) -> int:
    reports = verify.run_all({"suite": args.suite, "seed": args.seed})
    with _open_out(args.out) as fh:
        _provenance(fh, argv, args.seed)
        for r in reports:
            fh.write(r.to_json() + "\n")
    print(verify.summary_table(reports), file=sys.stderr)
    return 0 if all(r.passed for r in reports) else 1


# -- parser -------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncbm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", help="transition densities on a grid (JSON lines)")
    d.add_argument("--nu", required=True, help="drifts, comma separated")
    d.add_argument("--t", required=True, help="time(s), comma separated")
    d.add_argument("--x", help="start configuration; omitted means all particles at 0")
    d.add_argument("--y-grid", required=True, help="start:stop:step grid used for every coordinate")
    d.add_argument("--out", default="-")

    k = sub.add_parser("kernel", help="correlation kernel grids (CSV s,x,t,y,K)")
    k.add_argument("--family", choices=["finite-nu", "lattice-theta", "sine"], default="finite-nu")
    k.add_argument("--spec", help="KernelSpec as JSON (overrides --family/--nu)")
    k.add_argument("--nu")
    k.add_argument("--s")
    k.add_argument("--t")
    k.add_argument("--x-grid")
    k.add_argument("--y-grid", help="defaults to the diagonal y = x")
    k.add_argument("--dt", default="0")
    k.add_argument("--dy-grid")
    k.add_argument("--truncation-L", type=float)
    k.add_argument("--out", default="-")

    s = sub.add_parser("sample", help="sample paths (CSV path,time,x_1..x_N)")
    s.add_argument("--scheme", choices=["matrix-model", "euler-maruyama"], default="matrix-model")
    s.add_argument("--nu", required=True)
    s.add_argument("--t", required=True, help="sampling time / horizon")
    s.add_argument("--n-samples", type=int, default=1)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"RNG seed (default {DEFAULT_SEED})")
    s.add_argument("--start", help="start configuration for the SDE (default: all at 0)")
    s.add_argument("--driftless", action="store_true", help="run the SDE without drift (nu only sets N)")
    s.add_argument("--dt-max", type=float, default=1e-3)
    s.add_argument("--record-times", help="comma separated output times for the SDE")
    s.add_argument("--format", choices=["csv", "binary"], default="csv")
    s.add_argument("--out", default="-")

    v = sub.add_parser("verify", help="run the verification suite (JSON lines)")
    v.add_argument("--suite", choices=sorted(verify.SUITES), default="quick")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--out", default="-")
    return p


COMMANDS = {"density": cmd_density, "kernel": cmd_kernel, "sample": cmd_sample, "verify": cmd_verify}


def _attach_negative_values(argv: list[str]) -> list[str]:
    """Rewrite ``--flag -3:3:0.1`` as ``--flag=-3:3:0.1`` so argparse does not
    mistake a negative number for an option."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt and re.match(r"^-[\d.]", nxt):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_attach_negative_values(argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args, argv)
    except (UsageError, NcbmError, ValueError) as exc:
        print(f"ncbm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
