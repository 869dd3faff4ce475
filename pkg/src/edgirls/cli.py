"""Command-line harness: ``edg <command> [flags]``.

Exit codes: 0 ok, 1 I/O or parse failure, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments as ex
from .basis import read_samples, write_samples
from .dataio import InstanceSpec, make_points, observe, oversampling_to_m, sample_pairs
from .errors import EDGError, ParseError
from .geometry import procrustes_distance, read_points_csv, write_points_csv
from .irls import IrlsConfig, matrix_irls
from .rng import derive_seed

EXIT_OK, EXIT_IO, EXIT_NOCONV = 0, 1, 2

log = logging.getLogger("edgirls")


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _rho_range(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    if ":" not in text:
        return sorted(_float_list(text))
    a, b, step = (float(x) for x in text.split(":"))
    if step <= 0:
        raise argparse.ArgumentTypeError("step must be positive")
    k = int(np.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 10) for i in range(k + 1)]


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _read(path: str) -> str:
    return Path(path).read_text()


def _spec_from(args, r: int | None = None) -> InstanceSpec:
    return InstanceSpec(n=args.n, r=args.r if r is None else r, kind=args.kind,
                        kappa=args.kappa, seed=args.seed)


def _instance(args):
    spec = _spec_from(args)
    P = make_points(spec)
    m = oversampling_to_m(args.rho, args.n, args.r)
    s = observe(P, sample_pairs(args.n, m, derive_seed(args.seed, "pairs")))
    return P, s


def _config(args, r: int) -> IrlsConfig:
    return IrlsConfig(r_tilde=r, mode=args.mode, max_outer=args.max_outer,
                      max_inner=args.max_inner, seed=args.seed)


# --------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    _write(args.out, write_points_csv(make_points(_spec_from(args))))
    return EXIT_OK


def cmd_sample(args) -> int:
    P = read_points_csv(_read(args.points))
    r = P.r if args.r is None else args.r
    m = oversampling_to_m(args.rho, P.n, r)
    pairs = sample_pairs(P.n, m, args.seed, with_replacement=args.with_replacement)
    _write(args.out, write_samples(observe(P, pairs, args.with_replacement)))
    return EXIT_OK


def cmd_solve(args) -> int:
    s = read_samples(_read(args.samples))
    truth = read_points_csv(_read(args.truth)) if args.truth else None
    t0 = time.perf_counter()
    res = matrix_irls(s, _config(args, args.r))
    P = res.points(strict=False)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    err = procrustes_distance(P, truth) if truth is not None else None
    summary = {"relative_error": err, "iterations": res.iterations, "wall_ms": wall_ms,
               "converged": res.converged, "stop_reason": res.stop_reason}
    if err is not None:
        summary["success"] = bool(err <= args.tol_rec)
    prefix = args.out or "solve"
    Path(f"{prefix}.points.csv").write_text(write_points_csv(P))
    Path(f"{prefix}.trace.csv").write_text(res.trace_csv())
    Path(f"{prefix}.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_phase_transition(args) -> int:
    grid = ex.ExperimentGrid(
        ranks=args.rank_list, rhos=args.rho_range, instances=args.instances,
        tol_rec=args.tol_rec, spec=InstanceSpec(n=args.n, r=min(args.rank_list), kind=args.kind,
                                                kappa=args.kappa),
        seed=args.seed, mode=args.mode, max_outer=args.max_outer, max_inner=args.max_inner)
    cells, rows = ex.phase_transition(grid)
    if args.format == "json":
        text = json.dumps({"cells": [c.__dict__ for c in cells],
                           "instances": [_jsonable(r) for r in rows]}, indent=2) + "\n"
    else:
        text = ex.cells_to_csv(cells)
    _write(args.out, text)
    return EXIT_OK


def _jsonable(row: dict) -> dict:
    out = dict(row)
    out["tag"] = list(out["tag"])
    out["success"] = bool(out["success"])
    return out


def cmd_trace(args) -> int:
    P, s = _instance(args)
    res = matrix_irls(s, _config(args, args.r), ground_truth=P)
    _write(args.out, res.trace_csv())
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_bench(args) -> int:
    rows = ex.bench(args.sizes, rho=args.rho, r=args.r, seed=args.seed, mode=args.mode)
    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        lines = ["n,relative_error,wall_minutes,iterations"]
        lines += [f"{r['n']},{r['relative_error']:.17g},{r['wall_minutes']:.6f},{r['iterations']}"
                  for r in rows]
        text = "\n".join(lines) + "\n"
    _write(args.out, text)
    return EXIT_OK


def cmd_rip_probe(args) -> int:
    m = args.m if args.m is not None else ex.rip_default_m(args.n, args.r)
    out = ex.rip_probe(args.n, args.r, m, trials=args.trials, seed=args.seed)
    out["m"] = m
    _write(args.out, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edg", description="Euclidean distance geometry via MatrixIRLS")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(q, *, n=True, r=True, rho=True, solver=True):
        if n:
            q.add_argument("--n", type=int, default=200)
        if r:
            q.add_argument("--r", type=int, default=2)
        if rho:
            q.add_argument("--rho", type=float, default=3.0)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--out", default=None, help="output path (stdout if omitted)")
        if solver:
            q.add_argument("--mode", choices=("tangent", "range"), default="tangent")
            q.add_argument("--max-outer", type=int, default=400)
            q.add_argument("--max-inner", type=int, default=2000)

    def kind(q):
        q.add_argument("--kind", choices=("gaussian", "ill_conditioned"), default="gaussian")
        q.add_argument("--kappa", type=float, default=1.0)

    q = sub.add_parser("gen", help="write a synthetic point cloud (CSV)")
    common(q, rho=False, solver=False)
    kind(q)
    q.set_defaults(func=cmd_gen)

    q = sub.add_parser("sample", help="sample pairs of a point cloud at oversampling rho")
    common(q, n=False, solver=False)
    q.set_defaults(r=None)
    q.add_argument("--points", required=True)
    q.add_argument("--with-replacement", action="store_true")
    q.set_defaults(func=cmd_sample)

    q = sub.add_parser("solve", help="run MatrixIRLS on a sample file")
    common(q, n=False, rho=False)
    q.add_argument("--samples", required=True)
    q.add_argument("--truth", default=None, help="reference points for the error metric")
    q.add_argument("--tol-rec", type=float, default=1e-3)
    q.set_defaults(func=cmd_solve)

    q = sub.add_parser("phase-transition", help="success probability over a (rank, rho) grid")
    common(q, r=False, rho=False)
    kind(q)
    q.add_argument("--rank-list", type=_int_list, default=[2, 3])
    q.add_argument("--rho-range", type=_rho_range, default=_rho_range("1.0:4.0:0.5"))
    q.add_argument("--instances", type=int, default=8)
    q.add_argument("--tol-rec", type=float, default=1e-3)
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.set_defaults(func=cmd_phase_transition)

    q = sub.add_parser("trace", help="per-iterate solver trace of one instance")
    common(q)
    kind(q)
    q.set_defaults(func=cmd_trace)

    q = sub.add_parser("bench", help="runtime versus n on Gaussian data")
    common(q, n=False)
    q.set_defaults(r=5)
    q.add_argument("--sizes", type=_int_list, default=[100, 500])
    q.add_argument("--format", choices=("csv", "json"), default="csv")
    q.set_defaults(func=cmd_bench)

    q = sub.add_parser("rip-probe", help="tangent-space isometry of the sampling operator")
    common(q, rho=False, solver=False)
    q.set_defaults(n=60)
    q.add_argument("--m", type=int, default=None, help="samples (default 8 n r log n)")
    q.add_argument("--trials", type=int, default=20)
    q.add_argument("--format", choices=("json",), default="json")
    q.set_defaults(func=cmd_rip_probe)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ParseError) as e:
        print(f"edg: {e}", file=sys.stderr)
        return EXIT_IO
    except EDGError as e:
        print(f"edg: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
