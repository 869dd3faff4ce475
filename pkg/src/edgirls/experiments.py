"""Experiment drivers: single instances, phase-transition grids, timing and RIP probes."""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .basis import Q_omega_op, SampleSet, apply_Q_omega, apply_Q_omega_adjoint, num_pairs
from .dataio import InstanceSpec, make_points, observe, oversampling_to_m, sample_pairs
from .geometry import PointCloud, procrustes_distance
from .irls import IrlsConfig, matrix_irls
from .linalg import LinOp, operator_norm
from .rng import derive_seed
from .tangent import TangentCoeffs, embed_T, project_T_star

CELL_COLUMNS = ("rank", "rho", "success_prob", "median_err", "q25_err", "q75_err",
                "median_time_ms")


def worker_count() -> int:
    """Pool size from ``EDG_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("EDG_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items, workers: int | None = None):
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class InstanceJob:
    spec: InstanceSpec
    rho: float
    sample_seed: int
    cfg: IrlsConfig
    tol_rec: float = 1e-3
    tag: tuple = ()


def make_instance(spec: InstanceSpec, rho: float, sample_seed: int):
    P = make_points(spec)
    m = oversampling_to_m(rho, spec.n, spec.r)
    return P, observe(P, sample_pairs(spec.n, m, sample_seed))


def run_instance(job: InstanceJob) -> dict:
    P, s = make_instance(job.spec, job.rho, job.sample_seed)
    t0 = time.perf_counter()
    res = matrix_irls(s, job.cfg)
    P_rec = res.points(strict=False)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    err = procrustes_distance(P_rec, P)
    return {"tag": job.tag, "relative_error": err, "success": err <= job.tol_rec,
            "iterations": res.iterations, "converged": res.converged, "wall_ms": wall_ms}


@dataclass
class ExperimentGrid:
    ranks: list[int]
    rhos: list[float]
    instances: int = 8
    tol_rec: float = 1e-3
    spec: InstanceSpec = field(default_factory=lambda: InstanceSpec(n=200, r=2))
    seed: int = 0
    mode: str = "tangent"
    max_outer: int = 400
    max_inner: int = 2000

    def __post_init__(self):
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if list(self.rhos) != sorted(self.rhos):
            raise ValueError("rhos must be sorted ascending")
        if not self.ranks or not self.rhos:
            raise ValueError("empty grid")

    def jobs(self) -> list[InstanceJob]:
        out = []
        for r in self.ranks:
            for rho in self.rhos:
                for i in range(self.instances):
                    base = derive_seed(self.seed, r, rho, i)
                    spec = replace(self.spec, r=r, seed=derive_seed(base, 0))
                    cfg = IrlsConfig(r_tilde=r, mode=self.mode, max_outer=self.max_outer,
                                     max_inner=self.max_inner, seed=derive_seed(base, 2))
                    out.append(InstanceJob(spec, rho, derive_seed(base, 1), cfg,
                                           self.tol_rec, (r, rho, i)))
        return out


@dataclass
class CellResult:
    rank: int
    rho: float
    success_prob: float
    median_err: float
    q25_err: float
    q75_err: float
    median_time_ms: float

    def __post_init__(self):
        if not 0.0 <= self.success_prob <= 1.0:
            raise ValueError("success_prob must lie in [0, 1]")
        if not self.q25_err <= self.median_err <= self.q75_err:
            raise ValueError("quantiles out of order")


def summarize(rows: list[dict]) -> list[CellResult]:
    cells: dict[tuple, list[dict]] = {}
    for row in rows:
        r, rho, _ = row["tag"]
        cells.setdefault((r, rho), []).append(row)
    out = []
    for (r, rho) in sorted(cells):
        group = cells[(r, rho)]
        errs = np.array([g["relative_error"] for g in group])
        q25, med, q75 = np.quantile(errs, [0.25, 0.5, 0.75])
        out.append(CellResult(r, rho, float(np.mean([g["success"] for g in group])),
                              float(med), float(q25), float(q75),
                              float(np.median([g["wall_ms"] for g in group]))))
    return out


def phase_transition(grid: ExperimentGrid, workers: int | None = None):
    """Run every (rank, rho, instance) job; returns (cells, raw rows) sorted by tag."""
    rows = _map(run_instance, grid.jobs(), workers)
    rows.sort(key=lambda row: row["tag"])
    return summarize(rows), rows


def cells_to_csv(cells: list[CellResult], timing: bool = True) -> str:
    cols = CELL_COLUMNS if timing else CELL_COLUMNS[:-1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for c in cells:
        d = asdict(c)
        w.writerow([_fmt(d[k]) for k in cols])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def bench(sizes, rho: float = 3.0, r: int = 5, seed: int = 0, mode: str = "tangent",
          workers: int | None = None) -> list[dict]:
    """Timing rows (n, relative_error, wall_minutes) on Gaussian instances."""
    jobs = []
    for n in sizes:
        base = derive_seed(seed, n, r, rho)
        spec = InstanceSpec(n=n, r=r, seed=derive_seed(base, 0))
        jobs.append(InstanceJob(spec, rho, derive_seed(base, 1),
                                IrlsConfig(r_tilde=r, mode=mode, seed=derive_seed(base, 2)),
                                tag=(n,)))
    rows = _map(run_instance, jobs, workers)
    return [{"n": row["tag"][0], "relative_error": row["relative_error"],
             "wall_minutes": row["wall_ms"] / 60000.0, "iterations": row["iterations"]}
            for row in rows]


# --------------------------------------------------------------------------
# restricted isometry probe


def tangent_sampling_deviation_op(s: SampleSet, U0) -> LinOp:
    """P_T Q_Omega* P_T - P_T restricted to the tangent space at span(U0).

    Acts on flat tangent coefficient vectors, in which the embedding is an
    isometry, so its operator norm equals the norm on symmetric matrices.
    """
    n, r = U0.shape

    def make(apply_q):
        def apply(v):
            c = TangentCoeffs.from_vector(v, n, r).cleaned(U0)
            Z = apply_q(s, embed_T(U0, c))
            return (project_T_star(U0, Z) - c).to_vector()
        return apply

    d = r * r + n * r
    return LinOp(d, d, make(apply_Q_omega_adjoint), False, make(apply_Q_omega))


def rip_bound(n: int, m: int) -> float:
    return 20.0 * num_pairs(n) * math.sqrt(math.log(n) / m) + 1.0


def rip_probe(n: int, r: int, m: int, trials: int = 20, seed: int = 0,
              with_replacement: bool = True, iters: int = 300) -> dict:
    """Largest observed ||P_T Q* P_T - P_T|| and ||Q_Omega|| over random draws."""
    devs, qnorms = [], []
    for t in range(trials):
        base = derive_seed(seed, n, r, m, t)
        P = make_points(InstanceSpec(n=n, r=r, seed=derive_seed(base, 0)))
        pairs = sample_pairs(n, m, derive_seed(base, 1), with_replacement=with_replacement)
        s = observe(P, pairs, with_replacement=with_replacement)
        U0 = np.linalg.svd(P.coords.T, full_matrices=False)[0]
        devs.append(operator_norm(tangent_sampling_deviation_op(s, U0), iters,
                                  seed=derive_seed(base, 2)))
        qnorms.append(operator_norm(Q_omega_op(s), iters, seed=derive_seed(base, 3)))
    return {"norm_PTQPT_minus_PT": float(max(devs)), "qomega_norm": float(max(qnorms)),
            "bound": rip_bound(n, m), "trials": trials, "per_trial": [float(x) for x in devs]}


def rip_default_m(n: int, r: int) -> int:
    return int(math.ceil(8 * n * r * math.log(n)))


def truth_error(P_rec: PointCloud, P0: PointCloud) -> float:
    return procrustes_distance(P_rec, P0)
