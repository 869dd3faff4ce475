"""MatrixIRLS for Euclidean distance geometry.

Each outer iteration solves a weighted least squares problem

    X_{k+1} = argmin <X, W_k(X)>  subject to  A(X) = y = [d2; 0]

whose solution is W_k^{-1} A* (A W_k^{-1} A*)^{-1} y, then shrinks the
smoothing parameter eps_k = min(eps_{k-1}, sigma_{r+1}(X_k)) and rebuilds the
weight operator from the eigenpairs of X_k above eps_k.

Iterates are never formed densely. They are kept as
``X = A*(res) + U B^T + B U^T`` (see :class:`ImplicitGram`).
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .basis import (A_star_matvec, SampleSet, apply_A_star, apply_AA_star,
                    solve_AA_star)
from .dataio import dof
from .errors import DimensionMismatch, NonFiniteIterate, SingularC
from .geometry import PointCloud, procrustes_distance
from .linalg import (UNSET, CGResult, LinOp, SpectralState, cg_solve, eps_min,
                     truncated_eig)
from .rng import derive_seed
from .tangent import (TangentCoeffs, apply_A_PT, apply_PTstar_Astar,
                      embed_T, project_T_star, tangent_factor, transfer_coeffs)

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("k", "eps", "sigma_r1", "rel_change", "inner_iters",
                 "procrustes_err", "wall_ms")


@dataclass
class IrlsConfig:
    r_tilde: int
    max_outer: int = 400
    max_inner: int = 2000
    tol_inner: float = 1e-10
    outer_tol: float = 1e-12
    mode: Literal["tangent", "range"] = "tangent"
    seed: int = 0
    eig_tol: float = 1e-10
    rank_slack: int = 5
    aa_tol: float = 1e-12
    eps_ratio_stop: float = 1e-14

    def __post_init__(self):
        if self.r_tilde < 1:
            raise ValueError("r_tilde must be >= 1")
        if min(self.tol_inner, self.outer_tol, self.eig_tol, self.aa_tol) <= 0:
            raise ValueError("tolerances must be positive")
        if self.mode not in ("tangent", "range"):
            raise ValueError(f"unknown mode {self.mode!r}")


# --------------------------------------------------------------------------
# implicit iterates


@dataclass
class ImplicitGram:
    """Symmetric matrix ``A*(res) + U B^T + B U^T`` kept in factored form."""

    s: SampleSet
    res: np.ndarray
    U: np.ndarray
    B: np.ndarray

    @classmethod
    def from_coeffs(cls, s, res, U, c: TangentCoeffs) -> "ImplicitGram":
        return cls(s, np.asarray(res, dtype=float), U, tangent_factor(U, c))

    @property
    def n(self) -> int:
        return self.s.n

    def matvec(self, V):
        out = A_star_matvec(self.s, self.res, V)
        if self.U.shape[1]:
            out += self.U @ (self.B.T @ V) + self.B @ (self.U.T @ V)
        return out

    def as_linop(self) -> LinOp:
        return LinOp(self.n, self.n, self.matvec, True, None, True)

    def to_dense(self) -> np.ndarray:
        X = apply_A_star(self.s, self.res)
        L = self.U @ self.B.T
        return X + L + L.T

    def measurements(self) -> np.ndarray:
        out = apply_AA_star(self.s, self.res)
        if self.U.shape[1]:
            B, U = self.B, self.U
            dU = U[self.s.i] - U[self.s.j]
            dB = B[self.s.i] - B[self.s.j]
            out[: self.s.m] += 2.0 * np.einsum("lk,lk->l", dU, dB)
            out[self.s.m:] += U @ B.sum(axis=0) + B @ U.sum(axis=0)
        return out

    def minus(self, other: "ImplicitGram") -> "ImplicitGram":
        return ImplicitGram(self.s, self.res - other.res,
                            np.hstack([self.U, other.U]),
                            np.hstack([self.B, -other.B]))

    def fro_norm(self) -> float:
        """Frobenius norm without densifying.

        The low-rank part is compressed through a thin QR of [U, B] so that
        nearly cancelling terms (differences of close iterates) lose no
        accuracy.
        """
        total = float(self.res @ apply_AA_star(self.s, self.res))
        k = self.U.shape[1]
        if k:
            Q, R = np.linalg.qr(np.hstack([self.U, self.B]))
            RU, RB = R[:, :k], R[:, k:]
            S = RU @ RB.T
            S = S + S.T
            total += float(np.vdot(S, S))
            AQ = A_star_matvec(self.s, self.res, Q)
            total += 2.0 * float(np.vdot(Q.T @ AQ, S))
        return math.sqrt(max(total, 0.0))


def implicit_iterate_matvec(s: SampleSet, residual, U, c: TangentCoeffs, v):
    """X v for X = A*(residual) + embed_T(U, c), in O(m + n r) per column."""
    return ImplicitGram.from_coeffs(s, residual, U, c).matvec(np.asarray(v, dtype=float))


# --------------------------------------------------------------------------
# weight operator


def _check_state(state: SpectralState, n: int):
    if state.n != n:
        raise DimensionMismatch("state dimension does not match")
    if state.eps is UNSET:
        raise ValueError("weight operator needs a finite eps")


def _weight_scalings(state: SpectralState):
    """Entrywise weights of W on tangent coefficients (G1 block, G2 columns)."""
    s, eps = state.sigma, float(state.eps)
    h1 = 1.0 / np.outer(np.maximum(s, eps), np.maximum(s, eps))
    h2 = 1.0 / (np.maximum(s, eps) * eps)
    return h1, h2


def weight_apply(state: SpectralState, Z) -> np.ndarray:
    """W(Z) = U_full [H o (U_full^T Z U_full)] U_full^T.

    Directions outside span(U) carry weight eps^-2.
    """
    Z = np.asarray(Z, dtype=float)
    _check_state(state, Z.shape[0])
    eps = float(state.eps)
    c = project_T_star(state.U, Z)
    perp = Z - embed_T(state.U, c)
    h1, h2 = _weight_scalings(state)
    return embed_T(state.U, TangentCoeffs(h1 * c.gamma1, c.gamma2 * h2)) + perp / eps**2


def weight_inverse_apply(state: SpectralState, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    _check_state(state, Z.shape[0])
    eps = float(state.eps)
    c = project_T_star(state.U, Z)
    perp = Z - embed_T(state.U, c)
    h1, h2 = _weight_scalings(state)
    return embed_T(state.U, TangentCoeffs(c.gamma1 / h1, c.gamma2 / h2)) + eps**2 * perp


def c_scalings(state: SpectralState):
    """C = D^{-1} - eps^2 I on coefficients, as (r x r block, per-column) arrays."""
    s, eps = state.sigma, float(state.eps)
    c1 = np.outer(s, s) - eps**2
    c2 = s * eps - eps**2
    if np.any(c1 <= 0) or np.any(c2 <= 0):
        raise SingularC("sigma_i * sigma_j must exceed eps^2 for every kept pair")
    return c1, c2


# --------------------------------------------------------------------------
# reduced (tangent space) system


@dataclass
class _Counter:
    inner: int = 0
    nested: int = 0


class ReducedSystem:
    """M = eps^2 C^-1 + P_T* A* (A A*)^-1 A P_T on flat coefficient vectors."""

    def __init__(self, s: SampleSet, state: SpectralState, aa_tol: float = 1e-12):
        _check_state(state, s.n)
        self.s, self.state, self.aa_tol = s, state, aa_tol
        self.U = state.U
        self.n, self.r = s.n, state.rank
        c1, c2 = c_scalings(state)
        eps2 = float(state.eps) ** 2
        self.reg1 = eps2 / c1
        self.reg2 = eps2 / c2
        self.counter = _Counter()

    def solve_aa(self, b):
        z, info = solve_AA_star(self.s, b, tol=self.aa_tol, return_info=True)
        self.counter.nested += info.iterations
        return z

    def apply_coeffs(self, c: TangentCoeffs) -> TangentCoeffs:
        z = self.solve_aa(apply_A_PT(self.s, self.U, c))
        out = apply_PTstar_Astar(self.s, self.U, z)
        out.gamma1 += self.reg1 * c.gamma1
        out.gamma2 += c.gamma2 * self.reg2
        return out.cleaned(self.U)

    def apply(self, v):
        c = TangentCoeffs.from_vector(v, self.n, self.r)
        return self.apply_coeffs(c).to_vector()

    def as_linop(self) -> LinOp:
        d = self.r * self.r + self.n * self.r
        return LinOp(d, d, self.apply, True)


def reduced_system_apply(s: SampleSet, state: SpectralState, c: TangentCoeffs,
                         aa_tol: float = 1e-12) -> TangentCoeffs:
    return ReducedSystem(s, state, aa_tol).apply_coeffs(c)


@dataclass
class WlsInfo:
    cg: CGResult | None
    nested_iters: int = 0

    @property
    def inner_iters(self) -> int:
        return 0 if self.cg is None else self.cg.iterations


def wls_step_tangent(s: SampleSet, state: SpectralState, y, warm: TangentCoeffs | None = None,
                     *, tol: float = 1e-10, max_iter: int = 2000, aa_tol: float = 1e-12,
                     z_y=None):
    """Tangent-space weighted least squares step (CG on M, warm-started at ``warm``).

    Returns ``(residual, coeffs, info)``; the new iterate is
    ``A*(residual) + embed_T(U, coeffs)``.
    """
    y = np.asarray(y, dtype=float)
    if z_y is None:
        z_y = solve_AA_star(s, y, tol=aa_tol)
    U = state.U
    if state.rank == 0:
        return z_y.copy(), TangentCoeffs.zeros(s.n, 0), WlsInfo(None)
    system = ReducedSystem(s, state, aa_tol)
    g0 = TangentCoeffs.zeros(s.n, state.rank) if warm is None else warm.cleaned(U)
    rhs = apply_PTstar_Astar(s, U, z_y)
    h0 = rhs - system.apply_coeffs(g0)
    # tolerance relative to the warm-start residual h0: M has eigenvalues down to
    # ~eps^2 / sigma^2, so a tolerance relative to ||rhs|| is far too loose
    cg = cg_solve(system.as_linop(), h0.to_vector(), tol=tol, max_iter=max_iter)
    gamma = (g0 + TangentCoeffs.from_vector(cg.x, s.n, state.rank)).cleaned(U)
    residual = system.solve_aa(y - apply_A_PT(s, U, gamma))
    return residual, gamma, WlsInfo(cg, system.counter.nested)


def range_system_op(s: SampleSet, state: SpectralState) -> LinOp:
    """z -> A W^{-1} A* z on R^{m+n}."""
    c1, c2 = c_scalings(state)
    eps2 = float(state.eps) ** 2
    U = state.U

    def apply(z):
        g = apply_PTstar_Astar(s, U, z)
        g = TangentCoeffs(c1 * g.gamma1, g.gamma2 * c2)
        return apply_A_PT(s, U, g) + eps2 * apply_AA_star(s, z)

    d = s.m + s.n
    return LinOp(d, d, apply, True)


def wls_step_range(s: SampleSet, state: SpectralState, y, *, tol: float = 1e-10,
                   max_iter: int = 2000, aa_tol: float = 1e-12):
    """Range-space weighted least squares step: CG on A W^{-1} A* z = y."""
    y = np.asarray(y, dtype=float)
    if state.rank == 0:
        z = solve_AA_star(s, y, tol=aa_tol)
        return z, TangentCoeffs.zeros(s.n, 0), WlsInfo(None)
    c1, c2 = c_scalings(state)
    cg = cg_solve(range_system_op(s, state), y, tol=tol, max_iter=max_iter)
    g = apply_PTstar_Astar(s, state.U, cg.x)
    gamma = TangentCoeffs(c1 * g.gamma1, g.gamma2 * c2).cleaned(state.U)
    residual = float(state.eps) ** 2 * cg.x
    return residual, gamma, WlsInfo(cg)


# --------------------------------------------------------------------------
# outer loop


@dataclass
class IrlsResult:
    gram: ImplicitGram
    state: SpectralState | None
    trace: list[dict] = field(default_factory=list)
    converged: bool = False
    underdetermined: bool = False
    stop_reason: str = ""
    eig: tuple[np.ndarray, np.ndarray] | None = None
    r_tilde: int = 1

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def points(self, strict: bool = True) -> PointCloud:
        """Recovered configuration from the top r_tilde eigenpairs of the last iterate."""
        from .geometry import points_from_gram
        return points_from_gram(self.gram.as_linop(), self.r_tilde, strict=strict)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.trace:
            w.writerow([_fmt(row.get(c)) for c in TRACE_COLUMNS])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else "nan"
    return str(v)


def _points_from_eig(U, lam, r):
    lam = np.asarray(lam)[:r]
    order = np.argsort(-lam, kind="stable")
    lam = np.clip(lam[order], 0.0, None)
    return np.sqrt(lam)[:, None] * U[:, :r][:, order].T


def spectral_error(X: ImplicitGram, P0: PointCloud, *, tol=1e-8, seed=0) -> float:
    """||X - P0^T P0||_2 / ||P0^T P0||_2 via a Lanczos run on the difference."""
    c = P0.coords
    norm0 = float(np.linalg.norm(c @ c.T, 2))

    def mv(V):
        return X.matvec(V) - c.T @ (c @ V)

    op = LinOp(X.n, X.n, mv, True, None, True)
    _, lam = truncated_eig(op, 1, tol=tol, seed=seed)
    return abs(float(lam[0])) / norm0


def matrix_irls(s: SampleSet, cfg: IrlsConfig, ground_truth: PointCloud | None = None,
                *, track_spectral: bool = False, callback=None) -> IrlsResult:
    """Run MatrixIRLS on observed squared distances.

    With ``ground_truth`` the trace gains the per-iterate relative Procrustes
    error (and, with ``track_spectral``, the relative spectral-norm error of the
    Gram iterate under the key ``spectral_err``).
    """
    n, rt = s.n, cfg.r_tilde
    if rt >= n:
        raise ValueError("r_tilde must be smaller than n")
    y = s.y
    y_norm = float(np.linalg.norm(y))
    t0 = time.perf_counter()
    z_y, info = solve_AA_star(s, y, tol=cfg.aa_tol, return_info=True)
    X = ImplicitGram(s, z_y, np.zeros((n, 0)), np.zeros((n, 0)))
    result = IrlsResult(X, None, underdetermined=s.m < dof(n, rt), r_tilde=rt)
    eps = UNSET
    gamma = TangentCoeffs.zeros(n, 0)
    U_prev = np.zeros((n, 0))
    X_prev = None
    inner_iters = 0
    cap = min(n, rt + cfg.rank_slack)

    for k in range(1, cfg.max_outer + 1):
        if not np.all(np.isfinite(X.res)) or not np.all(np.isfinite(X.B)):
            raise NonFiniteIterate(f"non-finite iterate at k={k}")
        op = X.as_linop()
        kk = rt + 1
        U_e, lam, eres = truncated_eig(op, kk, tol=cfg.eig_tol, seed=derive_seed(cfg.seed, k),
                                       return_residuals=True)
        sig = np.abs(lam)
        sigma_r1 = float(sig[rt])
        eps = eps_min(eps, sigma_r1)
        if eps < sigma_r1 and kk < cap + 1 and sig[-1] > eps:
            kk = min(n, cap + 1)
            U_e, lam, eres = truncated_eig(op, kk, tol=cfg.eig_tol,
                                           seed=derive_seed(cfg.seed, k), return_residuals=True)
            sig = np.abs(lam)
        r_k = min(int(np.sum(sig > eps)), cap)
        sigma1 = float(sig[0])

        rel_change = None
        if X_prev is not None:
            prev_norm = X_prev.fro_norm()
            rel_change = X.minus(X_prev).fro_norm() / prev_norm if prev_norm > 0 else math.inf
        row = {"k": k, "eps": eps, "sigma_r1": sigma_r1, "rel_change": rel_change,
               "inner_iters": inner_iters, "procrustes_err": None,
               "feasibility": float(np.linalg.norm(X.measurements() - y)) / y_norm,
               "eig_residual": float(eres.max()) / sigma1 if sigma1 > 0 else 0.0}
        if ground_truth is not None:
            P = _points_from_eig(U_e, lam, rt)
            row["procrustes_err"] = procrustes_distance(P, ground_truth)
            if track_spectral:
                row["spectral_err"] = spectral_error(X, ground_truth, seed=derive_seed(cfg.seed, k, 7))
        row["wall_ms"] = 1e3 * (time.perf_counter() - t0)
        result.trace.append(row)
        result.gram, result.eig = X, (U_e, lam)
        if callback is not None:
            callback(row)
        log.debug("k=%d eps=%.3e sigma_r1=%.3e change=%s inner=%d", k, eps, sigma_r1,
                  rel_change, inner_iters)

        if rel_change is not None and rel_change < cfg.outer_tol:
            result.converged, result.stop_reason = True, "rel_change"
            break
        if sigma1 == 0.0 or eps <= cfg.eps_ratio_stop * sigma1:
            result.converged, result.stop_reason = True, "eps_ratio"
            break
        if k == cfg.max_outer:
            result.stop_reason = "max_outer"
            break

        state = SpectralState.from_eig(U_e[:, :r_k], lam[:r_k], eps)
        result.state = state
        if cfg.mode == "tangent":
            warm = transfer_coeffs(U_prev, gamma, state.U) if gamma.r else None
            res, gamma, winfo = wls_step_tangent(
                s, state, y, warm, tol=cfg.tol_inner, max_iter=cfg.max_inner,
                aa_tol=cfg.aa_tol, z_y=z_y)
        else:
            res, gamma, winfo = wls_step_range(
                s, state, y, tol=cfg.tol_inner, max_iter=cfg.max_inner, aa_tol=cfg.aa_tol)
        inner_iters = winfo.inner_iters
        U_prev = state.U
        X_prev = X
        X = ImplicitGram.from_coeffs(s, res, state.U, gamma)
    return result


def write_trace_csv(result: IrlsResult, fh) -> None:
    fh.write(result.trace_csv())
