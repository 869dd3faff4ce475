"""Dense symmetric helpers, matrix-free CG and a block Lanczos eigensolver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, DimensionMismatch, NonFiniteIterate
from .rng import make_rng


def sym_matrix(entries) -> np.ndarray:
    """Return a float copy of ``entries`` that is exactly symmetric.

    Symmetry is enforced by averaging with the transpose, so
    ``X[i, j] == X[j, i]`` bit for bit afterwards.
    """
    X = np.array(entries, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteIterate("matrix has non-finite entries")
    return 0.5 * (X + X.T)


def frob_inner(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.vdot(A, B))


class _Unset:
    """Marker for the initial smoothing parameter eps_0 = infinity."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNSET"

    def __reduce__(self):
        return (_Unset, ())


UNSET = _Unset()


def eps_min(eps, value: float) -> float:
    """min(eps, value) where ``UNSET`` behaves as +infinity."""
    if eps is UNSET:
        return float(value)
    return float(min(eps, value))


@dataclass(frozen=True)
class LinOp:
    """A linear map given only by its action.

    ``apply`` must accept a 1-D vector. If ``block`` is true it must also
    accept a 2-D array whose columns are vectors. ``adjoint`` is optional and
    only needed for norms of non-self-adjoint maps.
    """

    dim_in: int
    dim_out: int
    apply: Callable[[np.ndarray], np.ndarray]
    is_self_adjoint: bool = False
    adjoint: Callable[[np.ndarray], np.ndarray] | None = None
    block: bool = False

    def __call__(self, v):
        return self.apply(v)

    def matmat(self, V: np.ndarray) -> np.ndarray:
        if V.ndim == 1:
            return self.apply(V)
        if self.block:
            return self.apply(V)
        return np.column_stack([self.apply(V[:, j]) for j in range(V.shape[1])])

    def rmatvec(self, v):
        if self.adjoint is not None:
            return self.adjoint(v)
        if self.is_self_adjoint:
            return self.apply(v)
        raise NotImplementedError("operator has no adjoint")

    @classmethod
    def from_dense(cls, A) -> "LinOp":
        A = np.asarray(A, dtype=float)
        selfadj = A.shape[0] == A.shape[1] and np.array_equal(A, A.T)
        return cls(
            dim_in=A.shape[1],
            dim_out=A.shape[0],
            apply=lambda v: A @ v,
            is_self_adjoint=selfadj,
            adjoint=lambda v: A.T @ v,
            block=True,
        )

    @classmethod
    def identity(cls, n: int) -> "LinOp":
        return cls(n, n, lambda v: np.array(v, dtype=float), True, None, True)


@dataclass
class CGResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    b_norm: float

    @property
    def relative_residual(self) -> float:
        return self.residual_norm / self.b_norm if self.b_norm > 0 else 0.0


def cg_solve(op, b, tol: float = 1e-10, max_iter: int = 2000, x0=None) -> CGResult:
    """Conjugate gradients for a self-adjoint positive definite operator.

    Stops when ``||op(x) - b|| <= tol * ||b||``. Hitting ``max_iter`` is not
    an error: the best iterate is returned with ``converged=False``.
    """
    apply = op.apply if isinstance(op, LinOp) else op
    b = np.asarray(b, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if not math.isfinite(b_norm):
        raise NonFiniteIterate("right-hand side is not finite")
    if b_norm == 0.0:
        return CGResult(np.zeros_like(b), True, 0, 0.0, 0.0)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - apply(x)
    target = tol * b_norm
    rr = float(r @ r)
    best_x, best_res = x.copy(), math.sqrt(rr)
    if best_res <= target:
        return CGResult(x, True, 0, best_res, b_norm)
    p = r.copy()
    for it in range(1, max_iter + 1):
        Ap = apply(p)
        pAp = float(p @ Ap)
        if not math.isfinite(pAp):
            raise NonFiniteIterate(f"CG produced a non-finite value at iteration {it}")
        if pAp <= 0.0:
            # lost positive definiteness numerically; nothing more to gain
            break
        alpha = rr / pAp
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(r @ r)
        res = math.sqrt(rr_new)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= target:
            return CGResult(x, True, it, res, b_norm)
        p *= rr_new / rr
        p += r
        rr = rr_new
    return CGResult(best_x, False, it, best_res, b_norm)


def _project_out(W, Q):
    if Q is not None and Q.shape[1]:
        for _ in range(2):
            W = W - Q @ (Q.T @ W)
    return W


def _orthonormalize(W: np.ndarray, Q: np.ndarray | None, rng, drop_tol=1e-12):
    """Orthonormalize the columns of W against Q and among themselves.

    Columns that collapse (Krylov breakdown) are replaced by fresh random
    directions so the block keeps its width. The projection is repeated on the
    normalized block: when W lies almost inside span(Q) a single normalization
    amplifies the rounding left by the first pass.
    """
    n, b = W.shape
    scale = max(np.linalg.norm(W, axis=0).max(initial=0.0), 1e-300)
    Qw, R = np.linalg.qr(_project_out(W, Q))
    bad = np.abs(np.diag(R)) <= drop_tol * scale
    if bad.any():
        Qw[:, bad] = rng.standard_normal((n, int(bad.sum())))
    Qw, _ = np.linalg.qr(_project_out(Qw, Q))
    return Qw


def truncated_eig(op, k: int, tol: float = 1e-10, *, seed=0, block_size=None,
                  max_dim=None, return_residuals=False):
    """Largest-magnitude eigenpairs of a self-adjoint operator.

    Block Lanczos with full reorthogonalization and a random start block of
    width ``k + 2``. Eigenvalues are returned signed, sorted by decreasing
    magnitude; ties keep the order in which Rayleigh-Ritz produced them.

    Returns ``(U, lam)`` or ``(U, lam, residuals)``.
    """
    if not isinstance(op, LinOp):
        op = LinOp.from_dense(op)
    n = op.dim_in
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = make_rng(seed)
    b = min(n, block_size or k + 2)
    max_dim = n if max_dim is None else min(n, max_dim)

    Q = _orthonormalize(rng.standard_normal((n, b)), None, rng)
    AQ = op.matmat(Q)
    while True:
        if not np.all(np.isfinite(AQ)):
            raise NonFiniteIterate("operator produced non-finite values")
        T = Q.T @ AQ
        T = 0.5 * (T + T.T)
        theta, Y = np.linalg.eigh(T)
        order = np.argsort(-np.abs(theta), kind="stable")[:k]
        theta, Y = theta[order], Y[:, order]
        R = AQ @ Y - (Q @ Y) * theta
        res = np.linalg.norm(R, axis=0)
        scale = abs(theta[0]) if theta.size else 0.0
        done = np.all(res <= tol * scale) or scale == 0.0
        dim = Q.shape[1]
        if done or dim >= max_dim:
            break
        step = min(b, max_dim - dim)
        Qn = _orthonormalize(AQ[:, dim - step:dim], Q, rng)
        Q = np.hstack([Q, Qn])
        AQ = np.hstack([AQ, op.matmat(Qn)])
    if not done and dim < n:
        raise ConvergenceFailure(
            f"truncated_eig: residual {res.max():.3e} above {tol * scale:.3e} "
            f"after a Krylov space of dimension {dim}")
    U = Q @ Y
    # one more pass keeps U orthonormal to working precision
    U, Rf = np.linalg.qr(U)
    U = U * np.sign(np.diag(Rf))
    if return_residuals:
        return U, theta, res
    return U, theta


def eval_smoothed_logdet(sigma_all, eps: float) -> float:
    """Sum of the smoothed log terms f_eps(sigma) over all singular values.

    f_eps(s) = log s for s >= eps, and log eps + (s^2/eps^2 - 1)/2 below.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    s = np.asarray(sigma_all, dtype=float)
    big = s >= eps
    out = np.empty_like(s)
    out[big] = np.log(s[big])
    out[~big] = math.log(eps) + 0.5 * (s[~big] ** 2 / eps**2 - 1.0)
    return float(out.sum())


def smoothed_log(s: float, eps: float) -> float:
    return eval_smoothed_logdet([s], eps)


@dataclass
class SpectralState:
    """Top eigenpairs of an iterate plus the smoothing parameter.

    ``sigma`` holds absolute eigenvalues (descending), ``gamma`` their signs.
    """

    U: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    eps: object = field(default=UNSET)

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        r = self.sigma.size
        if self.U.ndim != 2 or self.U.shape[1] != r or self.gamma.size != r:
            raise DimensionMismatch("U, sigma and gamma disagree on the rank")
        if r and np.any(np.diff(self.sigma) > 0):
            raise ValueError("sigma must be sorted non-increasing")
        if r and self.sigma[-1] <= 0:
            raise ValueError("sigma must be strictly positive")
        if self.eps is not UNSET:
            if not self.eps > 0:
                raise ValueError("eps must be positive")
            if r and self.sigma[-1] <= self.eps:
                raise ValueError("every sigma must exceed eps")

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def rank(self) -> int:
        return self.sigma.size

    @classmethod
    def from_eig(cls, U, lam, eps) -> "SpectralState":
        lam = np.asarray(lam, dtype=float)
        return cls(U, np.abs(lam), np.where(lam < 0, -1.0, 1.0), eps)


def operator_norm(op: LinOp, iters: int = 200, *, seed=0, rtol: float = 1e-6) -> float:
    """Power-method estimate of the largest singular value of ``op``."""
    rng = make_rng(seed)
    v = rng.standard_normal(op.dim_in)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        if op.is_self_adjoint:
            w = op.apply(op.apply(v))
        else:
            w = op.rmatvec(op.apply(v))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        new = math.sqrt(nw)
        v = w / nw
        if abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    return est
