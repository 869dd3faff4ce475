"""Points, Gram matrices, distance matrices and the Procrustes error metric."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCloud, DimensionMismatch, NotPSD, ParseError
from .linalg import LinOp, truncated_eig

PSD_FLOOR = 1e-8


@dataclass
class PointCloud:
    """r x n coordinates, one column per point."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] < 1:
            raise DimensionMismatch("coords must be an r x n array with n >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coordinates must be finite")
        self.coords = c

    @property
    def r(self) -> int:
        return self.coords.shape[0]

    @property
    def n(self) -> int:
        return self.coords.shape[1]

    def __eq__(self, other):
        return isinstance(other, PointCloud) and np.array_equal(self.coords, other.coords)


def _coords(P) -> np.ndarray:
    return P.coords if isinstance(P, PointCloud) else np.asarray(P, dtype=float)


def center(P) -> PointCloud:
    c = _coords(P)
    return PointCloud(c - c.mean(axis=1, keepdims=True))


def gram(P) -> np.ndarray:
    c = _coords(P)
    X = c.T @ c
    return 0.5 * (X + X.T)


def edm(P) -> np.ndarray:
    """Squared Euclidean distance matrix."""
    X = gram(P)
    d = np.diag(X)
    D = d[:, None] + d[None, :] - 2.0 * X
    np.fill_diagonal(D, 0.0)
    return np.maximum(0.5 * (D + D.T), 0.0)


def points_from_gram(X, r: int, *, strict: bool = True, seed=0, tol=1e-12) -> PointCloud:
    """Best rank-r PSD factor of X as an r x n point cloud.

    ``X`` may be a dense matrix or a self-adjoint :class:`LinOp` (then the top
    eigenpairs come from :func:`truncated_eig`). With ``strict`` a top-r
    eigenvalue below ``-1e-8 * lambda_1`` raises :class:`NotPSD`; small
    negative values are clipped to zero. Without ``strict`` all negatives are
    clipped.
    """
    if isinstance(X, LinOp):
        n = X.dim_in
        k = min(n, r)
        U, lam = truncated_eig(X, k, tol=tol, seed=seed)
        order = np.argsort(-lam, kind="stable")
        U, lam = U[:, order], lam[order]
    else:
        X = np.asarray(X, dtype=float)
        n = X.shape[0]
        lam, U = np.linalg.eigh(0.5 * (X + X.T))
        lam, U = lam[::-1][: min(n, r)], U[:, ::-1][:, : min(n, r)]
    top = max(abs(lam).max(initial=0.0), 0.0)
    if strict and lam.size and lam.min() < -PSD_FLOOR * top:
        raise NotPSD(f"top-{r} eigenvalue {lam.min():.3e} is negative beyond tolerance")
    lam = np.clip(lam, 0.0, None)
    P = np.sqrt(lam)[:, None] * U.T
    if P.shape[0] < r:
        P = np.vstack([P, np.zeros((r - P.shape[0], n))])
    return PointCloud(P)


def classical_mds(D, r: int) -> PointCloud:
    """Classical MDS from a complete squared-distance matrix."""
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    Dc = D - D.mean(axis=0, keepdims=True) - D.mean(axis=1, keepdims=True) + D.mean()
    return points_from_gram(-0.5 * Dc, r)


def procrustes_distance(P_rec, P0) -> float:
    """Relative orthogonal-Procrustes distance of P_rec to the reference P0.

    Both clouds are centered, the best orthogonal Q (reflections allowed, no
    scaling) is taken from the SVD of the cross-covariance, and the residual
    is divided by the Frobenius norm of the centered reference.
    """
    A = center(P0).coords
    B = center(P_rec).coords
    if A.shape != B.shape:
        raise DimensionMismatch(f"shape mismatch {B.shape} vs {A.shape}")
    ref = np.linalg.norm(A)
    if ref == 0.0:
        raise DegenerateCloud("reference cloud has zero spread")
    Uc, _, Vt = np.linalg.svd(B @ A.T)
    Q = Uc @ Vt
    return float(np.linalg.norm(Q @ A - B) / ref)


def success(P_rec, P0, tol: float = 1e-3) -> bool:
    return procrustes_distance(P_rec, P0) <= tol


def write_points_csv(P, fh=None):
    c = _coords(P)
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{k + 1}" for k in range(c.shape[0])])
    for col in c.T:
        w.writerow([format(float(v), ".17g") for v in col])
    return buf.getvalue() if fh is None else None


def read_points_csv(text: str) -> PointCloud:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty point file", 1)
    header = rows[0]
    r = len(header)
    if r == 0 or any(h.strip() != f"x{k + 1}" for k, h in enumerate(header)):
        raise ParseError("header must be x1..xr", 1)
    pts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != r:
            raise ParseError(f"expected {r} fields", lineno)
        try:
            pts.append([float(v) for v in row])
        except ValueError:
            raise ParseError("non-numeric coordinate", lineno) from None
    if not pts:
        raise ParseError("no points", 2)
    return PointCloud(np.array(pts).T)
