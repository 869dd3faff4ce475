"""Primal/dual bases of symmetric matrices and the distance measurement operator.

The primal basis element of an off-diagonal pair (i, j) is
``w = (e_i - e_j)(e_i - e_j)^T``, so ``<w, X> = X_ii + X_jj - 2 X_ij`` is a
squared distance when X is a Gram matrix. The diagonal elements
``w_(i,i) = (e_i 1^T + 1 e_i^T) / 2`` read off row sums and encode centering.

Public functions that take an index pair use 1-based ``(i, j)`` tuples;
:class:`SampleSet` stores 0-based index arrays internally.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionMismatch, IndexOutOfRange, ParseError, TooLarge
from .linalg import CGResult, LinOp, cg_solve, operator_norm  # noqa: F401

AA_STAR_TOL = 1e-12
DIRECT_MAX_N = 3000
COHERENCE_MAX_N = 64


class IndexPair(NamedTuple):
    """1-based point indices; ``i == j`` tags a diagonal (centering) element."""

    i: int
    j: int

    @property
    def is_diagonal(self) -> bool:
        return self.i == self.j


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def all_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based upper-triangular index arrays in row-major order."""
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64), j.astype(np.int64)


def pair_index(i, j, n):
    """Rank of the 0-based pair (i, j), i < j, in row-major order."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@dataclass(eq=False)
class SampleSet:
    """Observed squared distances on a (multi)set of point pairs."""

    n: int
    i: np.ndarray
    j: np.ndarray
    d2: np.ndarray
    with_replacement: bool = False
    _check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.int64).ravel()
        self.j = np.asarray(self.j, dtype=np.int64).ravel()
        self.d2 = np.asarray(self.d2, dtype=float).ravel()
        if not (self.i.size == self.j.size == self.d2.size):
            raise DimensionMismatch("pair and distance arrays differ in length")
        if not self._check:
            return
        n = self.n
        if self.m and (self.i.min() < 0 or self.j.max() >= n or np.any(self.i >= self.j)):
            raise IndexOutOfRange("pairs must satisfy 0 <= i < j < n")
        if not np.all(np.isfinite(self.d2)) or np.any(self.d2 < 0):
            raise ValueError("squared distances must be finite and non-negative")
        if not self.with_replacement:
            if self.m > self.L:
                raise ValueError("more distinct pairs than exist")
            if np.unique(self.keys).size != self.m:
                raise ValueError("duplicate pairs in a without-replacement sample set")

    @property
    def m(self) -> int:
        return int(self.i.size)

    @property
    def L(self) -> int:
        return num_pairs(self.n)

    @property
    def y(self) -> np.ndarray:
        """Measurement vector [d2; 0] of length m + n."""
        return np.concatenate([self.d2, np.zeros(self.n)])

    def pairs(self) -> list[IndexPair]:
        return [IndexPair(int(a) + 1, int(b) + 1) for a, b in zip(self.i, self.j)]

    @cached_property
    def keys(self) -> np.ndarray:
        return pair_index(self.i, self.j, self.n)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Signed m x n incidence matrix: +1 at column i, -1 at column j."""
        m, n = self.m, self.n
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([self.i, self.j]).ravel()
        vals = np.tile([1.0, -1.0], m)
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, n))

    @cached_property
    def unsigned_incidence(self) -> sp.csr_matrix:
        return abs(self.incidence).tocsr()

    @cached_property
    def _woodbury_cho(self):
        """Cholesky factor of 2 I + N^T N (n x n) for direct solves with N N^T + 2 I."""
        N = self.unsigned_incidence
        K = (N.T @ N).toarray()
        K[np.diag_indices_from(K)] += 2.0
        return cho_factor(K, lower=True)

    @cached_property
    def _dup_groups(self):
        if not self.with_replacement:
            return None
        _, inv = np.unique(self.keys, return_inverse=True)
        return inv

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.i, other.i)
                and np.array_equal(self.j, other.j)
                and np.array_equal(self.d2, other.d2))


def _check_pair(alpha, n):
    i, j = int(alpha[0]), int(alpha[1])
    if not (1 <= i <= n and 1 <= j <= n) or i > j:
        raise IndexOutOfRange(f"index pair {alpha} invalid for n={n}")
    return i - 1, j - 1


def primal_basis_element(alpha, n: int) -> np.ndarray:
    i, j = _check_pair(alpha, n)
    W = np.zeros((n, n))
    if i == j:
        W[i, :] += 0.5
        W[:, i] += 0.5
    else:
        W[i, i] = W[j, j] = 1.0
        W[i, j] = W[j, i] = -1.0
    return W


def _centered_unit(i: int, n: int) -> np.ndarray:
    a = np.full(n, -1.0 / n)
    a[i] += 1.0
    return a


def dual_basis_element(alpha, n: int) -> np.ndarray:
    i, j = _check_pair(alpha, n)
    ai = _centered_unit(i, n)
    if i == j:
        V = -np.outer(ai, ai)
        V[i, i] += 1.0
        return V
    aj = _centered_unit(j, n)
    return -0.5 * (np.outer(ai, aj) + np.outer(aj, ai))


def _check_square(s: SampleSet, X):
    X = np.asarray(X, dtype=float)
    if X.shape != (s.n, s.n):
        raise DimensionMismatch(f"expected {s.n}x{s.n} matrix, got {X.shape}")
    return X


def _check_meas(s: SampleSet, y):
    y = np.asarray(y, dtype=float)
    if y.shape[0] != s.m + s.n:
        raise DimensionMismatch(f"expected length {s.m + s.n}, got {y.shape[0]}")
    return y


def apply_A(s: SampleSet, X, row_sums=None) -> np.ndarray:
    """Measurements of a dense symmetric matrix: squared distances then row sums."""
    X = _check_square(s, X)
    out = np.empty(s.m + s.n)
    out[: s.m] = X[s.i, s.i] + X[s.j, s.j] - 2.0 * X[s.i, s.j]
    out[s.m:] = X.sum(axis=1) if row_sums is None else row_sums
    return out


def _edge_matrix(s: SampleSet, c) -> np.ndarray:
    """Dense sum_l c_l w_{alpha_l} over the off-diagonal samples."""
    n = s.n
    flat = np.bincount(s.i * (n + 1), weights=c, minlength=n * n)
    flat += np.bincount(s.j * (n + 1), weights=c, minlength=n * n)
    flat -= np.bincount(s.i * n + s.j, weights=c, minlength=n * n)
    flat -= np.bincount(s.j * n + s.i, weights=c, minlength=n * n)
    return flat.reshape(n, n)


def apply_A_star(s: SampleSet, y) -> np.ndarray:
    """Adjoint of :func:`apply_A`: sum_l y_l w_l including the centering terms."""
    y = _check_meas(s, y)
    S = _edge_matrix(s, y[: s.m])
    z = 0.5 * y[s.m:]
    S += z[:, None]
    S += z[None, :]
    return S


def edge_apply(s: SampleSet, c, V) -> np.ndarray:
    """(sum_l c_l w_{alpha_l}) @ V without forming the n x n matrix."""
    B = s.incidence
    BV = B @ V
    if BV.ndim == 1:
        return B.T @ (c * BV)
    return B.T @ (c[:, None] * BV)


def A_star_matvec(s: SampleSet, y, V) -> np.ndarray:
    """A*(y) @ V in O(m + n) per column."""
    y = _check_meas(s, y)
    z = y[s.m:]
    out = edge_apply(s, y[: s.m], V)
    if np.ndim(V) == 1:
        out += 0.5 * (z * V.sum() + z @ V)
    else:
        out += 0.5 * (np.outer(z, V.sum(axis=0)) + (z @ V)[None, :])
    return out


def apply_AA_star(s: SampleSet, y) -> np.ndarray:
    """A(A*(y)) in O(m + n).

    The off-diagonal and centering blocks decouple because every w_(i,j) has
    zero row sums. Off-diagonal block: <w_a, w_b> is 4 for equal pairs, 1 for
    pairs sharing one point, 0 otherwise. Centering block:
    <w_(i,i), w_(k,k)> = (n delta_ik + 1) / 2.
    """
    y = _check_meas(s, y)
    m, n = s.m, s.n
    c = y[:m]
    N = s.unsigned_incidence
    out = np.empty(m + n)
    out[:m] = N @ (N.T @ c)
    if s.with_replacement:
        grp = s._dup_groups
        out[:m] += 2.0 * np.bincount(grp, weights=c)[grp]
    else:
        out[:m] += 2.0 * c
    z = y[m:]
    out[m:] = 0.5 * n * (z + z.mean())
    return out


def AA_star_op(s: SampleSet) -> LinOp:
    d = s.m + s.n
    return LinOp(d, d, lambda v: apply_AA_star(s, v), True)


def _off_block(s: SampleSet, c):
    N = s.unsigned_incidence
    return N @ (N.T @ c) + 2.0 * c


def solve_AA_star(s: SampleSet, b, tol: float = AA_STAR_TOL, max_iter: int = 10_000,
                  return_info: bool = False, method: str = "auto"):
    """Solve (A A*) z = b.

    The centering block ((n/2) I + (1/2) 1 1^T) is inverted in closed form. The
    distance block N N^T + 2 I is solved either directly, through the Woodbury
    identity and a cached Cholesky factor of the n x n matrix 2 I + N^T N
    (``method="direct"``, the default up to ``DIRECT_MAX_N`` points), or by CG
    to relative residual ``tol`` (``method="cg"``).
    """
    b = _check_meas(s, b)
    if s.with_replacement and np.unique(s.keys).size != s.m:
        raise ValueError("A A* is singular when pairs repeat")
    if method == "auto":
        method = "direct" if s.n <= DIRECT_MAX_N else "cg"
    m, n = s.m, s.n
    c = b[:m]
    if method == "direct":
        N = s.unsigned_incidence
        x = 0.5 * (c - N @ cho_solve(s._woodbury_cho, N.T @ c))
        res = CGResult(x, True, 0, 0.0, float(np.linalg.norm(c)))
    elif method == "cg":
        res = cg_solve(lambda v: _off_block(s, v), c, tol=tol, max_iter=max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    g = b[m:]
    z = np.concatenate([res.x, (2.0 / n) * (g - g.sum() / (2.0 * n))])
    if return_info:
        return z, res
    return z


def _double_center(M: np.ndarray) -> np.ndarray:
    """J M J with J = I - 11^T/n."""
    r = M.mean(axis=1, keepdims=True)
    c = M.mean(axis=0, keepdims=True)
    return M - r - c + M.mean()


def dual_coefficients(s: SampleSet, Y) -> tuple[np.ndarray, np.ndarray]:
    """<Y, v_alpha> for the sampled pairs and for all diagonal elements."""
    Y = _check_square(s, Y)
    n = s.n
    rs = Y.sum(axis=1)
    tot = rs.sum()
    off = -(Y[s.i, s.j] - (rs[s.i] + rs[s.j]) / n + tot / n**2)
    diag = 2.0 * rs / n - tot / n**2
    return off, diag


def _dual_combination(s: SampleSet, c_off, c_diag) -> np.ndarray:
    """sum_l c_off[l] v_{alpha_l} + sum_i c_diag[i] v_(i,i)."""
    n = s.n
    C = np.bincount(s.i * n + s.j, weights=c_off, minlength=n * n).reshape(n, n)
    C = C + C.T
    D = np.diag(c_diag)
    return -0.5 * _double_center(C) + D - _double_center(D)


def apply_Q_omega(s: SampleSet, X) -> np.ndarray:
    """Sampling operator: (L/m) sum_{Omega} <X,w>v + sum_i <X,w_(i,i)>v_(i,i).

    The L/m factor multiplies only the sampled off-diagonal part.
    """
    X = _check_square(s, X)
    a = apply_A(s, X)
    return _dual_combination(s, (s.L / s.m) * a[: s.m], a[s.m:])


def apply_Q_omega_adjoint(s: SampleSet, Y) -> np.ndarray:
    off, diag = dual_coefficients(s, Y)
    y = np.concatenate([(s.L / s.m) * off, diag])
    return apply_A_star(s, y)


def Q_omega_op(s: SampleSet) -> LinOp:
    """Q_Omega as an operator on vectorized n x n matrices."""
    n = s.n

    def fwd(v):
        return apply_Q_omega(s, v.reshape(n, n)).ravel()

    def adj(v):
        return apply_Q_omega_adjoint(s, v.reshape(n, n)).ravel()

    return LinOp(n * n, n * n, fwd, False, adj)


def coherence(U0, *, max_n: int = COHERENCE_MAX_N, return_parts: bool = False):
    """Smallest nu satisfying both coherence inequalities for span(U0).

    Exact O(L^2 r) evaluation over all pairs alpha, beta (diagonal elements
    excluded). Refuses ``n > max_n``.
    """
    U0 = np.asarray(U0, dtype=float)
    n, r = U0.shape
    if n > max_n:
        raise TooLarge(f"coherence enumeration refused for n={n} > {max_n}")
    P = U0 @ U0.T
    I, J = all_pairs(n)
    L = I.size
    B = np.zeros((L, n))
    B[np.arange(L), I] = 1.0
    B[np.arange(L), J] = -1.0
    X = B @ P          # rows: P b_beta
    # <P_T w_a, w_b> = <w_a, P_T w_b> with P_T(bb^T) = x b^T + b x^T - x x^T
    Gxb = X @ B.T      # (P b_beta) . b_alpha, indexed [beta, alpha]
    Gbb = B @ B.T
    E1 = 2.0 * Gxb * Gbb - Gxb**2
    s1 = np.sum(E1**2, axis=0).max()
    # dual elements: <v_a, x y^T + y x^T - x x^T> with v_a = -(a_i a_j^T + a_j a_i^T)/2
    Xc = X - X.mean(axis=1, keepdims=True)
    Yc = B - B.mean(axis=1, keepdims=True)
    E2 = -(Xc[:, I] * Yc[:, J] + Xc[:, J] * Yc[:, I]) + Xc[:, I] * Xc[:, J]
    s2 = np.sum(E2**2, axis=0).max()
    nu1 = s1 * n / (2.0 * r)
    nu2 = s2 * n / (4.0 * r)
    nu = max(nu1, nu2)
    if return_parts:
        return nu, (float(s1), float(s2))
    return float(nu)


def write_samples(s: SampleSet, fh=None) -> str | None:
    """Write the ``edg-samples v1`` text format (1-based indices)."""
    buf = io.StringIO() if fh is None else fh
    buf.write(f"edg-samples v1 n={s.n} m={s.m}\n")
    for a, b, d in zip(s.i, s.j, s.d2):
        buf.write(f"{a + 1} {b + 1} {format(float(d), '.17g')}\n")
    if fh is None:
        return buf.getvalue()
    return None


def read_samples(text: str) -> SampleSet:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty sample file", 1)
    head = lines[0].split()
    if len(head) != 4 or head[:2] != ["edg-samples", "v1"]:
        raise ParseError("bad header, expected 'edg-samples v1 n=<n> m=<m>'", 1)
    try:
        n = int(head[2].removeprefix("n="))
        m = int(head[3].removeprefix("m="))
    except ValueError:
        raise ParseError("bad header counts", 1) from None
    body = [(k, ln) for k, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != m:
        raise ParseError(f"header says m={m} but found {len(body)} records", 1)
    I = np.empty(m, dtype=np.int64)
    J = np.empty(m, dtype=np.int64)
    D = np.empty(m)
    for t, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != 3:
            raise ParseError("expected 'i j d2'", lineno)
        try:
            a, b, d = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError("non-numeric field", lineno) from None
        if not (1 <= a < b <= n) or not math.isfinite(d) or d < 0:
            raise ParseError("index or distance out of range", lineno)
        I[t], J[t], D[t] = a - 1, b - 1, d
    dup = np.unique(pair_index(I, J, n)).size != m
    return SampleSet(n, I, J, D, with_replacement=dup)
