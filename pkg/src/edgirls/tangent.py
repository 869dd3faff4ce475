"""Tangent space of the symmetric rank-r manifold in coefficient form.

A tangent vector at span(U) is stored as (G1, G2) with G1 symmetric r x r and
U^T G2 = 0; it embeds as ``U G1 U^T + U G2^T + G2 U^T``. Writing
``B = U G1 / 2 + G2`` the embedding is ``U B^T + B U^T``, which is the form the
fast operators below work with.

The coefficient inner product is <G1, G1'> + 2 <G2, G2'>, which makes the
embedding an isometry, and :meth:`TangentCoeffs.to_vector` scales G2 by sqrt(2)
so plain dot products of flat vectors agree with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import A_star_matvec, SampleSet, _check_meas
from .errors import DimensionMismatch

SQRT2 = np.sqrt(2.0)


@dataclass
class TangentCoeffs:
    gamma1: np.ndarray
    gamma2: np.ndarray

    @property
    def n(self) -> int:
        return self.gamma2.shape[0]

    @property
    def r(self) -> int:
        return self.gamma1.shape[0]

    @classmethod
    def zeros(cls, n: int, r: int) -> "TangentCoeffs":
        return cls(np.zeros((r, r)), np.zeros((n, r)))

    def inner(self, other: "TangentCoeffs") -> float:
        return float(np.vdot(self.gamma1, other.gamma1)
                     + 2.0 * np.vdot(self.gamma2, other.gamma2))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.gamma1.ravel(), SQRT2 * self.gamma2.ravel()])

    @classmethod
    def from_vector(cls, v, n: int, r: int) -> "TangentCoeffs":
        v = np.asarray(v, dtype=float)
        if v.size != r * r + n * r:
            raise DimensionMismatch("coefficient vector has the wrong length")
        return cls(v[: r * r].reshape(r, r).copy(), v[r * r:].reshape(n, r) / SQRT2)

    def cleaned(self, U) -> "TangentCoeffs":
        """Re-impose G1 = G1^T and U^T G2 = 0."""
        g1 = 0.5 * (self.gamma1 + self.gamma1.T)
        g2 = self.gamma2 - U @ (U.T @ self.gamma2)
        return TangentCoeffs(g1, g2)

    def __add__(self, other):
        return TangentCoeffs(self.gamma1 + other.gamma1, self.gamma2 + other.gamma2)

    def __sub__(self, other):
        return TangentCoeffs(self.gamma1 - other.gamma1, self.gamma2 - other.gamma2)

    def __mul__(self, a: float):
        return TangentCoeffs(a * self.gamma1, a * self.gamma2)

    __rmul__ = __mul__


def _check_U(U, c: TangentCoeffs | None = None):
    U = np.asarray(U, dtype=float)
    if U.ndim != 2:
        raise DimensionMismatch("U must be n x r")
    if c is not None and (c.gamma2.shape != U.shape or c.gamma1.shape != (U.shape[1],) * 2):
        raise DimensionMismatch("coefficients do not match U")
    return U


def tangent_factor(U, c: TangentCoeffs) -> np.ndarray:
    """B with embed_T(U, c) == U B^T + B U^T."""
    return 0.5 * (U @ c.gamma1) + c.gamma2


def _coeffs_from_ZU(U, ZU) -> TangentCoeffs:
    g1 = U.T @ ZU
    g1 = 0.5 * (g1 + g1.T)
    g2 = ZU - U @ g1
    g2 -= U @ (U.T @ g2)
    return TangentCoeffs(g1, g2)


def project_T_star(U, Z) -> TangentCoeffs:
    """Adjoint of the embedding: (U^T Z U, (I - U U^T) Z U)."""
    U = _check_U(U)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (U.shape[0],) * 2:
        raise DimensionMismatch("Z does not match U")
    return _coeffs_from_ZU(U, Z @ U)


def embed_T(U, c: TangentCoeffs) -> np.ndarray:
    U = _check_U(U, c)
    B = tangent_factor(U, c)
    X = U @ B.T
    return X + X.T


def project_T(U, Z) -> np.ndarray:
    """Orthogonal projection of a symmetric matrix onto the tangent space."""
    return embed_T(U, project_T_star(U, Z))


def apply_A_PT(s: SampleSet, U, c: TangentCoeffs) -> np.ndarray:
    """Measurements of the embedded tangent vector in O((m + n) r).

    With X = U B^T + B U^T the squared-distance functional of a pair (i, j)
    is 2 (u_i - u_j) . (b_i - b_j); row sums are U (B^T 1) + B (U^T 1).
    """
    U = _check_U(U, c)
    if U.shape[0] != s.n:
        raise DimensionMismatch("U does not match the sample set")
    B = tangent_factor(U, c)
    out = np.empty(s.m + s.n)
    dU = U[s.i] - U[s.j]
    dB = B[s.i] - B[s.j]
    out[: s.m] = 2.0 * np.einsum("lk,lk->l", dU, dB)
    out[s.m:] = U @ B.sum(axis=0) + B @ U.sum(axis=0)
    return out


def apply_PTstar_Astar(s: SampleSet, U, y) -> TangentCoeffs:
    """project_T_star(U, A*(y)) in O((m + n) r + n r^2)."""
    U = _check_U(U)
    y = _check_meas(s, y)
    return _coeffs_from_ZU(U, A_star_matvec(s, y, U))


def transfer_coeffs(U_prev, c_prev: TangentCoeffs, U_new) -> TangentCoeffs:
    """Project a tangent vector at span(U_prev) onto the tangent space at span(U_new)."""
    U_prev = _check_U(U_prev, c_prev)
    U_new = _check_U(U_new)
    B = tangent_factor(U_prev, c_prev)
    ZU = U_prev @ (B.T @ U_new) + B @ (U_prev.T @ U_new)
    return _coeffs_from_ZU(U_new, ZU)


def tangent_dim(n: int, r: int) -> int:
    return r * (r + 1) // 2 + (n - r) * r
