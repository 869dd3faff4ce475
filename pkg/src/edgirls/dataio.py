"""Synthetic point clouds, pair samplers and loaders for PDB and lat/long data."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .basis import SampleSet, num_pairs
from .errors import EmptyCloud, ParseError, TooMany
from .geometry import PointCloud, center
from .rng import make_rng


@dataclass(frozen=True)
class InstanceSpec:
    n: int
    r: int
    kind: Literal["gaussian", "ill_conditioned"] = "gaussian"
    kappa: float = 1.0
    decay_exponent: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.n > self.r >= 1:
            raise ValueError("need n > r >= 1")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.kind not in ("gaussian", "ill_conditioned"):
            raise ValueError(f"unknown instance kind {self.kind!r}")


def gen_gaussian(n: int, r: int, seed=0) -> PointCloud:
    """i.i.d. standard normal coordinates, then centered."""
    rng = make_rng(seed)
    return center(rng.standard_normal((r, n)))


def ill_conditioned_spectrum(r: int, kappa: float, decay: float = 2.0) -> np.ndarray:
    """Gram eigenvalues from kappa down to 1, affine in i^-decay.

    lambda_i = 1 + (kappa - 1) * ((r/i)^p - 1) / (r^p - 1) with p = decay, so
    lambda_1 = kappa and lambda_r = 1.
    """
    if r == 1:
        return np.array([1.0])
    i = np.arange(1, r + 1, dtype=float)
    p = decay
    return 1.0 + (kappa - 1.0) * ((r / i) ** p - 1.0) / (r**p - 1.0)


def gen_ill_conditioned(n: int, r: int, kappa: float, seed=0, decay: float = 2.0) -> PointCloud:
    """Centered points whose Gram matrix has the spectrum above exactly.

    The eigenvectors are a random orthonormal basis of the complement of the
    all-ones vector, so centering does not disturb the spectrum.
    """
    rng = make_rng(seed)
    G = rng.standard_normal((n, r))
    G -= G.mean(axis=0, keepdims=True)
    U, R = np.linalg.qr(G)
    U = U * np.sign(np.diag(R))
    lam = ill_conditioned_spectrum(r, kappa, decay)
    return PointCloud(np.sqrt(lam)[:, None] * U.T)


def make_points(spec: InstanceSpec) -> PointCloud:
    if spec.kind == "gaussian":
        return gen_gaussian(spec.n, spec.r, spec.seed)
    return gen_ill_conditioned(spec.n, spec.r, spec.kappa, spec.seed, spec.decay_exponent)


def dof(n: int, r: int) -> int:
    """Degrees of freedom n r - r (r - 1) / 2 of a rank-r symmetric n x n matrix."""
    return n * r - r * (r - 1) // 2


def oversampling_to_m(rho: float, n: int, r: int) -> int:
    m = int(math.floor(rho * dof(n, r) + 0.5))
    return max(1, min(m, num_pairs(n)))


def pairs_from_index(t, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major rank of upper-triangular pairs (0-based)."""
    t = np.asarray(t, dtype=np.int64)
    L = num_pairs(n)
    # count of pairs whose row index is >= i is (n - i)(n - i - 1)/2
    back = L - 1 - t
    k = np.floor((np.sqrt(8.0 * back + 1.0) - 1.0) / 2.0).astype(np.int64)
    # fix floating point at triangular-number boundaries
    k += (k + 1) * (k + 2) // 2 <= back
    k -= k * (k + 1) // 2 > back
    i = n - 2 - k
    row_start = i * n - i * (i + 1) // 2
    j = t - row_start + i + 1
    return i, j


def sample_pairs(n: int, m: int, seed=0, with_replacement: bool = False):
    """Uniform pair indices (0-based arrays i < j).

    Without replacement this is a partial Fisher-Yates shuffle over the L pair
    ranks, kept sparse with a dict so memory is O(m).
    """
    L = num_pairs(n)
    rng = make_rng(seed)
    if with_replacement:
        t = rng.integers(0, L, size=m)
    else:
        if m > L:
            raise TooMany(f"cannot draw {m} distinct pairs out of {L}")
        picks = rng.integers(np.arange(m), L)
        swapped: dict[int, int] = {}
        t = np.empty(m, dtype=np.int64)
        for k in range(m):
            p = int(picks[k])
            t[k] = swapped.get(p, p)
            swapped[p] = swapped.get(k, k)
    return pairs_from_index(t, n)


def observe(P, pairs, with_replacement: bool = False) -> SampleSet:
    c = P.coords if isinstance(P, PointCloud) else np.asarray(P, dtype=float)
    i, j = (np.asarray(a, dtype=np.int64) for a in pairs)
    diff = c[:, i] - c[:, j]
    d2 = np.einsum("kl,kl->l", diff, diff)
    return SampleSet(c.shape[1], i, j, d2, with_replacement=with_replacement)


def load_pdb_atoms(text: str, *, include_hetatm: bool = False, atom_names=None,
                   first_model_only: bool = True) -> PointCloud:
    """(x, y, z) from fixed-column ATOM (and optionally HETATM) records.

    ``atom_names`` restricts to atoms whose name (columns 13-16) is in the set,
    e.g. ``{"CA"}`` for alpha carbons.
    """
    kinds = ("ATOM  ", "HETATM") if include_hetatm else ("ATOM  ",)
    names = None if atom_names is None else {a.strip() for a in atom_names}
    pts = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        rec = line[:6].ljust(6)
        if rec == "ENDMDL" and first_model_only and pts:
            break
        if rec not in kinds:
            continue
        if names is not None and line[12:16].strip() not in names:
            continue
        if len(line) < 54:
            raise ParseError("coordinate record shorter than 54 columns", lineno)
        try:
            xyz = [float(line[a:b]) for a, b in ((30, 38), (38, 46), (46, 54))]
        except ValueError:
            raise ParseError("non-numeric coordinate field", lineno) from None
        pts.append(xyz)
    if not pts:
        raise EmptyCloud("no coordinate records found")
    return PointCloud(np.array(pts).T)


_LON = ("lon", "long", "longitude", "lng")
_LAT = ("lat", "latitude")


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_latlong_csv(text: str) -> PointCloud:
    """Planar (longitude, latitude) points.

    A header row is skipped when present; named ``lon``/``lat`` columns are
    picked by name, otherwise the first two columns are longitude, latitude.
    """
    rows = [(k, row) for k, row in enumerate(csv.reader(io.StringIO(text)), start=1) if row]
    if not rows:
        raise EmptyCloud("no rows")
    cols = (0, 1)
    first = [c.strip() for c in rows[0][1]]
    if not all(_is_number(c) for c in first[:2]):
        low = [c.lower() for c in first]
        lon = next((k for k, c in enumerate(low) if c in _LON), None)
        lat = next((k for k, c in enumerate(low) if c in _LAT), None)
        if lon is not None and lat is not None:
            cols = (lon, lat)
        rows = rows[1:]
    pts = []
    for lineno, row in rows:
        try:
            pts.append([float(row[cols[0]]), float(row[cols[1]])])
        except (ValueError, IndexError):
            raise ParseError("expected numeric longitude and latitude", lineno) from None
    if not pts:
        raise EmptyCloud("no data rows")
    return PointCloud(np.array(pts).T)
