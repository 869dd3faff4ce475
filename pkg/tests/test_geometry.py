import numpy as np
import pytest
from hypothesis import given, strategies as st

from edgirls.dataio import gen_gaussian
from edgirls.errors import DegenerateCloud, DimensionMismatch, NotPSD, ParseError
from edgirls.geometry import (PointCloud, center, classical_mds, edm, gram, points_from_gram,
                              procrustes_distance, read_points_csv, success, write_points_csv)
from edgirls.linalg import LinOp

from oracles import procrustes_oracle


def rotation(rng, r):
    Q, R = np.linalg.qr(rng.standard_normal((r, r)))
    return Q * np.sign(np.diag(R))


def test_center():
    P = PointCloud(np.array([[1.0, 3.0], [2.0, 2.0]]))
    c = center(P).coords
    np.testing.assert_allclose(c.mean(axis=1), 0.0, atol=1e-15)
    np.testing.assert_allclose(gram(c) @ np.ones(2), 0.0, atol=1e-14)
    assert center(PointCloud(np.array([[4.0], [5.0]]))).coords.tolist() == [[0.0], [0.0]]
    Pc = gen_gaussian(10, 2, 0)
    np.testing.assert_allclose(center(Pc).coords, Pc.coords, atol=1e-15)


def test_point_cloud_validation():
    with pytest.raises(DimensionMismatch):
        PointCloud(np.zeros(3))
    with pytest.raises(ValueError):
        PointCloud(np.array([[np.inf, 0.0]]))


def test_edm_examples():
    np.testing.assert_array_equal(edm(np.array([[0.0, 1.0]])), [[0, 1], [1, 0]])
    P = np.array([[-1.0, 1, 1, -1], [1, 2, -2, -1]])
    assert edm(P)[0, 1] == 5.0


def test_gram_psd_and_edm_rank():
    P = gen_gaussian(30, 3, 1)
    lam = np.linalg.eigvalsh(gram(P))
    assert lam.min() >= -1e-10 * lam.max()
    assert np.linalg.matrix_rank(edm(P), tol=1e-8 * np.abs(edm(P)).max()) <= 5


@given(st.integers(0, 2**32 - 1))
def test_edm_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((3, 12))
    moved = rotation(rng, 3) @ P + rng.standard_normal((3, 1))
    assert np.abs(edm(moved) - edm(P)).max() <= 1e-12 * max(1.0, np.abs(edm(P)).max())


def test_points_from_gram_roundtrip():
    P = gen_gaussian(40, 3, 2)
    Q = points_from_gram(gram(P), 3)
    assert procrustes_distance(Q, P) <= 1e-10
    Qop = points_from_gram(LinOp.from_dense(gram(P)), 3)
    assert procrustes_distance(Qop, P) <= 1e-10


def test_points_from_gram_identity_and_padding():
    Q = points_from_gram(np.eye(4), 4)
    np.testing.assert_allclose(gram(Q), np.eye(4), atol=1e-12)
    P = gen_gaussian(10, 2, 3)
    Q = points_from_gram(gram(P), 4)
    assert Q.r == 4
    assert np.abs(Q.coords[2:]).max() <= 1e-6


def test_points_from_gram_not_psd():
    X = np.diag([5.0, -3.0])
    with pytest.raises(NotPSD):
        points_from_gram(X, 2)
    Q = points_from_gram(X, 2, strict=False)
    assert not Q.coords[1].any()
    points_from_gram(np.diag([5.0, -1e-10]), 2)  # within the floor


@pytest.mark.parametrize("r", [1, 2, 3, 5])
def test_classical_mds_roundtrip(r):
    P = gen_gaussian(60, r, r)
    assert procrustes_distance(classical_mds(edm(P), r), P) <= 1e-9


def test_classical_mds_small_cases():
    Q = classical_mds(np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
    np.testing.assert_allclose(np.sort(Q.coords[0]), [-0.5, 0.5], atol=1e-12)
    assert not classical_mds(np.zeros((3, 3)), 2).coords.any()


def test_procrustes_basic():
    rng = np.random.default_rng(4)
    P = gen_gaussian(20, 3, 5)
    assert procrustes_distance(P, P) <= 1e-15
    moved = rotation(rng, 3) @ P.coords + rng.standard_normal((3, 1))
    assert procrustes_distance(moved, P) <= 1e-12
    reflected = np.diag([1.0, 1.0, -1.0]) @ P.coords
    assert procrustes_distance(reflected, P) <= 1e-12
    assert procrustes_distance(2 * P.coords, P) > 0.5


@given(st.integers(0, 2**32 - 1))
def test_procrustes_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    P0 = rng.standard_normal((3, 15))
    Pr = P0 + 0.3 * rng.standard_normal((3, 15))
    assert procrustes_distance(Pr, P0) == pytest.approx(procrustes_oracle(Pr, P0), rel=1e-10)


def test_procrustes_errors():
    with pytest.raises(DegenerateCloud):
        procrustes_distance(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(DimensionMismatch):
        procrustes_distance(np.zeros((2, 3)), np.ones((3, 3)))


def test_success_threshold():
    rng = np.random.default_rng(6)
    P = PointCloud(rng.standard_normal((2, 50)))
    assert success(P, P)
    noisy = P.coords + 1e-2 * rng.standard_normal(P.coords.shape)
    assert not success(noisy, P, 1e-3)
    d = procrustes_distance(noisy, P)
    assert success(noisy, P, d)


def test_points_csv_roundtrip():
    P = gen_gaussian(7, 3, 8)
    text = write_points_csv(P)
    assert text.splitlines()[0] == "x1,x2,x3"
    assert read_points_csv(text) == P


@pytest.mark.parametrize("text, line", [
    ("", 1), ("a,b\n1,2\n", 1), ("x1,x2\n1,2\n3\n", 3), ("x1,x2\n1,z\n", 2), ("x1\n", 2),
])
def test_points_csv_errors(text, line):
    with pytest.raises(ParseError) as err:
        read_points_csv(text)
    assert err.value.line == line
