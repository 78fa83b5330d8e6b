import numpy as np
import pytest

from lattices.reduction import enumerate_ellipsoid, gram_schmidt, integer_det, lll_reduce
from utils.errors import ReductionError


def test_integer_det():
    assert integer_det(np.array([[2, 1], [1, 1]])) == 1
    assert integer_det(np.array([[1, 2], [3, 4]])) == -2
    assert integer_det(np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])) == -1
    assert integer_det(np.array([[1, 2], [2, 4]])) == 0


def test_gram_schmidt_of_orthogonal_basis():
    mu, norms2 = gram_schmidt(np.diag([2.0, 3.0]))
    assert np.allclose(norms2, [4.0, 9.0])
    assert mu[1, 0] == pytest.approx(0.0)


def test_lll_transform_is_unimodular(rng):
    B = rng.normal(size=(4, 4))
    reduced, U = lll_reduce(B)
    assert np.allclose(B @ U, reduced)
    assert abs(integer_det(U)) == 1


def test_lll_finds_short_vectors():
    # columns (1, 0) and (100, 1) span Z^2
    reduced, _ = lll_reduce(np.array([[1.0, 100.0], [0.0, 1.0]]))
    assert np.allclose(np.sort(np.linalg.norm(reduced, axis=0)), [1.0, 1.0])


class TestEnumeration:

    def test_unit_radius_in_z2(self):
        coeffs = enumerate_ellipsoid(np.eye(2), 1.0)
        assert {tuple(c) for c in coeffs} == {(1, 0), (-1, 0), (0, 1), (0, -1)}

    def test_includes_diagonals(self):
        assert len(enumerate_ellipsoid(np.eye(2), 1.5)) == 8

    def test_weights_stretch_the_ball(self):
        coeffs = enumerate_ellipsoid(np.eye(2), 1.0, weights=np.array([1.0, 0.25]))
        assert {tuple(c) for c in coeffs} == {(1, 0), (-1, 0)} | {(0, j) for j in (-4, -3, -2, -1, 1, 2, 3, 4)}

    def test_skewed_basis_gives_same_vectors(self):
        B = np.array([[1.0, 3.0], [0.0, 1.0]])
        vectors = {tuple(np.rint(B @ c).astype(int)) for c in enumerate_ellipsoid(B, 1.5)}
        assert vectors == {(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)}

    def test_cap(self):
        with pytest.raises(ReductionError):
            enumerate_ellipsoid(np.eye(3), 10.0, cap=100)


class TestConfiguredDefaults:

    def test_lll_delta_from_config(self, lab_config):
        lab_config.set('lattice.lll_delta', 0.2)
        with pytest.raises(ReductionError):
            lll_reduce(np.eye(2))
        reduced, _ = lll_reduce(np.eye(2), delta=0.99)
        assert np.allclose(reduced, np.eye(2))

    def test_enumeration_cap_from_config(self, lab_config):
        lab_config.set('lattice.enumeration_cap', 100)
        with pytest.raises(ReductionError):
            enumerate_ellipsoid(np.eye(3), 10.0)
