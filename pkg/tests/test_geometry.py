import numpy as np
from hypothesis import given, strategies as st

from kanemele.geometry import (
    bz_wrap,
    dirac_points,
    fractional_grid,
    from_fractional,
    lattice_vectors,
    to_fractional,
    torus_distance,
)
from kanemele.model import ModelParams, omega

coord = st.floats(-20, 20, allow_nan=False)


def test_dual_basis():
    lat = lattice_vectors()
    assert np.allclose(lat.b @ lat.a[:2].T, 2 * np.pi * np.eye(2), atol=1e-14)


def test_vectors_sum_to_zero():
    lat = lattice_vectors()
    assert np.allclose(lat.d.sum(0), 0)
    assert np.allclose(lat.a.sum(0), 0)
    assert np.allclose(np.linalg.norm(lat.d, axis=1), 1)
    assert np.allclose(np.linalg.norm(lat.a, axis=1), np.sqrt(3))


def test_cell_and_zone_area():
    lat = lattice_vectors()
    assert np.isclose(lat.cellArea, 1.5 * np.sqrt(3))
    assert np.isclose(lat.cellArea * lat.bzArea, (2 * np.pi) ** 2)


def test_dirac_points_are_zeros_of_hopping():
    p = ModelParams()
    for k in dirac_points():
        assert abs(omega(p, k)) < 1e-14


def test_dirac_points_are_time_reversal_partners():
    kp, km = dirac_points()
    assert torus_distance(kp, -km) < 1e-12
    assert torus_distance(kp, km) > 1.0


@given(coord, coord)
def test_wrap_is_idempotent_and_lands_in_cell(x, y):
    k = np.array([x, y])
    w = bz_wrap(k)
    alpha = to_fractional(w)
    assert np.all(alpha >= -1e-12) and np.all(alpha < 1 + 1e-12)
    assert np.allclose(bz_wrap(w), w, atol=1e-9)
    assert torus_distance(k, w) < 1e-9


@given(coord, coord, st.integers(-3, 3), st.integers(-3, 3))
def test_torus_distance_is_periodic(x, y, n1, n2):
    lat = lattice_vectors()
    k = np.array([x, y])
    c = np.array([0.3, -0.2])
    shift = n1 * lat.b1 + n2 * lat.b2
    assert np.isclose(torus_distance(k + shift, c), torus_distance(k, c), atol=1e-9)


def test_fractional_round_trip(rng):
    a = rng.uniform(-2, 2, size=(50, 2))
    assert np.allclose(to_fractional(from_fractional(a)), a)


def test_grid_layout():
    k = fractional_grid(4)
    assert k.shape == (16, 2)
    alpha = to_fractional(k)
    assert np.allclose(alpha[1], [0, 0.25])
    assert np.allclose(alpha[4], [0.25, 0])
