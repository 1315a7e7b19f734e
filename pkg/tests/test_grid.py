import math

import numpy as np
import pytest
from scipy.special import erf

from parametric_modes.grid import (DimensionError, FrequencyGrid, GridError, KernelMatrix, desymmetrize, make_grid,
                                   symmetrize, weighted_apply, weighted_compose)


def test_points_and_trapezoid_weights():
    g = make_grid(-1.0, 1.0, 5)
    np.testing.assert_allclose(g.points, [-1, -0.5, 0, 0.5, 1])
    np.testing.assert_allclose(g.weights, [0.25, 0.5, 0.5, 0.5, 0.25])
    assert g.spacing == pytest.approx(0.5)
    assert g.weights.sum() == pytest.approx(2.0)


def test_gaussian_row_integral_matches_erf():
    g = make_grid(-8.0, 8.0, 401)
    for w1 in (-2.0, 0.0, 1.5):
        row = np.exp(-0.25 * (w1 + g.points) ** 2)
        exact = math.sqrt(math.pi) * (erf((8 + w1) / 2) - erf((-8 + w1) / 2))
        assert abs(g.weights @ row - exact) / exact < 1e-6


def test_inner_product_and_norm():
    g = make_grid(-10, 10, 2001)
    u = np.exp(-g.points ** 2 / 2) * np.exp(1j * g.points)
    assert g.norm(u) ** 2 == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    assert abs(g.inner(u, 1j * u) - 1j * math.sqrt(math.pi)) < 1e-9


def test_invalid_grids():
    with pytest.raises(GridError):
        make_grid(1.0, -1.0, 11)
    with pytest.raises(GridError):
        make_grid(-1.0, 1.0, 1)
    with pytest.raises(GridError):
        make_grid(-1.0, float("inf"), 11)


def test_single_point_grid():
    g = FrequencyGrid.single_point(0.0, 0.25)
    assert g.n == 1
    np.testing.assert_array_equal(g.points, [0.0])
    np.testing.assert_array_equal(g.weights, [0.25])


def test_round_trip_dict():
    g = make_grid(-6, 6, 201)
    assert FrequencyGrid.from_dict(g.to_dict()) == g
    s = FrequencyGrid.single_point(0.0, 2.0)
    assert FrequencyGrid.from_dict(s.to_dict()) == s


def test_kernel_shape_checked():
    g = make_grid(-1, 1, 5)
    h = make_grid(-1, 1, 7)
    KernelMatrix(np.zeros((5, 7)), g, h)
    with pytest.raises(DimensionError):
        KernelMatrix(np.zeros((7, 5)), g, h)


def test_weighted_apply_integrates():
    g = make_grid(-8, 8, 401)
    K = KernelMatrix(np.exp(-0.5 * (g.points[:, None] - g.points[None, :]) ** 2), g, g)
    v = np.exp(-0.5 * g.points ** 2)
    # convolution of two unit Gaussians
    exact = math.sqrt(math.pi) * np.exp(-g.points ** 2 / 4)
    assert np.abs(weighted_apply(K, v) - exact)[150:250].max() < 1e-8


def test_symmetrize_maps_weighted_products_to_matrix_products():
    rng = np.random.default_rng(0)
    ga, gb = make_grid(-3, 3, 9), make_grid(-2, 2, 7)
    A = rng.normal(size=(9, 7)) + 1j * rng.normal(size=(9, 7))
    B = rng.normal(size=(7, 9)) + 1j * rng.normal(size=(7, 9))
    left = symmetrize(KernelMatrix(weighted_compose(A, B, gb), ga, ga))
    right = symmetrize(KernelMatrix(A, ga, gb)) @ symmetrize(KernelMatrix(B, gb, ga))
    np.testing.assert_allclose(left, right, atol=1e-12)
    back = desymmetrize(symmetrize(KernelMatrix(A, ga, gb)), ga, gb)
    np.testing.assert_allclose(back.values, A, atol=1e-14)


def test_grid_is_immutable():
    g = make_grid(-1, 1, 5)
    with pytest.raises(Exception):
        g.n = 7
