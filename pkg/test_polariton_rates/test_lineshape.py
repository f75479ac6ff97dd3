import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from polariton_rates.lineshape import (
    Lorentzian,
    SpectralFunction,
    broaden,
    check_grid,
    default_grid,
    lorentzian,
    trapezoid_weights,
    uniform_grid,
)


def test_lorentzian_peak() -> None:
    assert lorentzian(0.3, 0.3, 0.01) == pytest.approx(1 / (math.pi * 0.01))
    assert Lorentzian(0.3, 0.01)(0.31) == pytest.approx(0.5 / (math.pi * 0.01))


def test_lorentzian_needs_positive_width() -> None:
    with pytest.raises(ValueError):
        Lorentzian(0.0, 0.0)


class TestGrids:
    def test_check_grid_rejects_unsorted(self) -> None:
        with pytest.raises(ValueError):
            check_grid([0.0, 2.0, 1.0])

    def test_check_grid_rejects_empty(self) -> None:
        with pytest.raises(ValueError):
            check_grid([])

    def test_uniform_grid(self) -> None:
        grid = uniform_grid(0.0, 1.0, 11)
        assert grid.size == 11
        assert grid[0] == 0.0
        assert grid[-1] == 1.0

    def test_uniform_grid_bounds(self) -> None:
        with pytest.raises(ValueError):
            uniform_grid(1.0, 1.0, 11)
        with pytest.raises(ValueError):
            uniform_grid(0.0, 1.0, 1)

    def test_default_grid_margin(self) -> None:
        grid = default_grid([2.0, 1.0], 0.01, points=11, margin=10)
        assert grid[0] == pytest.approx(0.9)
        assert grid[-1] == pytest.approx(2.1)
        assert grid.size == 11


def test_trapezoid_weights() -> None:
    grid = np.array([0.0, 0.1, 0.3, 0.7, 1.0])
    values = np.array([1.0, 3.0, -2.0, 0.5, 4.0])
    assert trapezoid_weights(grid) @ values == pytest.approx(trapezoid(values, grid))


def test_broadened_area() -> None:
    grid = np.linspace(-50.0, 50.0, 200001)
    curve = broaden(np.array([0.0]), np.array([2.0]), grid, 0.01)
    assert trapezoid(curve, grid) == pytest.approx(2.0, rel=1e-3)


class TestSpectralFunction:
    def test_integrate(self) -> None:
        grid = np.linspace(0.0, 2.0, 5)
        assert SpectralFunction(grid, np.ones(5)).integrate() == pytest.approx(2.0)

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ValueError):
            SpectralFunction(np.linspace(0.0, 1.0, 3), np.ones(4))
