"""Lorentzian line shapes, frequency grids and sampled spectral functions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
import numpy.typing as npt
from scipy.integrate import trapezoid

from .util import chunked

FloatArray = npt.NDArray[np.float64]
ArrayLike = Union[float, FloatArray]

# Grid policy defaults.
DEFAULT_POINTS = 20001
DEFAULT_MARGIN = 100.0

_CHUNK = 256


def lorentzian(x: ArrayLike, center: ArrayLike, gamma: float) -> FloatArray:
    """Unit-area Lorentzian (γ/π)/((x − x₀)² + γ²), broadcast over inputs."""
    dx = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    return np.asarray((gamma / np.pi) / (dx * dx + gamma * gamma))


@dataclass(frozen=True)
class Lorentzian:
    center: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError(f"half-width must be positive, got {self.gamma}")

    def __call__(self, x: ArrayLike) -> FloatArray:
        return lorentzian(x, self.center, self.gamma)


def check_grid(grid: npt.ArrayLike) -> FloatArray:
    """Return grid as a float array, rejecting empty or unsorted grids."""
    values = np.asarray(grid, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("frequency grid must be a non-empty 1-d array")
    if values.size > 1 and not np.all(np.diff(values) > 0):
        raise ValueError("frequency grid must be strictly increasing")
    return values


def uniform_grid(omega_min: float, omega_max: float, points: int) -> FloatArray:
    if points < 2:
        raise ValueError("a grid needs at least two points")
    if not omega_max > omega_min:
        raise ValueError("omega_max must exceed omega_min")
    return np.linspace(omega_min, omega_max, points)


def default_grid(
    centers: npt.ArrayLike,
    gamma: float,
    points: int = DEFAULT_POINTS,
    margin: float = DEFAULT_MARGIN,
) -> FloatArray:
    """Uniform grid covering all centers plus margin half-widths on each side."""
    c = np.asarray(centers, dtype=float)
    if c.size == 0:
        raise ValueError("cannot place a grid around zero centers")
    return uniform_grid(c.min() - margin * gamma, c.max() + margin * gamma, points)


def trapezoid_weights(grid: FloatArray) -> FloatArray:
    """Quadrature weights q with q @ f equal to the trapezoid integral of f."""
    q = np.zeros_like(grid)
    if grid.size < 2:
        return q
    dx = np.diff(grid)
    q[:-1] += dx / 2
    q[1:] += dx / 2
    return q


def broaden(
    positions: FloatArray, weights: FloatArray, grid: FloatArray, gamma: float
) -> FloatArray:
    """Sum of weighted unit-area Lorentzians evaluated on grid."""
    out = np.zeros_like(grid)
    for start, stop in chunked(positions.size, _CHUNK):
        block = lorentzian(grid[None, :], positions[start:stop, None], gamma)
        out += weights[start:stop] @ block
    return out


@dataclass(frozen=True)
class SpectralFunction:
    """Values sampled on a strictly increasing frequency grid."""

    frequencies: FloatArray
    values: npt.NDArray[np.generic]

    def __post_init__(self) -> None:
        check_grid(self.frequencies)
        if np.shape(self.values) != np.shape(self.frequencies):
            raise ValueError("values and frequencies differ in shape")

    def integrate(self) -> float:
        return float(np.real(trapezoid(self.values, self.frequencies)))

