"""Phonon-sector blocks of the polariton Hamiltonian and their linear response."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .lineshape import FloatArray, SpectralFunction, check_grid
from .util import chunked
from .vibronic import VibronicCouplingMatrix, symmetric_eigh, fix_signs

ComplexArray = npt.NDArray[np.complex128]

# A sector is the multiset of basis indices (all > 0) carried by ground-state
# molecules; () is the phonon vacuum, (i,) one phonon state i, (i, j) two.
Sector = Tuple[int, ...]

_CHUNK = 64


@dataclass(frozen=True)
class CavityModel:
    omega_c: float
    omega_0: float
    g_sqrt_n: float
    n_molecules: int
    kappa: float
    gamma_xi: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.g_sqrt_n >= 0:
            raise ValueError(f"collective coupling must be >= 0, got {self.g_sqrt_n}")
        if self.n_molecules < 1:
            raise ValueError(f"need at least one molecule, got {self.n_molecules}")
        if not self.kappa > 0:
            raise ValueError(f"cavity linewidth must be positive, got {self.kappa}")
        if self.gamma_xi is not None and not self.gamma_xi > 0:
            raise ValueError(
                f"eigenstate broadening must be positive, got {self.gamma_xi}"
            )

    @property
    def g(self) -> float:
        """Single-molecule coupling."""
        return self.g_sqrt_n / math.sqrt(self.n_molecules)

    @property
    def detuning(self) -> float:
        return self.omega_c - self.omega_0

    @property
    def broadening(self) -> float:
        """Uniform eigenstate half-width γ_ξ, κ/2 unless overridden."""
        return self.kappa / 2 if self.gamma_xi is None else self.gamma_xi

    def with_molecules(self, n_molecules: int) -> CavityModel:
        """Same collective coupling g√N, different N."""
        return replace(self, n_molecules=n_molecules)

    def sector_coupling(self, n_phonon_molecules: int) -> float:
        if n_phonon_molecules > self.n_molecules:
            raise ValueError(
                f"{n_phonon_molecules} phonon-carrying molecules "
                f"exceed N={self.n_molecules}"
            )
        return self.g * math.sqrt(self.n_molecules - n_phonon_molecules)


@dataclass(frozen=True)
class PolaritonBlock:
    """Row/column 0 is the photon, 1..m the vibronic states of the exciton."""

    sector: Sector
    matrix: FloatArray
    coupling: float
    phonon_energy: float


def build_block(
    sector: Sequence[int], veg: VibronicCouplingMatrix, cavity: CavityModel
) -> PolaritonBlock:
    label = tuple(sorted(sector))
    m = veg.size
    for j in label:
        if not 0 < j < m:
            raise ValueError(f"sector index {j} outside 1..{m - 1}")
    coupling = cavity.sector_coupling(len(label))
    energy = math.fsum(float(veg.ground_energies[j]) for j in label)
    matrix = np.zeros((m + 1, m + 1))
    matrix[0, 0] = cavity.omega_c + energy
    matrix[1:, 1:] = veg.block + energy * np.eye(m)
    matrix[0, 1] = matrix[1, 0] = coupling
    return PolaritonBlock(label, matrix, coupling, energy)


@dataclass(frozen=True)
class PolaritonEigensystem:
    """Eigenvalues ω_ξ and eigenvectors (columns) of a sector block."""

    eigenvalues: FloatArray
    vectors: FloatArray
    sector: Sector = ()
    coupling: float = 0.0
    phonon_energy: float = 0.0

    @property
    def size(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def photon(self) -> FloatArray:
        """Photon Hopfield coefficients a^(ξ)."""
        return self.vectors[0]

    @property
    def matter(self) -> FloatArray:
        """Matter Hopfield coefficients b^(ξ,i), indexed [i, ξ]."""
        return self.vectors[1:]

    @property
    def photon_weights(self) -> FloatArray:
        return self.photon ** 2


def _tie_break(values: FloatArray, vectors: FloatArray) -> npt.NDArray[np.intp]:
    tol = 1e-12 * max(1.0, float(np.abs(values).max()))
    cluster = np.concatenate([[0], np.cumsum(np.diff(values) > tol)])
    fc_weight = vectors[1] ** 2 if vectors.shape[0] > 1 else np.zeros(values.size)
    return np.lexsort((fc_weight, cluster))


def diagonalize(block: PolaritonBlock) -> PolaritonEigensystem:
    """Full eigendecomposition with ascending eigenvalues.

    Each eigenvector has its largest-magnitude entry positive; degenerate
    eigenvalues are ordered by their weight on the Franck-Condon state.
    """

    matrix = block.matrix
    scale = max(1.0, float(np.abs(matrix).max()))
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-14 * scale):
        raise ValueError("block Hamiltonian is not symmetric")
    values, vectors = symmetric_eigh(matrix)
    vectors = fix_signs(vectors)
    order = _tie_break(values, vectors)
    return PolaritonEigensystem(
        values[order],
        vectors[:, order],
        block.sector,
        block.coupling,
        block.phonon_energy,
    )


@dataclass(frozen=True)
class TCPolaritons:
    """Closed-form polaritons of a single bright exciton and one photon."""

    lower: float
    upper: float
    photon_lower: float
    photon_upper: float
    exciton_lower: float
    exciton_upper: float


def tc_polaritons(cavity: CavityModel) -> TCPolaritons:
    """ω_± = ω_0 + ½(Δ ± √(4g²N + Δ²)) and the matching Hopfield coefficients."""
    delta = cavity.detuning
    rabi = 2 * cavity.g_sqrt_n
    root = math.hypot(rabi, delta)
    lower = cavity.omega_0 + (delta - root) / 2
    upper = cavity.omega_0 + (delta + root) / 2
    if rabi == 0:
        photon_up = delta >= 0
        return TCPolaritons(
            lower,
            upper,
            0.0 if photon_up else 1.0,
            1.0 if photon_up else 0.0,
            1.0 if photon_up else 0.0,
            0.0 if photon_up else 1.0,
        )
    norm_lower = math.hypot(delta - root, rabi)
    norm_upper = math.hypot(delta + root, rabi)
    return TCPolaritons(
        lower,
        upper,
        (delta - root) / norm_lower,
        (delta + root) / norm_upper,
        rabi / norm_lower,
        rabi / norm_upper,
    )


@dataclass(frozen=True)
class LinearResponse:
    """Photon Green's function D^R with absorption A and transmission T."""

    frequencies: FloatArray
    green: ComplexArray
    absorption: Optional[FloatArray] = None
    transmission: Optional[FloatArray] = None

    @property
    def minus_im_green(self) -> FloatArray:
        return -self.green.imag

    def curve(self, values: FloatArray) -> SpectralFunction:
        return SpectralFunction(self.frequencies, values)


def photon_green_function(
    eig: PolaritonEigensystem, gamma: float, grid: npt.ArrayLike
) -> LinearResponse:
    """D^R(ω) = Σ_ξ |a^(ξ)|² / (ω − ω_ξ + iγ)."""
    if not gamma > 0:
        raise ValueError(f"eigenstate broadening must be positive, got {gamma}")
    omega = check_grid(grid)
    weights = eig.photon_weights
    green = np.zeros(omega.size, dtype=complex)
    for start, stop in chunked(eig.size, _CHUNK):
        denominators = omega[None, :] - eig.eigenvalues[start:stop, None] + 1j * gamma
        green += weights[start:stop] @ (1.0 / denominators)
    return LinearResponse(omega, green)


def absorption_transmission(response: LinearResponse, kappa: float) -> LinearResponse:
    """Split κ(−Im D^R) into transmission T = (κ²/4)|D^R|² and absorption A."""
    if not kappa > 0:
        raise ValueError(f"cavity linewidth must be positive, got {kappa}")
    green = response.green
    transmission = (kappa * kappa / 4) * (green.real ** 2 + green.imag ** 2)
    absorption = kappa * (-green.imag) - 2 * transmission
    return replace(response, absorption=absorption, transmission=transmission)


def polariton_response(
    eig: PolaritonEigensystem, cavity: CavityModel, grid: npt.ArrayLike
) -> LinearResponse:
    return absorption_transmission(
        photon_green_function(eig, cavity.broadening, grid), cavity.kappa
    )
