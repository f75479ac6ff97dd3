"""Single-molecule vibronic structure of the multi-mode linear vibronic model."""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, eigh

from .errors import ConvergenceError
from .lineshape import FloatArray, SpectralFunction, broaden, check_grid

logger = logging.getLogger(__name__)

Occupation = Tuple[int, ...]

DEFAULT_GAMMA_MOL = 0.0015
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class VibrationalMode:
    frequency: float
    huang_rhys: float
    n_max: int

    def __post_init__(self) -> None:
        if not self.frequency > 0:
            raise ValueError(f"mode frequency must be positive, got {self.frequency}")
        if not self.huang_rhys >= 0:
            raise ValueError(f"Huang-Rhys factor must be >= 0, got {self.huang_rhys}")
        if self.n_max < 0:
            raise ValueError(f"per-mode cap must be >= 0, got {self.n_max}")

    @classmethod
    def from_sqrt_s(
        cls, frequency: float, sqrt_s: float, n_max: int
    ) -> VibrationalMode:
        return cls(frequency, sqrt_s * sqrt_s, n_max)

    @property
    def sqrt_s(self) -> float:
        return math.sqrt(self.huang_rhys)


@dataclass(frozen=True)
class MoleculeModel:
    """Electronic gap ω_0 plus linearly displaced harmonic modes.

    The total quanta cap defaults to the sum of the per-mode caps.
    """

    electronic_gap: float
    modes: Tuple[VibrationalMode, ...]
    total_quanta_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.total_quanta_cap is not None and self.total_quanta_cap < 0:
            raise ValueError("total quanta cap must be >= 0")

    @property
    def quanta_cap(self) -> int:
        if self.total_quanta_cap is None:
            return sum(mode.n_max for mode in self.modes)
        return self.total_quanta_cap

    @property
    def reorganization_energy(self) -> float:
        return sum(mode.frequency * mode.huang_rhys for mode in self.modes)

    def with_caps(
        self, n_max: Sequence[int], total_quanta_cap: Optional[int]
    ) -> MoleculeModel:
        if len(n_max) != len(self.modes):
            raise ValueError("one cap per mode required")
        modes = tuple(replace(mode, n_max=n) for mode, n in zip(self.modes, n_max))
        return replace(self, modes=modes, total_quanta_cap=total_quanta_cap)


def vertical_resonance_frequency(molecule: MoleculeModel) -> float:
    """Cavity frequency ω_0 + Σ ω_ν s of the vertical-resonance convention."""
    return molecule.electronic_gap + molecule.reorganization_energy


@dataclass(frozen=True)
class VibrationalBasis:
    states: Tuple[Occupation, ...]
    energies: FloatArray

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n_modes(self) -> int:
        return len(self.states[0])

    def index(self) -> Dict[Occupation, int]:
        return {state: i for i, state in enumerate(self.states)}

    def head(self, m: int) -> VibrationalBasis:
        """The lowest m states, still canonically ordered."""
        if not 1 <= m <= self.size:
            raise ValueError(f"cannot keep {m} of {self.size} states")
        return VibrationalBasis(self.states[:m], self.energies[:m].copy())


def count_states(molecule: MoleculeModel) -> int:
    """Number of occupation tuples allowed by the caps."""
    cap = molecule.quanta_cap
    counts = [1] + [0] * cap
    for mode in molecule.modes:
        new = [0] * (cap + 1)
        for total, c in enumerate(counts):
            if c == 0:
                continue
            for n in range(min(mode.n_max, cap - total) + 1):
                new[total + n] += c
        counts = new
    return sum(counts) if molecule.modes else 0


def _energy(state: Occupation, frequencies: Sequence[float]) -> float:
    return math.fsum(n * w for n, w in zip(state, frequencies))


def enumerate_basis(molecule: MoleculeModel) -> VibrationalBasis:
    """All occupation tuples within the caps, ordered by energy then tuple.

    Index 0 is the all-zeros tuple with energy 0.
    """

    if not molecule.modes:
        raise ValueError("molecule has no vibrational modes")
    cap = molecule.quanta_cap
    frequencies = [mode.frequency for mode in molecule.modes]
    ranges = [range(mode.n_max + 1) for mode in molecule.modes]
    states = [s for s in itertools.product(*ranges) if sum(s) <= cap]
    if not states:
        raise ValueError("basis caps admit no states")
    keyed = sorted((_energy(s, frequencies), s) for s in states)
    return VibrationalBasis(
        tuple(s for _, s in keyed), np.array([e for e, _ in keyed], dtype=float)
    )


@dataclass(frozen=True)
class VibronicCouplingMatrix:
    """Excited-state vibronic block in the ground-state vibrational basis.

    `coupling` holds the off-diagonal V_eg,ij (zero diagonal),
    `excited_energies` the diagonal ω_e,i.
    """

    coupling: FloatArray
    excited_energies: FloatArray
    ground_energies: FloatArray

    @property
    def size(self) -> int:
        return int(self.excited_energies.size)

    @property
    def block(self) -> FloatArray:
        return np.diag(self.excited_energies) + self.coupling

    def head(self, m: int) -> VibronicCouplingMatrix:
        return VibronicCouplingMatrix(
            self.coupling[:m, :m].copy(),
            self.excited_energies[:m].copy(),
            self.ground_energies[:m].copy(),
        )


def build_veg(
    basis: VibrationalBasis, molecule: MoleculeModel
) -> VibronicCouplingMatrix:
    if basis.n_modes != len(molecule.modes):
        raise ValueError(
            f"basis has {basis.n_modes} modes, molecule has {len(molecule.modes)}"
        )
    m = basis.size
    index = basis.index()
    coupling = np.zeros((m, m))
    for i, state in enumerate(basis.states):
        for k, mode in enumerate(molecule.modes):
            if mode.huang_rhys == 0:
                continue
            raised = state[:k] + (state[k] + 1,) + state[k + 1 :]
            j = index.get(raised)
            if j is None:
                continue
            value = mode.frequency * mode.sqrt_s * math.sqrt(state[k] + 1)
            coupling[i, j] = coupling[j, i] = value
    return VibronicCouplingMatrix(
        coupling, basis.energies + molecule.electronic_gap, basis.energies.copy()
    )


def _symmetric_block(veg: VibronicCouplingMatrix) -> FloatArray:
    block = veg.block
    tolerance = 1e-14 * max(1.0, np.abs(block).max())
    if not np.allclose(block, block.T, rtol=0.0, atol=tolerance):
        raise ValueError("vibronic block is not symmetric")
    return block


def symmetric_eigh(
    matrix: FloatArray, **kwargs: object
) -> Tuple[FloatArray, FloatArray]:
    try:
        return eigh(matrix, **kwargs)  # type: ignore[no-any-return]
    except LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc


def fix_signs(vectors: FloatArray) -> FloatArray:
    """Flip eigenvector columns so their largest-magnitude entry is positive."""
    pivots = np.abs(vectors).argmax(axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass(frozen=True)
class StokesShiftedState:
    """Lowest eigenstate of the excited vibronic block."""

    coefficients: FloatArray
    energy: float
    ground_energies: FloatArray

    @property
    def weights(self) -> FloatArray:
        return self.coefficients * self.coefficients

    @property
    def fc_leak(self) -> float:
        """Weight left on the Franck-Condon state."""
        return float(self.coefficients[0] ** 2)


def stokes_shifted_state(veg: VibronicCouplingMatrix) -> StokesShiftedState:
    block = _symmetric_block(veg)
    values, vectors = symmetric_eigh(block, subset_by_index=[0, 0])
    vector = fix_signs(vectors)[:, 0]
    vector = vector / np.linalg.norm(vector)
    return StokesShiftedState(vector, float(values[0]), veg.ground_energies.copy())


class Prefactor(enum.Enum):
    UNIT = "unit"
    ENSEMBLE = "ng2"


@dataclass(frozen=True)
class BareSpectrum:
    """Stick spectrum with an optional Lorentzian-broadened curve.

    `states` labels each stick: the basis index for emission, the
    eigenstate index for absorption.
    """

    frequencies: FloatArray
    weights: FloatArray
    states: npt.NDArray[np.int_]
    gamma: float
    broadened: Optional[SpectralFunction] = None

    def total_weight(self) -> float:
        return float(self.weights.sum())

    def sticks(self) -> Iterable[Tuple[float, float]]:
        return zip(self.frequencies.tolist(), self.weights.tolist())


def _broadened(
    positions: FloatArray,
    weights: FloatArray,
    gamma: float,
    grid: Optional[npt.ArrayLike],
) -> Optional[SpectralFunction]:
    if not gamma > 0:
        raise ValueError(f"line width must be positive, got {gamma}")
    if grid is None:
        return None
    g = check_grid(grid)
    return SpectralFunction(g, broaden(positions, weights, g, gamma))


def bare_emission(
    ss: StokesShiftedState,
    basis: VibrationalBasis,
    gamma_mol: float = DEFAULT_GAMMA_MOL,
    grid: Optional[npt.ArrayLike] = None,
    *,
    include_fc: bool = False,
) -> BareSpectrum:
    """Emission sticks at ω_ss − ω_g,j with weights |c^(j)|².

    The Franck-Condon state (j = 0) is left out unless include_fc is set.
    """

    if basis.size != ss.coefficients.size:
        raise ValueError("Stokes-shifted state and basis differ in size")
    first = 0 if include_fc else 1
    states = np.arange(first, basis.size)
    positions = ss.energy - basis.energies[first:]
    weights = ss.weights[first:].copy()
    broadened = _broadened(positions, weights, gamma_mol, grid)
    return BareSpectrum(positions, weights, states, gamma_mol, broadened)


def bare_absorption(
    veg: VibronicCouplingMatrix,
    gamma_mol: float = DEFAULT_GAMMA_MOL,
    grid: Optional[npt.ArrayLike] = None,
    prefactor: Prefactor = Prefactor.UNIT,
    g_sqrt_n: Optional[float] = None,
) -> BareSpectrum:
    """Absorption sticks at the excited eigenvalues, weighted by FC overlap.

    With Prefactor.ENSEMBLE the unit-normalized weights are multiplied by
    πNg², which needs the collective coupling g_sqrt_n.
    """

    block = _symmetric_block(veg)
    values, vectors = symmetric_eigh(block)
    weights = vectors[0, :] ** 2
    weights = weights / weights.sum()
    if prefactor is Prefactor.ENSEMBLE:
        if g_sqrt_n is None:
            raise ValueError("ensemble prefactor needs the collective coupling")
        weights = weights * math.pi * g_sqrt_n ** 2
    states = np.arange(values.size)
    return BareSpectrum(
        values, weights, states, gamma_mol, _broadened(values, weights, gamma_mol, grid)
    )


@dataclass(frozen=True)
class PreparedMolecule:
    """A molecule with its basis, coupling matrix and Stokes-shifted state.

    `converged` is None when the caps were taken as given and never checked.
    """

    molecule: MoleculeModel
    basis: VibrationalBasis
    veg: VibronicCouplingMatrix
    stokes_shifted: StokesShiftedState
    converged: Optional[bool] = None
    rounds: int = 1


def prepare_molecule(molecule: MoleculeModel) -> PreparedMolecule:
    """Build basis, coupling matrix and Stokes-shifted state at fixed caps."""
    basis = enumerate_basis(molecule)
    veg = build_veg(basis, molecule)
    return PreparedMolecule(molecule, basis, veg, stokes_shifted_state(veg))


def _weight_map(prepared: PreparedMolecule) -> Dict[Occupation, float]:
    weights = prepared.stokes_shifted.weights
    return {s: float(w) for s, w in zip(prepared.basis.states, weights)}


def _grown(molecule: MoleculeModel) -> MoleculeModel:
    increments = [
        max(2, math.ceil(mode.n_max / 4)) if mode.huang_rhys > 0 else 0
        for mode in molecule.modes
    ]
    n_max = [mode.n_max + inc for mode, inc in zip(molecule.modes, increments)]
    total = molecule.total_quanta_cap
    if total is not None:
        total += sum(increments)
    return molecule.with_caps(n_max, total)


def converge_basis(
    molecule: MoleculeModel,
    epsilon: float = DEFAULT_EPSILON,
    max_rounds: int = 20,
    max_states: int = 20000,
) -> PreparedMolecule:
    """Grow the caps until no Stokes-shifted weight moves by epsilon or more."""
    current = prepare_molecule(molecule)
    for rounds in range(2, max_rounds + 1):
        candidate = _grown(current.molecule)
        size = count_states(candidate)
        if size > max_states:
            logger.warning(
                "basis growth stopped at %d states, next round needs %d",
                current.basis.size,
                size,
            )
            return replace(current, converged=False, rounds=rounds - 1)
        grown = prepare_molecule(candidate)
        old, new = _weight_map(current), _weight_map(grown)
        change = max(
            abs(new.get(s, 0.0) - old.get(s, 0.0)) for s in set(old) | set(new)
        )
        logger.info(
            "basis round %d: m=%d, weight change %.3g", rounds, grown.basis.size, change
        )
        if change < epsilon:
            return replace(grown, converged=True, rounds=rounds)
        current = grown
    logger.warning("basis did not converge within %d rounds", max_rounds)
    return replace(current, converged=False, rounds=max_rounds)
