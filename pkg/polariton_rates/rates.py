"""Fermi golden rule rates out of the Stokes-shifted and dark exciton states.

All rates are in atomic units. Contributions smaller than TAIL_CUT times the
total are dropped, so `total` always equals the sum of the kept final states.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from .lineshape import (
    FloatArray,
    Lorentzian,
    SpectralFunction,
    broaden,
    lorentzian,
    trapezoid_weights,
)
from .polariton import CavityModel, LinearResponse, PolaritonEigensystem
from .util import chunked
from .vibronic import (
    BareSpectrum,
    StokesShiftedState,
    VibrationalBasis,
    VibronicCouplingMatrix,
)

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int_]

TAIL_CUT = 1e-15
RAMAN_PAIR_CUT = 1e-10
GRID_COVERAGE_TOLERANCE = 1e-6
RATIO_FLOOR = 1e-30
RAMAN_CHANNELS = ("lower_polariton", "upper_polariton", "middle")

_CHUNK = 256


@dataclass(frozen=True)
class RateResult:
    total: float
    label_names: Tuple[str, ...]
    final_states: IntArray
    contributions: FloatArray
    channels: Mapping[str, float] = field(default_factory=dict)
    frequency_resolved: Optional[SpectralFunction] = None
    ratio: Optional[SpectralFunction] = None

    def __len__(self) -> int:
        return int(self.contributions.size)

    def per_final_state(self) -> Iterator[Tuple[str, float]]:
        labels = self.final_states.tolist()
        for label, value in zip(labels, self.contributions.tolist()):
            yield ",".join(f"{n}={i}" for n, i in zip(self.label_names, label)), value

    def records(self) -> List[Tuple[str, float]]:
        """Flat (label, value) pairs: the total followed by each channel."""
        records = [("total", self.total)]
        records.extend(
            (f"channel.{name}", self.channels[name]) for name in sorted(self.channels)
        )
        return records


def _keep(values: FloatArray, total: float) -> npt.NDArray[np.bool_]:
    return values > TAIL_CUT * total


def _result(
    names: Sequence[str],
    labels: IntArray,
    values: FloatArray,
    parts: Optional[Mapping[str, FloatArray]] = None,
    **extra: Optional[SpectralFunction],
) -> RateResult:
    keep = _keep(values, float(values.sum()))
    kept = values[keep]
    channels: Dict[str, float] = {}
    for name, part in (parts or {}).items():
        channels[name] = float(part[keep].sum())
    return RateResult(
        float(kept.sum()),
        tuple(names),
        labels[keep].reshape(-1, len(names)),
        kept,
        channels,
        **extra,
    )


def _base_energies(eig: PolaritonEigensystem) -> FloatArray:
    if len(eig.sector) > 1:
        raise ValueError("rates need a sector-0 or single-phonon eigensystem")
    return eig.eigenvalues - eig.phonon_energy


def radiative_pumping_sum(
    ss: StokesShiftedState, eig: PolaritonEigensystem, cavity: CavityModel
) -> RateResult:
    """Radiative pumping as a sum over polariton eigenstates and phonon states.

    Passing the eigensystem of a single-phonon block uses its contracted
    coupling g√(N−1) instead of the sector-0 approximation.

    Final states are labelled by (xi, j).
    """

    m = ss.coefficients.size
    if eig.matter.shape[0] != m:
        raise ValueError(
            f"eigensystem has {eig.matter.shape[0]} matter states, basis has {m}"
        )
    gamma = cavity.broadening
    energies = _base_energies(eig)
    positions = ss.energy - ss.ground_energies[1:]
    matrix = (
        2
        * math.pi
        * cavity.g ** 2
        * eig.photon_weights[:, None]
        * ss.weights[None, 1:]
        * lorentzian(energies[:, None], positions[None, :], gamma)
    )
    keep = _keep(matrix, float(matrix.sum()))
    xi, j = np.nonzero(keep)
    labels = np.stack([xi, j + 1], axis=1)
    values = matrix[keep]
    return RateResult(float(values.sum()), ("xi", "j"), labels, values)


@dataclass(frozen=True)
class _Overlap:
    labels: IntArray
    absorbed: FloatArray
    transmitted: FloatArray
    absorbed_curve: Optional[FloatArray]
    transmitted_curve: Optional[FloatArray]


def _overlap(
    emission: BareSpectrum,
    response: LinearResponse,
    cavity: CavityModel,
    use_sticks: bool,
) -> _Overlap:
    if response.absorption is None or response.transmission is None:
        raise ValueError("linear response lacks absorption and transmission")
    grid = response.frequencies
    absorption = np.clip(response.absorption, 0.0, None)
    transmission = 2 * response.transmission
    prefactor = 2 * cavity.g ** 2 / cavity.kappa

    positions, weights = emission.frequencies, emission.weights
    inside = (positions >= grid[0]) & (positions <= grid[-1])
    outside = float(weights[~inside].sum())
    if outside > GRID_COVERAGE_TOLERANCE * max(float(weights.sum()), 1e-300):
        raise ValueError(
            f"emission weight {outside:.3g} lies outside the frequency grid "
            f"[{grid[0]:.6g}, {grid[-1]:.6g}]"
        )
    positions, weights = positions[inside], weights[inside]
    labels = emission.states[inside].reshape(-1, 1)

    if use_sticks:
        absorbed = prefactor * weights * np.interp(positions, grid, absorption)
        transmitted = prefactor * weights * np.interp(positions, grid, transmission)
        return _Overlap(labels, absorbed, transmitted, None, None)

    q = trapezoid_weights(grid)
    absorbed = np.empty_like(weights)
    transmitted = np.empty_like(weights)
    for start, stop in chunked(positions.size, _CHUNK):
        shapes = lorentzian(grid[None, :], positions[start:stop, None], emission.gamma)
        absorbed[start:stop] = shapes @ (q * absorption)
        transmitted[start:stop] = shapes @ (q * transmission)
    absorbed *= prefactor * weights
    transmitted *= prefactor * weights
    sigma = broaden(positions, weights, grid, emission.gamma)
    return _Overlap(
        labels,
        absorbed,
        transmitted,
        prefactor * sigma * absorption,
        prefactor * sigma * transmission,
    )


def radiative_pumping_overlap(
    emission: BareSpectrum,
    response: LinearResponse,
    cavity: CavityModel,
    use_sticks: bool = True,
) -> RateResult:
    """Radiative pumping as the overlap of bare emission with A + 2T.

    With use_sticks the emission is taken as its stick spectrum and A + 2T is
    interpolated at each stick. Otherwise the Lorentzian-broadened emission
    is integrated over the response grid, which also yields Γ_rp(ω).
    """

    parts = _overlap(emission, response, cavity, use_sticks)
    curve = None
    if parts.absorbed_curve is not None and parts.transmitted_curve is not None:
        curve = response.curve(parts.absorbed_curve + parts.transmitted_curve)
    return _result(
        ("j",),
        parts.labels,
        parts.absorbed + parts.transmitted,
        {"reabsorbed": parts.absorbed, "transmitted": parts.transmitted},
        frequency_resolved=curve,
    )


def recycling_rate(
    emission: BareSpectrum,
    response: LinearResponse,
    cavity: CavityModel,
    use_sticks: bool = True,
) -> RateResult:
    """Polariton-assisted photon recycling, the reabsorbed share of pumping.

    The ratio curve A/(2T) is returned wherever T exceeds RATIO_FLOOR.
    """

    parts = _overlap(emission, response, cavity, use_sticks)
    curve = None
    if parts.absorbed_curve is not None:
        curve = response.curve(parts.absorbed_curve)
    assert response.absorption is not None and response.transmission is not None
    mask = response.transmission > RATIO_FLOOR
    ratio = None
    if mask.any():
        ratio = SpectralFunction(
            response.frequencies[mask],
            np.clip(response.absorption[mask], 0.0, None)
            / (2 * response.transmission[mask]),
        )
    return _result(
        ("j",),
        parts.labels,
        parts.absorbed,
        {"reabsorbed": parts.absorbed},
        frequency_resolved=curve,
        ratio=ratio,
    )


class RelaxationVariant(enum.Enum):
    FULL4 = "full4"
    REDUCED2 = "reduced2"
    LITINSKAYA = "litinskaya"


# Term codes used as the first label of vibrational-relaxation final states.
RECURRENCE, FIRST_ORDER, SECOND_ORDER, SAME_STATE = range(4)
_TERM_NAMES = {
    RECURRENCE: "recurrence",
    FIRST_ORDER: "first_order",
    SECOND_ORDER: "second_order",
    SAME_STATE: "same_state",
}


@dataclass(frozen=True)
class RelaxationRates:
    upper: RateResult
    lower: RateResult

    def branch(self, sign: int) -> RateResult:
        return self.upper if sign > 0 else self.lower


def _relaxation_terms(
    k: int,
    veg: VibronicCouplingMatrix,
    cavity: CavityModel,
    variant: RelaxationVariant,
    sign: int,
) -> RateResult:
    n = cavity.n_molecules
    split = sign * cavity.g_sqrt_n
    line = Lorentzian(0.0, cavity.broadening)
    v = veg.coupling
    e = veg.ground_energies
    m = veg.size

    terms: List[Tuple[int, IntArray, FloatArray]] = []
    if variant is RelaxationVariant.LITINSKAYA:
        # single-quantum states are exactly those coupled to the FC state
        modes = np.nonzero(v[0, 1:])[0] + 1
        values = (
            2 * math.pi * (n - 1) / (2 * n * n)
            * v[modes, 0] ** 2
            * line(e[modes] + split)
        )
        terms.append((FIRST_ORDER, modes, values))
    else:
        others = np.array([i for i in range(1, m) if i != k], dtype=int)
        terms.append(
            (
                FIRST_ORDER,
                others,
                2 * math.pi * (n - 1) / (2 * n * n)
                * v[others, k] ** 2
                * line(e[others] - e[k] + split),
            )
        )
        terms.append(
            (
                SECOND_ORDER,
                others,
                2 * math.pi / (2 * n * n)
                * v[others, 0] ** 2
                * line(e[others] + split),
            )
        )
        if variant is RelaxationVariant.FULL4:
            terms.insert(
                0,
                (
                    RECURRENCE,
                    np.array([0]),
                    np.array(
                        [
                            2 * math.pi * (n - 1) / n * 0.5
                            * v[0, k] ** 2
                            * float(line(e[0] - e[k] + split))
                        ]
                    ),
                ),
            )
            terms.append(
                (
                    SAME_STATE,
                    np.array([k]),
                    np.array(
                        [
                            2 * math.pi / (n * n)
                            * v[k, 0] ** 2
                            * float(line(e[k] + split))
                        ]
                    ),
                )
            )

    labels = np.concatenate(
        [np.stack([np.full(idx.size, code), idx], axis=1) for code, idx, _ in terms]
    ).astype(int)
    values = np.concatenate([vals for _, _, vals in terms])
    parts = {
        _TERM_NAMES[code]: np.where(labels[:, 0] == code, values, 0.0)
        for code, _, _ in terms
    }
    return _result(("term", "i"), labels, values, parts)


def vibrational_relaxation(
    k: int,
    veg: VibronicCouplingMatrix,
    cavity: CavityModel,
    variant: RelaxationVariant = RelaxationVariant.REDUCED2,
) -> RelaxationRates:
    """Relaxation from the dark state with one phonon in state k into the polaritons.

    Requires zero detuning. Channels are named after the pathways:
    `first_order` and `second_order` in g, plus `recurrence` and
    `same_state` for the full four-term form.
    """

    if not 0 < k < veg.size:
        raise ValueError(f"initial phonon state must be in 1..{veg.size - 1}, got {k}")
    scale = max(1.0, abs(cavity.omega_0))
    if abs(cavity.detuning) > 1e-12 * scale:
        raise ValueError(
            f"vibrational relaxation needs zero detuning, got {cavity.detuning:.6g}"
        )
    return RelaxationRates(
        _relaxation_terms(k, veg, cavity, variant, +1),
        _relaxation_terms(k, veg, cavity, variant, -1),
    )


def _raman_pairs(weights: FloatArray) -> Tuple[IntArray, IntArray]:
    m = weights.size
    i, j = np.tril_indices(m - 1)
    i, j = i + 1, j + 1
    active = weights > RAMAN_PAIR_CUT
    keep = active[i] | active[j]
    return i[keep], j[keep]


def raman_scattering(
    ss: StokesShiftedState,
    eig: PolaritonEigensystem,
    basis: VibrationalBasis,
    cavity: CavityModel,
) -> RateResult:
    """Polariton-assisted Raman scattering into two phonon-carrying molecules.

    Final states (xi, i, j) with i >= j > 0; pairs where neither phonon state
    carries Stokes-shifted weight above RAMAN_PAIR_CUT are skipped. The
    channels split the final eigenstate xi into the lower polariton (the
    lowest eigenstate), the upper polariton (the highest) and the states
    between them.
    """

    m = basis.size
    if ss.coefficients.size != m or eig.matter.shape[0] != m:
        raise ValueError("basis, Stokes-shifted state and eigensystem differ in size")
    if eig.sector:
        raise ValueError("Raman scattering needs the sector-0 eigensystem")
    gamma = cavity.broadening
    energies = eig.eigenvalues
    a = eig.photon
    c = ss.coefficients
    e = basis.energies

    # G[j, i] = Σ_ξ b^(ξ,j) a^(ξ) / (ω_ξ − (ω_ss − ω_g,i) + iγ)
    z = 1.0 / (energies[:, None] - (ss.energy - e[None, :]) + 1j * gamma)
    green = eig.matter @ (a[:, None] * z)

    i, j = _raman_pairs(ss.weights)
    amplitude = c[i] * green[j, i] + c[j] * green[i, j]
    diagonal = i == j
    d = i[diagonal]
    amplitude[diagonal] = math.sqrt(2) * c[d] * green[d, d]
    strength = 2 * math.pi * cavity.g ** 4 * np.abs(amplitude) ** 2
    pair_energy = e[i] + e[j]
    photon_weights = eig.photon_weights
    conserve = Lorentzian(ss.energy, gamma)

    def block(start: int, stop: int) -> FloatArray:
        final = energies[:, None] + pair_energy[None, start:stop]
        shapes = conserve(final)
        return photon_weights[:, None] * shapes * strength[None, start:stop]

    total = math.fsum(float(block(s, t).sum()) for s, t in chunked(i.size, _CHUNK))
    labels: List[IntArray] = []
    values: List[FloatArray] = []
    for start, stop in chunked(i.size, _CHUNK):
        contributions = block(start, stop)
        xi, p = np.nonzero(_keep(contributions, total))
        labels.append(np.stack([xi, i[start + p], j[start + p]], axis=1))
        values.append(contributions[xi, p])
    if not values:
        empty = {name: 0.0 for name in RAMAN_CHANNELS}
        return RateResult(
            0.0, ("xi", "i", "j"), np.zeros((0, 3), dtype=int), np.zeros(0), empty
        )
    kept = np.concatenate(values)
    states = np.concatenate(labels)
    logger.debug(
        "Raman scattering kept %d of %d final states",
        kept.size,
        energies.size * i.size,
    )
    xi = states[:, 0]
    lower, upper = xi == 0, xi == energies.size - 1
    channels = {
        "lower_polariton": float(kept[lower].sum()),
        "upper_polariton": float(kept[upper].sum()),
        "middle": float(kept[~(lower | upper)].sum()),
    }
    return RateResult(float(kept.sum()), ("xi", "i", "j"), states, kept, channels)
