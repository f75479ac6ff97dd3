"""Brute-force checks on a few molecules.

The first-quantized Hamiltonian of N <= 3 molecules is built state by state,
projected onto its permutationally symmetric subspace and compared with the
bosonic Hamiltonian. Explicit eigenstates also certify the relaxation rates.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import scipy.sparse as sparse
from scipy.special import comb

from .bosonic import (
    BosonicHamiltonian,
    FockLabel,
    LightCoupling,
    build_bosonic_hamiltonian,
    fock_basis,
    mixed_sector_basis,
    vibronic_perturbation,
)
from .lineshape import FloatArray, Lorentzian
from .polariton import CavityModel
from .rates import RelaxationVariant, vibrational_relaxation
from .util import only
from .vibronic import VibronicCouplingMatrix, symmetric_eigh

logger = logging.getLogger(__name__)

MAX_MOLECULES = 3
MAX_DIMENSION = 10 ** 6
MAPPING_THRESHOLD = 1e-10
CONSERVATION_THRESHOLD = 1e-14
RELAXATION_THRESHOLD = 1e-6
_PHOTON_FLOOR = 1e-8

# (electronic state, vibrational index) of one molecule
MoleculeState = Tuple[int, int]
CompositeState = Tuple[Tuple[MoleculeState, ...], int]


@dataclass(frozen=True)
class CheckRecord:
    name: str
    measured: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.threshold

    def as_dict(self) -> Dict[str, object]:
        return {
            "check": self.name,
            "measured": self.measured,
            "threshold": self.threshold,
            "passed": self.passed,
        }


Report = Tuple[CheckRecord, ...]


def all_passed(report: Iterable[CheckRecord]) -> bool:
    return all(record.passed for record in report)


@dataclass(frozen=True)
class FirstQuantizedSystem:
    n_molecules: int
    n_vibrational: int
    n_excitations: int
    states: Tuple[CompositeState, ...]
    matrix: sparse.csr_matrix

    @property
    def photon_cutoff(self) -> int:
        return self.n_excitations

    @property
    def full_dimension(self) -> int:
        """Dimension before restricting to the excitation manifold."""
        return (2 * self.n_vibrational) ** self.n_molecules * (self.photon_cutoff + 1)

    @property
    def dimension(self) -> int:
        return len(self.states)


def _manifold_size(m: int, n_molecules: int, n_excitations: int) -> int:
    return sum(
        comb(n_molecules, n_e, exact=True) * m ** n_molecules
        for n_e in range(min(n_molecules, n_excitations) + 1)
    )


def build_first_quantized(
    veg: VibronicCouplingMatrix,
    n_molecules: int,
    n_excitations: int,
    *,
    omega_c: float,
    g: float,
) -> FirstQuantizedSystem:
    """Distinguishable molecules in the manifold photons + excitons = n_excitations."""
    if not 1 <= n_molecules <= MAX_MOLECULES:
        raise ValueError(f"first-quantized systems hold 1..{MAX_MOLECULES} molecules")
    if n_excitations < 0:
        raise ValueError("excitation number must be >= 0")
    m = veg.size
    size = _manifold_size(m, n_molecules, n_excitations)
    if size > MAX_DIMENSION:
        raise ValueError(f"manifold dimension {size} exceeds {MAX_DIMENSION}")

    single = [(e, v) for e in (0, 1) for v in range(m)]
    states: List[CompositeState] = []
    for config in itertools.product(single, repeat=n_molecules):
        photons = n_excitations - sum(e for e, _ in config)
        if photons >= 0:
            states.append((config, photons))
    index = {state: a for a, state in enumerate(states)}

    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []

    def add(row: int, col: int, value: float) -> None:
        rows.append(row)
        cols.append(col)
        data.append(value)

    for a, (config, photons) in enumerate(states):
        energy = omega_c * photons
        for e, v in config:
            energy += veg.excited_energies[v] if e else veg.ground_energies[v]
        add(a, a, energy)
        for p, (e, v) in enumerate(config):
            if e == 1:
                for u in range(m):
                    if u != v and veg.coupling[u, v] != 0:
                        moved = config[:p] + ((1, u),) + config[p + 1 :]
                        add(index[(moved, photons)], a, veg.coupling[u, v])
            elif photons > 0:
                raised = config[:p] + ((1, v),) + config[p + 1 :]
                b = index[(raised, photons - 1)]
                value = g * math.sqrt(photons)
                add(b, a, value)
                add(a, b, value)
    matrix = sparse.coo_matrix((data, (rows, cols)), shape=(len(states),) * 2).tocsr()
    return FirstQuantizedSystem(n_molecules, m, n_excitations, tuple(states), matrix)


def _transposed(state: CompositeState, p: int, q: int) -> CompositeState:
    config, photons = state
    swapped = list(config)
    swapped[p], swapped[q] = swapped[q], swapped[p]
    return tuple(swapped), photons


def permutation_asymmetry(system: FirstQuantizedSystem) -> float:
    """Largest entry change of the Hamiltonian under any label transposition."""
    index = {state: a for a, state in enumerate(system.states)}
    worst = 0.0
    for p, q in itertools.combinations(range(system.n_molecules), 2):
        perm = np.array([index[_transposed(s, p, q)] for s in system.states])
        permuted = system.matrix[perm][:, perm]
        diff = abs(permuted - system.matrix)
        worst = max(worst, float(diff.max()) if diff.nnz else 0.0)
    return worst


def _label_of(state: CompositeState, m: int) -> FockLabel:
    config, photons = state
    ground = [0] * m
    excited = [0] * m
    for e, v in config:
        (excited if e else ground)[v] += 1
    return FockLabel(tuple(ground), tuple(excited), photons)


def symmetrization_count(label: FockLabel) -> int:
    """N!/Π n_i! n'_i!, the number of orderings of one occupation label."""
    count = math.factorial(label.molecules)
    for n in label.ground + label.excited:
        count //= math.factorial(n)
    return count


@dataclass(frozen=True)
class SymmetricSubspace:
    """Columns of `projector` are the symmetrized states, one per label."""

    labels: Tuple[FockLabel, ...]
    projector: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return len(self.labels)


def symmetric_projector(system: FirstQuantizedSystem) -> SymmetricSubspace:
    groups: Dict[FockLabel, List[int]] = defaultdict(list)
    for a, state in enumerate(system.states):
        groups[_label_of(state, system.n_vibrational)].append(a)
    labels = tuple(sorted(groups))
    rows: List[int] = []
    cols: List[int] = []
    data: List[float] = []
    for col, label in enumerate(labels):
        members = groups[label]
        norm = 1.0 / math.sqrt(len(members))
        rows.extend(members)
        cols.extend([col] * len(members))
        data.extend([norm] * len(members))
    projector = sparse.coo_matrix(
        (data, (rows, cols)), shape=(system.dimension, len(labels))
    ).tocsr()
    return SymmetricSubspace(labels, projector)


def verify_mapping(
    system: FirstQuantizedSystem,
    subspace: SymmetricSubspace,
    bosonic: BosonicHamiltonian,
) -> Report:
    """Compare the symmetric-projected and bosonic spectra as sorted multisets."""
    name = (
        f"mapping[N={system.n_molecules},m={system.n_vibrational},"
        f"Nexc={system.n_excitations}]"
    )
    projected = (subspace.projector.T @ system.matrix @ subspace.projector).toarray()
    first = np.linalg.eigvalsh(projected)
    second = np.linalg.eigvalsh(bosonic.dense())
    records = [
        CheckRecord(f"{name}.dimension", float(abs(first.size - second.size)), 0.0)
    ]
    deviation = math.inf
    if first.size == second.size:
        deviation = float(np.abs(first - second).max())
    records.append(
        CheckRecord(f"{name}.spectral_deviation", deviation, MAPPING_THRESHOLD)
    )
    return tuple(records)


def _commutator_norm(matrix: sparse.spmatrix, diagonal: FloatArray) -> float:
    coo = matrix.tocoo()
    values = coo.data * (diagonal[coo.col] - diagonal[coo.row])
    return float(np.sqrt(np.sum(values * values)))


def verify_conservation(
    hamiltonian: BosonicHamiltonian, particles: bool = False
) -> Report:
    """Commutator norms of H with the excitation and molecule number operators.

    With particles set, the particle number of the FC-only light coupling is
    checked as well.
    """

    labels = hamiltonian.labels
    operators = {
        "excitations": np.array([lb.excitations for lb in labels], dtype=float),
        "molecules": np.array([lb.molecules for lb in labels], dtype=float),
    }
    if particles:
        operators["particles"] = np.array([lb.particles for lb in labels], dtype=float)
    return tuple(
        CheckRecord(
            f"conservation.{name}",
            _commutator_norm(hamiltonian.matrix, diagonal),
            CONSERVATION_THRESHOLD,
        )
        for name, diagonal in operators.items()
    )


def fgr_oracle(
    initial: npt.ArrayLike,
    initial_energy: float,
    perturbation: npt.ArrayLike,
    eigenvalues: FloatArray,
    eigenvectors: FloatArray,
    gamma: float,
    final_mask: Optional[npt.NDArray[np.bool_]] = None,
) -> float:
    """2π Σ_f |⟨f|V|i⟩|² L(ω_f; ω_i, γ) over the (masked) eigenstates f."""
    psi = np.asarray(initial, dtype=float)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("initial state is not normalized")
    coupled = perturbation @ psi
    amplitudes = eigenvectors.T @ np.asarray(coupled).ravel()
    terms = amplitudes ** 2 * Lorentzian(initial_energy, gamma)(eigenvalues)
    if final_mask is not None:
        terms = terms[final_mask]
    return 2 * math.pi * math.fsum(terms.tolist())


@dataclass(frozen=True)
class _SectorEigenstates:
    energies: FloatArray
    vectors: FloatArray
    sectors: List[Tuple[int, ...]]
    photon_weights: FloatArray


def _sector_eigenstates(hamiltonian: BosonicHamiltonian) -> _SectorEigenstates:
    dense = hamiltonian.dense()
    dimension = hamiltonian.dimension
    groups: Dict[Tuple[int, ...], List[int]] = defaultdict(list)
    for a, label in enumerate(hamiltonian.labels):
        groups[label.occupation].append(a)
    photon = np.array([lb.photons > 0 for lb in hamiltonian.labels])
    energies = np.empty(dimension)
    vectors = np.zeros((dimension, dimension))
    sectors: List[Tuple[int, ...]] = []
    col = 0
    for occupation in sorted(groups):
        members = groups[occupation]
        values, local = symmetric_eigh(dense[np.ix_(members, members)])
        width = len(members)
        energies[col : col + width] = values
        vectors[np.ix_(members, range(col, col + width))] = local
        sectors.extend([occupation] * width)
        col += width
    weights = (vectors[photon] ** 2).sum(axis=0)
    return _SectorEigenstates(energies, vectors, sectors, weights)


def relaxation_oracle(
    k: int, veg: VibronicCouplingMatrix, cavity: CavityModel
) -> Tuple[float, float]:
    """Relaxation rates from the dark state |D_k⟩ into (upper, lower) polaritons.

    Uses explicit eigenstates of the Hamiltonian without vibronic coupling,
    one occupation sector at a time, and the vibronic coupling as perturbation.
    """

    n = cavity.n_molecules
    m = veg.size
    if n < 2:
        raise ValueError("a dark state needs at least two molecules")
    if not 0 < k < m:
        raise ValueError(f"initial phonon state must be in 1..{m - 1}, got {k}")
    labels = fock_basis(m, n, 1)
    h0 = build_bosonic_hamiltonian(
        labels, veg, cavity.omega_c, cavity.g, vibronic=False
    )
    perturbation = vibronic_perturbation(labels, veg)
    eigen = _sector_eigenstates(h0)

    start = [0] * m
    start[0] = n - 1
    start[k] += 1
    initial_sector = tuple(start)
    dark = only(
        f
        for f, sector in enumerate(eigen.sectors)
        if sector == initial_sector and eigen.photon_weights[f] < _PHOTON_FLOOR
    )
    bare = np.array(
        [cavity.omega_0 + float(np.dot(s, veg.ground_energies)) for s in eigen.sectors]
    )
    polariton = eigen.photon_weights > _PHOTON_FLOOR
    rates = []
    for upper in (True, False):
        side = eigen.energies > bare if upper else eigen.energies < bare
        rates.append(
            fgr_oracle(
                eigen.vectors[:, dark],
                float(eigen.energies[dark]),
                perturbation,
                eigen.energies,
                eigen.vectors,
                cavity.broadening,
                polariton & side,
            )
        )
    return rates[0], rates[1]


def reduced_electronic_density(
    system: FirstQuantizedSystem, state: npt.ArrayLike
) -> FloatArray:
    """Electronic density matrix over the single-exciton site states.

    Vibrations and photons are traced out; components with more or fewer than
    one excited molecule are ignored.
    """
    psi = np.asarray(state, dtype=float)
    environments: Dict[Tuple[Tuple[int, ...], int], FloatArray] = {}
    for a, (config, photons) in enumerate(system.states):
        excited = [p for p, (e, _) in enumerate(config) if e == 1]
        if len(excited) != 1 or psi[a] == 0:
            continue
        key = (tuple(v for _, v in config), photons)
        amplitudes = environments.setdefault(key, np.zeros(system.n_molecules))
        amplitudes[excited[0]] += psi[a]
    rho = np.zeros((system.n_molecules, system.n_molecules))
    for amplitudes in environments.values():
        rho += np.outer(amplitudes, amplitudes)
    return rho


def symmetric_state(subspace: SymmetricSubspace, label: FockLabel) -> FloatArray:
    column = subspace.labels.index(label)
    return np.asarray(subspace.projector[:, column].toarray()).ravel()


# Small sizes that exercise multiple occupation, the √(n+1) factors and the
# two-excitation manifold.
MAPPING_CASES: Sequence[Tuple[int, int, int]] = ((2, 3, 1), (2, 3, 2), (3, 2, 1))
RELAXATION_MOLECULES: Sequence[int] = (2, 5)


def run_oracle_checks(veg: VibronicCouplingMatrix, cavity: CavityModel) -> Report:
    """Mapping, conservation and relaxation checks on the lowest basis states."""
    records: List[CheckRecord] = []
    for n, m, n_exc in MAPPING_CASES:
        small = veg.head(min(m, veg.size))
        g = cavity.g_sqrt_n / math.sqrt(n)
        system = build_first_quantized(small, n, n_exc, omega_c=cavity.omega_c, g=g)
        subspace = symmetric_projector(system)
        bosonic = build_bosonic_hamiltonian(subspace.labels, small, cavity.omega_c, g)
        records.extend(verify_mapping(system, subspace, bosonic))

    small = veg.head(min(3, veg.size))
    mixed = mixed_sector_basis(small.size, (1, 2, 3), (0, 1, 2))
    g = cavity.g_sqrt_n / math.sqrt(3)
    records.extend(
        verify_conservation(build_bosonic_hamiltonian(mixed, small, cavity.omega_c, g))
    )
    fc_only = build_bosonic_hamiltonian(
        mixed, small, cavity.omega_c, g, light=LightCoupling.FRANCK_CONDON
    )
    records.extend(
        r
        for r in verify_conservation(fc_only, particles=True)
        if r.name.endswith("particles")
    )

    small = veg.head(min(4, veg.size))
    if small.size < 2:
        logger.warning("relaxation oracle skipped: basis has a single state")
        return tuple(records)
    for n in RELAXATION_MOLECULES:
        resonant = replace(cavity, omega_c=cavity.omega_0, n_molecules=n)
        closed = vibrational_relaxation(1, small, resonant, RelaxationVariant.FULL4)
        upper, lower = relaxation_oracle(1, small, resonant)
        for branch, brute in (("upper", upper), ("lower", lower)):
            reference = closed.upper.total if branch == "upper" else closed.lower.total
            deviation = abs(brute - reference) / max(abs(reference), 1e-300)
            name = f"relaxation[N={n},{branch}]"
            records.append(CheckRecord(name, deviation, RELAXATION_THRESHOLD))
    return tuple(records)

