"""Occupation-number Hamiltonian of N identical molecules in one cavity mode.

A Fock label counts ground-state molecules per vibrational state, excited
molecules per vibronic state, and photons.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sparse
from scipy.special import comb

from .lineshape import FloatArray
from .vibronic import VibronicCouplingMatrix


@dataclass(frozen=True, order=True)
class FockLabel:
    ground: Tuple[int, ...]
    excited: Tuple[int, ...]
    photons: int

    @property
    def molecules(self) -> int:
        return sum(self.ground) + sum(self.excited)

    @property
    def excitations(self) -> int:
        return sum(self.excited) + self.photons

    @property
    def occupation(self) -> Tuple[int, ...]:
        """Molecules per vibrational state, regardless of electronic state."""
        return tuple(g + e for g, e in zip(self.ground, self.excited))

    @property
    def particles(self) -> int:
        """Photons, excitons and ground-state phonon carriers."""
        return self.photons + sum(self.excited) + sum(self.ground[1:])


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def fock_basis(m: int, n_molecules: int, n_excitations: int) -> List[FockLabel]:
    """All labels with the given molecule and excitation numbers, sorted."""
    labels = []
    for photons in range(n_excitations + 1):
        n_excited = n_excitations - photons
        if n_excited > n_molecules:
            continue
        for excited in _compositions(n_excited, m):
            for ground in _compositions(n_molecules - n_excited, m):
                labels.append(FockLabel(ground, excited, photons))
    return sorted(labels)


def mixed_sector_basis(
    m: int, molecules: Iterable[int], excitations: Iterable[int]
) -> List[FockLabel]:
    excitations = list(excitations)
    labels = set()
    for n in molecules:
        for n_exc in excitations:
            labels.update(fock_basis(m, n, n_exc))
    return sorted(labels)


def count_fock_states(m: int, n_molecules: int, n_excitations: int) -> int:
    """Stars-and-bars count of fock_basis(m, n_molecules, n_excitations)."""
    total = 0
    for n_excited in range(min(n_excitations, n_molecules) + 1):
        total += comb(n_excited + m - 1, m - 1, exact=True) * comb(
            n_molecules - n_excited + m - 1, m - 1, exact=True
        )
    return total


class LightCoupling(enum.Enum):
    ALL = "all"
    FRANCK_CONDON = "fc"


@dataclass(frozen=True)
class BosonicHamiltonian:
    labels: Tuple[FockLabel, ...]
    matrix: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def index(self) -> Dict[FockLabel, int]:
        return {label: a for a, label in enumerate(self.labels)}

    def dense(self) -> FloatArray:
        return np.asarray(self.matrix.toarray())


def _shifted(occupations: Tuple[int, ...], i: int, delta: int) -> Tuple[int, ...]:
    return occupations[:i] + (occupations[i] + delta,) + occupations[i + 1 :]


class _Entries:
    def __init__(self, index: Dict[FockLabel, int]) -> None:
        self.index = index
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.data: List[float] = []

    def add(
        self, target: FockLabel, source: int, value: float, symmetric: bool = False
    ) -> None:
        row = self.index.get(target)
        if row is None or value == 0:
            return
        self.rows.append(row)
        self.cols.append(source)
        self.data.append(value)
        if symmetric:
            self.rows.append(source)
            self.cols.append(row)
            self.data.append(value)

    def matrix(self, dimension: int) -> sparse.csr_matrix:
        return sparse.coo_matrix(
            (self.data, (self.rows, self.cols)), shape=(dimension, dimension)
        ).tocsr()


def _vibronic_entries(
    entries: _Entries, labels: Sequence[FockLabel], coupling: FloatArray
) -> None:
    m = coupling.shape[0]
    for a, label in enumerate(labels):
        for j in range(m):
            if label.excited[j] == 0:
                continue
            lowered = _shifted(label.excited, j, -1)
            for i in range(m):
                if i == j or coupling[i, j] == 0:
                    continue
                excited = _shifted(lowered, i, +1)
                value = coupling[i, j] * math.sqrt(label.excited[j] * excited[i])
                entries.add(FockLabel(label.ground, excited, label.photons), a, value)


def build_bosonic_hamiltonian(
    labels: Sequence[FockLabel],
    veg: VibronicCouplingMatrix,
    omega_c: float,
    g: float,
    *,
    vibronic: bool = True,
    light: LightCoupling = LightCoupling.ALL,
) -> BosonicHamiltonian:
    """Assemble the bosonic Hamiltonian on the given labels.

    :param vibronic: include the excited-state vibronic coupling Σ V_ij B†_i B_j
    :param light: couple the photon to every vibronic state (Condon) or only
        to the Franck-Condon state
    """

    labels = tuple(labels)
    index = {label: a for a, label in enumerate(labels)}
    entries = _Entries(index)
    m = veg.size
    for a, label in enumerate(labels):
        if len(label.ground) != m:
            raise ValueError(f"label {label} does not match {m} vibrational states")
        energy = (
            omega_c * label.photons
            + float(np.dot(label.ground, veg.ground_energies))
            + float(np.dot(label.excited, veg.excited_energies))
        )
        entries.add(label, a, energy)
        if label.photons == 0:
            continue
        states = range(m) if light is LightCoupling.ALL else range(1)
        for i in states:
            if label.ground[i] == 0:
                continue
            target = FockLabel(
                _shifted(label.ground, i, -1),
                _shifted(label.excited, i, +1),
                label.photons - 1,
            )
            occupation = label.photons * label.ground[i] * (label.excited[i] + 1)
            value = g * math.sqrt(occupation)
            entries.add(target, a, value, symmetric=True)
    if vibronic:
        _vibronic_entries(entries, labels, veg.coupling)
    return BosonicHamiltonian(labels, entries.matrix(len(labels)))


def vibronic_perturbation(
    labels: Sequence[FockLabel], veg: VibronicCouplingMatrix
) -> sparse.csr_matrix:
    """Σ_{i≠j} V_ij B†_i B_j on the given labels."""
    index = {label: a for a, label in enumerate(labels)}
    entries = _Entries(index)
    _vibronic_entries(entries, labels, veg.coupling)
    return entries.matrix(len(labels))
