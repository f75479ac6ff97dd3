"""Run configuration model.

Values here are already validated; see config.py for reading them from TOML.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy.typing as npt

from .lineshape import (
    DEFAULT_MARGIN,
    DEFAULT_POINTS,
    FloatArray,
    default_grid,
    uniform_grid,
)
from .polariton import CavityModel
from .rates import RelaxationVariant
from .vibronic import MoleculeModel, VibrationalMode, vertical_resonance_frequency

TASKS = ("spectra", "rp", "rec", "vr", "scatt", "oracle")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class ModeSection:
    omega_nu: float
    huang_rhys: float
    n_max: int


@dataclass(frozen=True)
class MoleculeSection:
    omega_0: float
    modes: Tuple[ModeSection, ...]
    total_quanta_cap: Optional[int] = None
    auto_converge: bool = True
    epsilon: float = 1e-6

    def model(self) -> MoleculeModel:
        return MoleculeModel(
            self.omega_0,
            tuple(
                VibrationalMode(m.omega_nu, m.huang_rhys, m.n_max) for m in self.modes
            ),
            self.total_quanta_cap,
        )


@dataclass(frozen=True)
class CavitySection:
    """Exactly one of omega_c, detuning and vertical_resonance is set."""

    g_sqrt_n: float
    n_molecules: int
    kappa: float
    omega_c: Optional[float] = None
    detuning: Optional[float] = None
    vertical_resonance: bool = False
    gamma_xi: Optional[float] = None
    gamma_mol: float = 0.0015

    def cavity_frequency(self, molecule: MoleculeModel) -> float:
        if self.vertical_resonance:
            return vertical_resonance_frequency(molecule)
        if self.detuning is not None:
            return molecule.electronic_gap + self.detuning
        assert self.omega_c is not None
        return self.omega_c

    def model(self, molecule: MoleculeModel) -> CavityModel:
        return CavityModel(
            self.cavity_frequency(molecule),
            molecule.electronic_gap,
            self.g_sqrt_n,
            self.n_molecules,
            self.kappa,
            self.gamma_xi,
        )


@dataclass(frozen=True)
class GridSection:
    omega_min: Optional[float] = None
    omega_max: Optional[float] = None
    points: int = DEFAULT_POINTS
    margin: float = DEFAULT_MARGIN

    def build(self, centers: npt.ArrayLike, gamma: float) -> FloatArray:
        if self.omega_min is not None and self.omega_max is not None:
            return uniform_grid(self.omega_min, self.omega_max, self.points)
        return default_grid(centers, gamma, self.points, self.margin)


@dataclass(frozen=True)
class RelaxationSection:
    initial_state: int = 1
    variant: RelaxationVariant = RelaxationVariant.REDUCED2


@dataclass(frozen=True)
class SweepSection:
    """A dotted parameter path, its values and one resolved config per value."""

    parameter: str
    values: Tuple[float, ...]
    points: Tuple[RunConfig, ...] = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class OutputSection:
    directory: str = "output"
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    molecule: MoleculeSection
    cavity: CavitySection
    tasks: Tuple[str, ...]
    grid: GridSection = GridSection()
    relaxation: RelaxationSection = RelaxationSection()
    sweep: Optional[SweepSection] = None
    output: OutputSection = OutputSection()
    filename: str = "<unknown>"
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def wants(self, task: str) -> bool:
        return task in self.tasks

    @property
    def planned_runs(self) -> int:
        return len(self.sweep.values) if self.sweep else 1
