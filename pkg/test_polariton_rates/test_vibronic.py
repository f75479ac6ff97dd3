import logging
import math
from typing import Any, Optional, Sequence, Tuple

import numpy as np
import pytest

from polariton_rates.vibronic import (
    MoleculeModel,
    Prefactor,
    VibrationalMode,
    bare_absorption,
    bare_emission,
    build_veg,
    converge_basis,
    count_states,
    enumerate_basis,
    prepare_molecule,
    stokes_shifted_state,
    vertical_resonance_frequency,
)


def _molecule(
    modes: Sequence[Tuple[float, float, int]],
    omega_0: float = 0.1,
    cap: Optional[int] = None,
) -> MoleculeModel:
    return MoleculeModel(
        omega_0, tuple(VibrationalMode.from_sqrt_s(w, r, n) for w, r, n in modes), cap
    )


def _poisson(s: float, n: int) -> np.ndarray:
    return np.array([math.exp(-s) * s ** j / math.factorial(j) for j in range(n)])


class TestModels:
    def test_from_sqrt_s(self) -> None:
        mode = VibrationalMode.from_sqrt_s(0.001, 3.5, 40)
        assert mode.huang_rhys == pytest.approx(12.25)
        assert mode.sqrt_s == pytest.approx(3.5)

    def test_invalid_mode(self) -> None:
        with pytest.raises(ValueError):
            VibrationalMode(0.0, 1.0, 3)
        with pytest.raises(ValueError):
            VibrationalMode(0.01, -1.0, 3)
        with pytest.raises(ValueError):
            VibrationalMode(0.01, 1.0, -1)

    def test_quanta_cap_defaults_to_sum(self) -> None:
        assert _molecule([(0.01, 1.0, 3), (0.001, 1.0, 4)]).quanta_cap == 7
        assert _molecule([(0.01, 1.0, 3), (0.001, 1.0, 4)], cap=2).quanta_cap == 2

    def test_vertical_resonance(self) -> None:
        molecule = _molecule([(0.01, 1.0, 3), (0.0008, 3.5, 4)])
        assert vertical_resonance_frequency(molecule) == pytest.approx(
            0.1 + 0.01 + 0.0008 * 12.25
        )


class TestBasis:
    def test_energy_then_tuple_order(self) -> None:
        basis = enumerate_basis(_molecule([(0.01, 1.0, 1), (0.001, 1.0, 2)]))
        assert basis.states == ((0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2))
        expected = [0, 0.001, 0.002, 0.01, 0.011, 0.012]
        np.testing.assert_allclose(basis.energies, expected)

    def test_degenerate_modes(self) -> None:
        basis = enumerate_basis(_molecule([(0.01, 1.0, 1), (0.01, 1.0, 1)]))
        assert basis.states == ((0, 0), (0, 1), (1, 0), (1, 1))

    def test_total_cap(self) -> None:
        molecule = _molecule([(0.01, 1.0, 3), (0.001, 1.0, 4)], cap=3)
        basis = enumerate_basis(molecule)
        assert basis.size == 10
        assert all(sum(state) <= 3 for state in basis.states)

    @pytest.mark.parametrize(
        "modes,cap",
        [
            ([(0.01, 1.0, 3), (0.001, 1.0, 4)], None),
            ([(0.01, 1.0, 3), (0.001, 1.0, 4)], 3),
            ([(0.01, 1.0, 2), (0.002, 1.0, 2), (0.003, 1.0, 5)], 4),
        ],
    )
    def test_count_states(self, modes: Any, cap: Optional[int]) -> None:
        molecule = _molecule(modes, cap=cap)
        assert count_states(molecule) == enumerate_basis(molecule).size

    def test_head(self) -> None:
        basis = enumerate_basis(_molecule([(0.01, 1.0, 1), (0.001, 1.0, 2)]))
        head = basis.head(3)
        assert head.states == basis.states[:3]
        with pytest.raises(ValueError):
            basis.head(7)


class TestCouplingMatrix:
    def test_single_mode_entries(self) -> None:
        molecule = _molecule([(0.01, 1.0, 3)])
        veg = build_veg(enumerate_basis(molecule), molecule)
        assert veg.coupling[0, 1] == pytest.approx(0.01)
        assert veg.coupling[1, 2] == pytest.approx(0.01 * math.sqrt(2))
        assert veg.coupling[3, 2] == pytest.approx(0.01 * math.sqrt(3))
        np.testing.assert_allclose(veg.excited_energies, 0.1 + 0.01 * np.arange(4))
        assert np.all(np.diag(veg.coupling) == 0)

    def test_sparsity(self) -> None:
        molecule = _molecule([(0.01, 1.0, 2), (0.001, 2.0, 2)])
        veg = build_veg(enumerate_basis(molecule), molecule)
        # two pairs on each of three lines per mode
        assert np.count_nonzero(veg.coupling) == 2 * 12
        np.testing.assert_array_equal(veg.coupling, veg.coupling.T)

    def test_undisplaced_mode_does_not_couple(self) -> None:
        molecule = _molecule([(0.01, 0.0, 3), (0.001, 1.0, 1)])
        veg = build_veg(enumerate_basis(molecule), molecule)
        assert np.count_nonzero(veg.coupling) == 2 * 4


class TestStokesShiftedState:
    def test_poisson_limit(self) -> None:
        prepared = prepare_molecule(_molecule([(0.01, 1.0, 30)]))
        ss = prepared.stokes_shifted
        assert ss.energy == pytest.approx(0.09, abs=1e-12)
        np.testing.assert_allclose(ss.weights, _poisson(1.0, 31), atol=1e-10)
        assert ss.fc_leak == pytest.approx(math.exp(-1.0))
        assert ss.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_two_mode_sum_rule(self) -> None:
        molecule = _molecule([(0.01, 1.0, 8), (0.001, 2.0, 20)], cap=24)
        prepared = prepare_molecule(molecule)
        assert prepared.stokes_shifted.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_truncation_monotonicity(self) -> None:
        energies = []
        for n in range(1, 10):
            prepared = prepare_molecule(_molecule([(0.01, 1.5, n)]))
            energies.append(stokes_shifted_state(prepared.veg).energy)
        assert all(b <= a + 1e-15 for a, b in zip(energies, energies[1:]))


class TestSpectra:
    def test_emission_excludes_franck_condon(self) -> None:
        prepared = prepare_molecule(_molecule([(0.01, 1.0, 20)]))
        ss = prepared.stokes_shifted
        emission = bare_emission(ss, prepared.basis)
        assert emission.states[0] == 1
        assert emission.total_weight() == pytest.approx(1 - ss.fc_leak)
        np.testing.assert_allclose(
            emission.frequencies, ss.energy - prepared.basis.energies[1:]
        )

    def test_mirror_symmetry(self) -> None:
        prepared = prepare_molecule(_molecule([(0.01, 1.0, 30)]))
        ss = prepared.stokes_shifted
        emission = bare_emission(ss, prepared.basis, include_fc=True)
        absorption = bare_absorption(prepared.veg)
        for n in range(10):
            delta = absorption.frequencies[n] - ss.energy
            assert delta == pytest.approx(0.01 * n, abs=1e-10)
            mirrored = ss.energy - delta
            assert emission.frequencies[n] == pytest.approx(mirrored, abs=1e-10)
            assert abs(emission.weights[n] - absorption.weights[n]) <= 1e-8

    def test_absorption_normalization(self) -> None:
        prepared = prepare_molecule(_molecule([(0.01, 1.0, 10)]))
        unit = bare_absorption(prepared.veg)
        assert unit.total_weight() == pytest.approx(1.0)
        ensemble = bare_absorption(
            prepared.veg, prefactor=Prefactor.ENSEMBLE, g_sqrt_n=0.04
        )
        assert ensemble.total_weight() == pytest.approx(math.pi * 0.04 ** 2)
        with pytest.raises(ValueError):
            bare_absorption(prepared.veg, prefactor=Prefactor.ENSEMBLE)

    def test_broadened_curve(self) -> None:
        prepared = prepare_molecule(_molecule([(0.01, 1.0, 10)]))
        grid = np.linspace(-1.0, 1.5, 50001)
        emission = bare_emission(prepared.stokes_shifted, prepared.basis, 0.0015, grid)
        assert emission.broadened is not None
        assert emission.broadened.integrate() == pytest.approx(
            emission.total_weight(), rel=1e-2
        )


class TestConvergeBasis:
    def test_fixed_caps_are_not_checked(self) -> None:
        molecule = _molecule([(0.001, 5.0, 2)])
        fixed = prepare_molecule(molecule)
        assert fixed.converged is None
        assert fixed.rounds == 1
        grown = converge_basis(molecule)
        assert grown.converged
        assert grown.stokes_shifted.energy == pytest.approx(0.075, abs=1e-6)
        assert fixed.stokes_shifted.energy - grown.stokes_shifted.energy > 0.01

    def test_converges_to_poisson(self) -> None:
        prepared = converge_basis(_molecule([(0.01, 1.0, 2)]), epsilon=1e-6)
        assert prepared.converged
        assert prepared.rounds > 1
        weights = prepared.stokes_shifted.weights
        np.testing.assert_allclose(weights, _poisson(1.0, weights.size), atol=1e-5)

    def test_state_limit(self, caplog: Any) -> None:
        with caplog.at_level(logging.WARNING):
            prepared = converge_basis(_molecule([(0.01, 1.0, 2)]), max_states=4)
        assert not prepared.converged
        assert prepared.basis.size == 3
        assert "basis growth stopped" in caplog.text
