from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from polariton_rates.config import load_config
from polariton_rates.polariton import build_block, diagonalize
from polariton_rates.rates import raman_scattering
from polariton_rates.run_config import RunConfig
from polariton_rates.runner import evaluate
from polariton_rates.vibronic import bare_emission, converge_basis

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

Points = Callable[[str], List[RunConfig]]


@pytest.fixture
def _points() -> Points:
    def f(name: str) -> List[RunConfig]:
        path = CONFIGS / name
        with open(path) as stream:
            config = load_config(stream, str(path))
        assert config.sweep is not None
        return list(config.sweep.points)

    return f


def _centroid(frequencies: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(frequencies * weights) / np.sum(weights))


class TestRadiativePumpingStudy:
    def test_pumping_fades_as_emission_leaves_lower_polariton(
        self, _points: Points
    ) -> None:
        points = _points("radiative_pumping.toml")
        near, far = evaluate(points[0]), evaluate(points[-1])
        gamma = near.summary["gamma_xi"]

        assert near.spectra is not None
        omega, resolved = near.spectra[0], near.spectra[-1]
        lower = near.summary["polaritons"]["lower"]
        assert abs(omega[np.argmax(resolved)] - lower) <= 3 * gamma
        assert near.rates["rp"] == pytest.approx(near.rates["rp_sum"], rel=1e-3)

        assert far.rates["rp"] < near.rates["rp"]
        distances = []
        for result in (near, far):
            assert result.emission is not None
            emission = result.emission
            centroid = _centroid(emission.frequencies, emission.weights)
            distances.append(abs(centroid - result.summary["polaritons"]["lower"]))
        assert distances[1] > distances[0]


class TestRamanStudy:
    def test_peak_where_lower_polariton_meets_emission(
        self, _points: Points
    ) -> None:
        rates = []
        gaps = []
        lower_channel = []
        for point in _points("raman_scattering.toml"):
            prepared = converge_basis(point.molecule.model())
            cavity = point.cavity.model(prepared.molecule)
            eig = diagonalize(build_block((), prepared.veg, cavity))
            result = raman_scattering(
                prepared.stokes_shifted, eig, prepared.basis, cavity
            )
            emission = bare_emission(prepared.stokes_shifted, prepared.basis)
            strongest = emission.frequencies[np.argmax(emission.weights)]
            rates.append(result.total)
            gaps.append(abs(eig.eigenvalues[0] - strongest) / cavity.broadening)
            lower_channel.append(result.channels["lower_polariton"])

        peak = int(np.argmax(rates))
        assert 0 < peak < len(rates) - 1
        assert rates[0] < rates[peak] > rates[-1]
        assert gaps[peak] <= 1.0
        assert all(value > 0 for value in lower_channel)
