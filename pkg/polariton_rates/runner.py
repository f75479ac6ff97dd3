"""Evaluate the configured tasks and write their artifacts."""

from __future__ import annotations

import io
import logging
import math
import multiprocessing
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .lineshape import FloatArray
from .oracle import all_passed, run_oracle_checks
from .polariton import (
    CavityModel,
    PolaritonEigensystem,
    build_block,
    diagonalize,
    polariton_response,
)
from .rates import (
    GRID_COVERAGE_TOLERANCE,
    radiative_pumping_overlap,
    radiative_pumping_sum,
    raman_scattering,
    recycling_rate,
    vibrational_relaxation,
)
from .run_config import RunConfig
from .util import write_tree
from .vibronic import (
    BareSpectrum,
    PreparedMolecule,
    bare_absorption,
    bare_emission,
    converge_basis,
    count_states,
    prepare_molecule,
)
from .writer import table_document, write_json, write_sticks, write_table

logger = logging.getLogger(__name__)

FC_LEAK_WARNING = 1e-2
STICK_FLOOR = 1e-12
SPECTRA_COLUMNS = (
    "omega",
    "sigma_abs",
    "sigma_em",
    "A",
    "T",
    "minus_im_DR",
    "gamma_rp_omega",
)


@dataclass
class PointResult:
    summary: Dict[str, Any]
    rates: Dict[str, float] = field(default_factory=dict)
    channels: Dict[str, Dict[str, float]] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    spectra: Optional[Tuple[FloatArray, ...]] = None
    emission: Optional[BareSpectrum] = None
    absorption: Optional[BareSpectrum] = None

    def warn(self, filename: str, msg: str) -> None:
        logger.warning("%s:%s", filename, msg)
        self.warnings.append(msg)

    def document(self) -> Dict[str, Any]:
        return {
            **self.summary,
            "rates": self.rates,
            "channels": self.channels,
            "warnings": self.warnings,
        }


def _prepare(config: RunConfig) -> PreparedMolecule:
    molecule = config.molecule.model()
    if config.molecule.auto_converge:
        return converge_basis(molecule, config.molecule.epsilon)
    return prepare_molecule(molecule)


def evaluate(config: RunConfig) -> PointResult:
    """Run every selected task for a single parameter point."""
    prepared = _prepare(config)
    ss = prepared.stokes_shifted
    cavity = config.cavity.model(prepared.molecule)
    result = PointResult(
        {
            "basis_size": prepared.basis.size,
            "basis_converged": prepared.converged,
            "basis_rounds": prepared.rounds,
            "fc_leak": ss.fc_leak,
            "omega_ss": ss.energy,
            "omega_c": cavity.omega_c,
            "detuning": cavity.detuning,
            "g": cavity.g,
            "gamma_xi": cavity.broadening,
        }
    )
    if ss.fc_leak > FC_LEAK_WARNING:
        result.warn(
            config.filename,
            f"Stokes-shifted state keeps weight {ss.fc_leak:.3g} "
            "on the Franck-Condon state",
        )
    if prepared.converged is False:
        result.warn(config.filename, "vibrational basis did not converge")

    eig = diagonalize(build_block((), prepared.veg, cavity))
    result.summary["polaritons"] = {
        "lower": float(eig.eigenvalues[0]),
        "upper": float(eig.eigenvalues[-1]),
    }
    if any(config.wants(task) for task in ("spectra", "rp", "rec")):
        _linear_response_tasks(config, prepared, cavity, eig, result)
    if config.wants("vr"):
        relaxation = vibrational_relaxation(
            config.relaxation.initial_state,
            prepared.veg,
            cavity,
            config.relaxation.variant,
        )
        branches = (("vr_upper", relaxation.upper), ("vr_lower", relaxation.lower))
        for name, branch in branches:
            result.rates[name] = branch.total
            result.channels[name] = dict(branch.channels)
    if config.wants("scatt"):
        scattering = raman_scattering(ss, eig, prepared.basis, cavity)
        result.rates["scatt"] = scattering.total
        result.rates["scatt_lp"] = scattering.channels["lower_polariton"]
        result.channels["scatt"] = dict(scattering.channels)
    if config.wants("oracle"):
        report = run_oracle_checks(prepared.veg, cavity)
        result.summary["oracle"] = [record.as_dict() for record in report]
        if not all_passed(report):
            failed = ", ".join(record.name for record in report if not record.passed)
            result.warn(config.filename, f"oracle checks failed: {failed}")
    return result


def _linear_response_tasks(
    config: RunConfig,
    prepared: PreparedMolecule,
    cavity: CavityModel,
    eig: PolaritonEigensystem,
    result: PointResult,
) -> None:
    gamma_mol = config.cavity.gamma_mol
    ss = prepared.stokes_shifted
    emission = bare_emission(ss, prepared.basis, gamma_mol)
    absorption = bare_absorption(prepared.veg, gamma_mol)
    centers = [eig.eigenvalues, emission.frequencies[emission.weights >= STICK_FLOOR]]
    if config.wants("spectra"):
        centers.append(absorption.frequencies[absorption.weights >= STICK_FLOOR])
    grid = config.grid.build(np.concatenate(centers), cavity.broadening)
    response = polariton_response(eig, cavity, grid)

    sticks = emission.frequencies
    outside = emission.weights[(sticks < grid[0]) | (sticks > grid[-1])]
    if outside.size:
        share = float(outside.sum()) / max(emission.total_weight(), 1e-300)
        result.summary["emission_outside_grid"] = share
        if share > 0:
            level = "exceeds" if share > GRID_COVERAGE_TOLERANCE else "within"
            result.warn(
                config.filename,
                f"emission weight share {share:.3g} lies outside the grid "
                f"({level} tolerance)",
            )

    area = response.curve(response.minus_im_green).integrate()
    result.summary["green_sum_rule"] = area / math.pi
    if config.wants("rp"):
        overlap = radiative_pumping_overlap(emission, response, cavity)
        result.rates["rp"] = overlap.total
        result.channels["rp"] = dict(overlap.channels)
        result.rates["rp_sum"] = radiative_pumping_sum(ss, eig, cavity).total
    if config.wants("rec"):
        result.rates["rec"] = recycling_rate(emission, response, cavity).total
    if config.wants("spectra"):
        emission = bare_emission(ss, prepared.basis, gamma_mol, grid)
        absorption = bare_absorption(prepared.veg, gamma_mol, grid)
        resolved = radiative_pumping_overlap(
            emission, response, cavity, use_sticks=False
        )
        assert emission.broadened is not None and absorption.broadened is not None
        assert resolved.frequency_resolved is not None
        assert response.absorption is not None and response.transmission is not None
        result.spectra = (
            response.frequencies,
            absorption.broadened.values,
            emission.broadened.values,
            response.absorption,
            response.transmission,
            response.minus_im_green,
            resolved.frequency_resolved.values,
        )
        result.emission = emission
        result.absorption = absorption


def evaluate_all(config: RunConfig, threads: int = 1) -> List[PointResult]:
    """Evaluate every sweep point, in sweep order whatever the thread count."""
    points = list(config.sweep.points) if config.sweep else [config]
    workers = min(threads, multiprocessing.cpu_count(), len(points))
    if workers <= 1:
        return [evaluate(point) for point in points]
    logger.info("evaluating %d sweep points on %d threads", len(points), workers)
    with ThreadPool(workers) as pool:
        return pool.map(evaluate, points)


def _render(fmt: str, write_csv: Callable[[io.StringIO], None], document: Any) -> str:
    buffer = io.StringIO(newline="\n")
    if fmt == "json":
        write_json(document, buffer)
    else:
        write_csv(buffer)
    return buffer.getvalue()


def _table(fmt: str, columns: Sequence[str], data: Sequence[Sequence[Any]]) -> str:
    document = table_document(columns, data)
    return _render(fmt, lambda buffer: write_table(columns, data, buffer), document)


def _sticks(fmt: str, spectrum: BareSpectrum) -> str:
    document = table_document(
        ("state", "frequency", "weight"),
        (spectrum.states, spectrum.frequencies, spectrum.weights),
    )
    return _render(fmt, lambda buffer: write_sticks(spectrum, buffer), document)


def render(config: RunConfig, results: Sequence[PointResult]) -> Dict[str, str]:
    """File name to content for every artifact of a run."""
    fmt = config.output.format
    sweep = config.sweep
    values: Sequence[Optional[float]] = sweep.values if sweep else [None]
    points = []
    for value, result in zip(values, results):
        document = result.document()
        if value is not None:
            document["sweep_value"] = value
        points.append(document)
    summary = {
        "version": __version__,
        "tasks": list(config.tasks),
        "sweep": (
            {"parameter": sweep.parameter, "values": list(sweep.values)}
            if sweep
            else None
        ),
        "points": points,
    }
    buffer = io.StringIO(newline="\n")
    write_json(summary, buffer)
    files = {"summary.json": buffer.getvalue()}

    for index, result in enumerate(results):
        if result.spectra is None:
            continue
        suffix = f"_{index:03d}" if sweep else ""
        files[f"spectra{suffix}.{fmt}"] = _table(fmt, SPECTRA_COLUMNS, result.spectra)
        assert result.emission is not None and result.absorption is not None
        files[f"emission_sticks{suffix}.{fmt}"] = _sticks(fmt, result.emission)
        files[f"absorption_sticks{suffix}.{fmt}"] = _sticks(fmt, result.absorption)

    if sweep:
        names = sorted({name for result in results for name in result.rates})
        for name in names:
            rates = [result.rates.get(name, math.nan) for result in results]
            files[f"sweep_{name}.{fmt}"] = _table(
                fmt, ("sweep_value", name), (list(sweep.values), rates)
            )
    return files


def write_artifacts(files: Dict[str, str], directory: str) -> List[str]:
    return write_tree(directory, files)


def run(
    config: RunConfig, output_dir: Optional[str] = None, threads: int = 1
) -> List[str]:
    """Evaluate, render and write everything; returns the written paths."""
    results = evaluate_all(config, threads)
    files = render(config, results)
    directory = output_dir if output_dir is not None else config.output.directory
    paths = write_artifacts(files, directory)
    logger.info("wrote %d files to %s", len(paths), directory)
    return paths


def diagnostics(config: RunConfig) -> List[str]:
    """Derived quantities of a validated configuration, one per line."""
    molecule = config.molecule.model()
    cavity = config.cavity.model(molecule)
    omega_c = f"omega_c = {cavity.omega_c:.12g}"
    if config.cavity.vertical_resonance:
        omega_c += " (vertical resonance: omega_0 + sum omega_nu s)"
    lines = [
        f"config: {config.filename}",
        f"omega_0 = {molecule.electronic_gap:.12g}",
        omega_c,
        f"detuning = {cavity.detuning:.12g}",
        f"g_sqrt_n = {cavity.g_sqrt_n:.12g}",
        f"g = {cavity.g:.12g}",
        f"gamma_xi = {cavity.broadening:.12g}",
        f"basis_size_estimate = {count_states(molecule)}",
        f"tasks = {', '.join(config.tasks)}",
    ]
    if config.sweep:
        lines.append(f"sweep = {config.sweep.parameter}")
    lines.append(f"planned_runs = {config.planned_runs}")
    return lines
