import json
import os
from pathlib import Path
from typing import Any, Callable, List, Tuple

import pytest

from polariton_rates.__main__ import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, main
from polariton_rates.args import parse_args
from polariton_rates.runner import SPECTRA_COLUMNS

Write = Callable[[str], str]
Main = Callable[[List[str]], Tuple[int, str, str]]

CONFIG = """\
[molecule]
omega_0 = 0.1

[[molecule.modes]]
omega_nu = 0.01
sqrt_s = 1.0
n_max = 4

[[molecule.modes]]
omega_nu = 0.001
sqrt_s = 1.0
n_max = 3

[cavity]
detuning = 0.0
g_sqrt_n = 0.02
n_molecules = 100000
kappa = 0.003

[grid]
points = 2001

[tasks]
spectra = true
rp = true
rec = true
vr = true
scatt = true
"""

SWEEP = """\
[sweep]
parameter = "cavity.g_sqrt_n"
values = [0.01, 0.02, 0.03]
"""


@pytest.fixture
def _write(tmp_path: Path) -> Write:
    def f(text: str) -> str:
        path = tmp_path / "run.toml"
        path.write_text(text, encoding="utf-8")
        return str(path)

    return f


@pytest.fixture
def _main(capsys: Any) -> Main:
    def f(argv: List[str]) -> Tuple[int, str, str]:
        with pytest.raises(SystemExit) as exc_info:
            main(argv)
        captured = capsys.readouterr()
        return exc_info.value.code, captured.out, captured.err

    return f


def _read_all(directory: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestRun:
    def test_writes_artifacts(self, tmp_path: Path, _write: Write, _main: Main) -> None:
        out = tmp_path / "out"
        code, _, _ = _main(["run", _write(CONFIG), "-o", str(out)])
        assert code == 0
        assert sorted(os.listdir(out)) == [
            "absorption_sticks.csv",
            "emission_sticks.csv",
            "spectra.csv",
            "summary.json",
        ]
        header = (out / "spectra.csv").read_text().splitlines()[0]
        assert header == ",".join(SPECTRA_COLUMNS)
        assert len((out / "spectra.csv").read_text().splitlines()) == 2002
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sweep"] is None
        assert summary["tasks"] == ["spectra", "rp", "rec", "vr", "scatt"]
        (point,) = summary["points"]
        rates = point["rates"]
        expected = {"rp", "rp_sum", "rec", "vr_upper", "vr_lower", "scatt", "scatt_lp"}
        assert set(rates) == expected
        assert all(rate >= 0 for rate in rates.values())
        assert rates["rec"] <= rates["rp"]
        assert rates["scatt_lp"] <= rates["scatt"]
        assert point["channels"]["scatt"]["lower_polariton"] == rates["scatt_lp"]
        assert point["basis_converged"] is True
        assert point["basis_size"] > 20

    def test_reruns_are_identical(
        self, tmp_path: Path, _write: Write, _main: Main
    ) -> None:
        config = _write(CONFIG)
        assert _main(["run", config, "-o", str(tmp_path / "a")])[0] == 0
        assert _main(["run", config, "-o", str(tmp_path / "b")])[0] == 0
        assert _read_all(tmp_path / "a") == _read_all(tmp_path / "b")

    def test_threads_do_not_change_results(
        self, tmp_path: Path, _write: Write, _main: Main
    ) -> None:
        config = _write(CONFIG.replace("spectra = true\n", "") + SWEEP)
        assert _main(["run", config, "-o", str(tmp_path / "serial")])[0] == 0
        threaded = ["run", config, "-j", "2", "-o", str(tmp_path / "threaded")]
        assert _main(threaded)[0] == 0
        serial = _read_all(tmp_path / "serial")
        assert serial == _read_all(tmp_path / "threaded")
        assert "sweep_rp.csv" in serial
        rows = serial["sweep_rp.csv"].decode().splitlines()
        assert rows[0] == "sweep_value,rp"
        values = [row.split(",")[0] for row in rows[1:]]
        assert values == ["0.01", "0.02", "0.029999999999999999"]

    def test_sweep_spectra_are_numbered(
        self, tmp_path: Path, _write: Write, _main: Main
    ) -> None:
        out = tmp_path / "out"
        assert _main(["run", _write(CONFIG + SWEEP), "-o", str(out)])[0] == 0
        names = os.listdir(out)
        assert {"spectra_000.csv", "spectra_001.csv", "spectra_002.csv"} <= set(names)
        assert "spectra.csv" not in names
        summary = json.loads((out / "summary.json").read_text())
        assert summary["sweep"] == {
            "parameter": "cavity.g_sqrt_n",
            "values": [0.01, 0.02, 0.03],
        }
        assert [p["sweep_value"] for p in summary["points"]] == [0.01, 0.02, 0.03]

    def test_json_format(self, tmp_path: Path, _write: Write, _main: Main) -> None:
        out = tmp_path / "out"
        config = _write(CONFIG + '[output]\nformat = "json"\n')
        assert _main(["run", config, "-o", str(out)])[0] == 0
        spectra = json.loads((out / "spectra.json").read_text())
        assert spectra["columns"] == list(SPECTRA_COLUMNS)
        assert len(spectra["omega"]) == 2001

    def test_missing_kappa(self, _write: Write, _main: Main) -> None:
        code, out, err = _main(["run", _write(CONFIG.replace("kappa = 0.003\n", ""))])
        assert code == EXIT_CONFIG
        assert out == ""
        assert err.startswith("ERROR:")
        assert "cavity.kappa" in err

    def test_negative_kappa(self, _write: Write, _main: Main) -> None:
        config = _write(CONFIG.replace("kappa = 0.003", "kappa = -0.003"))
        code, _, err = _main(["run", config])
        assert code == EXIT_CONFIG
        assert ":18:'cavity.kappa' must be positive" in err

    def test_fixed_caps_are_reported_unchecked(
        self, tmp_path: Path, _write: Write, _main: Main
    ) -> None:
        fixed = CONFIG.replace("\n\n", "\nauto_converge = false\n\n", 1)
        out = tmp_path / "out"
        assert _main(["run", _write(fixed), "-o", str(out)])[0] == 0
        (point,) = json.loads((out / "summary.json").read_text())["points"]
        assert point["basis_converged"] is None
        assert point["basis_size"] == 20
        assert "vibrational basis did not converge" not in point["warnings"]

    def test_grid_missing_emission(
        self, tmp_path: Path, _write: Write, _main: Main
    ) -> None:
        grid = "[grid]\nomega_min = 0.095\nomega_max = 0.2\npoints = 201\n"
        out = tmp_path / "out"
        code, _, err = _main(["run", _write(CONFIG + grid), "-o", str(out)])
        assert code == EXIT_NUMERICAL
        assert ":numerical failure: emission weight" in err
        assert not out.exists()

    def test_missing_file(self, tmp_path: Path, _main: Main) -> None:
        code, _, err = _main(["run", str(tmp_path / "absent.toml")])
        assert code == EXIT_IO
        assert err.startswith("ERROR: ")


class TestValidate:
    def test_sweep_points(self, _write: Write, _main: Main) -> None:
        sweep = '[sweep]\nparameter = "molecule.modes.1.sqrt_s"\n'
        sweep += "values = [1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]\n"
        code, out, err = _main(["validate", _write(CONFIG + sweep)])
        assert code == 0
        assert err == ""
        lines = out.splitlines()
        assert lines[-1] == "planned_runs = 7"
        assert "sweep = molecule.modes.1.sqrt_s" in lines
        assert "basis_size_estimate = 20" in lines

    def test_vertical_resonance(self, _write: Write, _main: Main) -> None:
        config = CONFIG.replace("detuning = 0.0", "vertical_resonance = true")
        config = config.replace("vr = true\n", "")
        code, out, _ = _main(["validate", _write(config)])
        assert code == 0
        assert "omega_c = 0.111 (vertical resonance: omega_0 + sum omega_nu s)" in out
        assert "detuning = 0.011\n" in out

    def test_writes_nothing(self, tmp_path: Path, _write: Write, _main: Main) -> None:
        config = _write(CONFIG + f'[output]\ndirectory = "{tmp_path / "out"}"\n')
        assert _main(["validate", config])[0] == 0
        assert not (tmp_path / "out").exists()


class TestParseArgs:
    def test_run(self) -> None:
        args = parse_args(["run", "a.toml", "-o", "out", "-j", "4"])
        assert args.command == "run"
        assert args.config == "a.toml"
        assert args.output_dir == "out"
        assert args.threads == 4

    def test_validate(self) -> None:
        args = parse_args(["validate", "a.toml"])
        assert args.command == "validate"
        assert args.output_dir is None
        assert args.threads == 1

    def test_bad_threads(self, capsys: Any) -> None:
        with pytest.raises(SystemExit) as exc_info:
            parse_args(["run", "a.toml", "-j", "0"])
        assert exc_info.value.code == 2
        assert "--threads" in capsys.readouterr().err

    def test_command_required(self, capsys: Any) -> None:
        with pytest.raises(SystemExit):
            parse_args([])
        capsys.readouterr()
