"""Read and validate a run configuration from TOML."""

from __future__ import annotations

import copy
import math
import re
from typing import (
    TYPE_CHECKING,
    Any,
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import toml

from .errors import ConfigError
from .rates import RelaxationVariant
from .run_config import (
    FORMATS,
    TASKS,
    CavitySection,
    GridSection,
    ModeSection,
    MoleculeSection,
    OutputSection,
    RelaxationSection,
    RunConfig,
    SweepSection,
)
from .vibronic import count_states

if TYPE_CHECKING:
    from _typeshed import SupportsRead

SECTIONS = ("molecule", "cavity", "grid", "tasks", "relaxation", "sweep", "output")

_HEADER = re.compile(r"^\s*\[\[?\s*([^\[\]]+?)\s*\]\]?\s*(#.*)?$")
_MISSING: Any = object()


class ConfigContext:
    """Maps sections and keys back to the lines they were read from."""

    def __init__(self, filename: str, text: str) -> None:
        self.filename = filename
        self._lines = text.splitlines()
        self._headers: List[Tuple[int, str]] = []
        for lineno, line in enumerate(self._lines, 1):
            match = _HEADER.match(line)
            if match:
                name = re.sub(r"\s+", "", match.group(1))
                self._headers.append((lineno, name))

    def _region(self, section: str, occurrence: int) -> Optional[Tuple[int, int]]:
        end_of_file = len(self._lines) + 1
        if not section:
            end = self._headers[0][0] if self._headers else end_of_file
            return 0, end
        starts = [i for i, (_, name) in enumerate(self._headers) if name == section]
        if occurrence >= len(starts):
            return None
        h = starts[occurrence]
        end = self._headers[h + 1][0] if h + 1 < len(self._headers) else end_of_file
        return self._headers[h][0], end

    def lineno(
        self, section: str, key: Optional[str] = None, occurrence: int = 0
    ) -> Optional[int]:
        """Line of `key` in the section, else of the section header."""
        region = self._region(section, occurrence)
        if region is None:
            return None
        start, end = region
        if key is not None:
            pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
            for lineno in range(start + 1, end):
                if pattern.match(self._lines[lineno - 1]):
                    return lineno
        return start or None

    def error(
        self, msg: str, section: str, key: Optional[str] = None, occurrence: int = 0
    ) -> ConfigError:
        return ConfigError(msg, self.filename, self.lineno(section, key, occurrence))


class _Table:
    def __init__(
        self,
        context: ConfigContext,
        section: str,
        values: Mapping[str, Any],
        occurrence: int = 0,
        prefix: Optional[str] = None,
    ) -> None:
        self.context = context
        self.section = section
        self.values = values
        self.occurrence = occurrence
        self.prefix = section if prefix is None else prefix

    def name(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def error(self, msg: str, key: Optional[str] = None) -> ConfigError:
        return self.context.error(msg, self.section, key, self.occurrence)

    def check_keys(self, allowed: Iterable[str]) -> None:
        allowed = set(allowed)
        for key in self.values:
            if key not in allowed:
                raise self.error(f"unknown key '{self.name(key)}'", key)

    def has(self, key: str) -> bool:
        return key in self.values

    def get(self, key: str, default: Any) -> Any:
        if key in self.values:
            return self.values[key]
        if default is _MISSING:
            raise self.error(f"missing required key '{self.name(key)}'", key)
        return default

    def number(
        self,
        key: str,
        default: Any = _MISSING,
        *,
        positive: bool = False,
        non_negative: bool = False,
    ) -> Any:
        value = self.get(key, default)
        if value is default and key not in self.values:
            return value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(f"'{self.name(key)}' must be a number", key)
        value = float(value)
        if not math.isfinite(value):
            raise self.error(f"'{self.name(key)}' must be finite", key)
        if positive and not value > 0:
            raise self.error(f"'{self.name(key)}' must be positive, got {value:g}", key)
        if non_negative and value < 0:
            raise self.error(f"'{self.name(key)}' must be >= 0, got {value:g}", key)
        return value

    def integer(self, key: str, default: Any = _MISSING, *, minimum: int = 0) -> Any:
        value = self.get(key, default)
        if value is default and key not in self.values:
            return value
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(f"'{self.name(key)}' must be an integer", key)
        if value < minimum:
            raise self.error(
                f"'{self.name(key)}' must be >= {minimum}, got {value}", key
            )
        return value

    def boolean(self, key: str, default: bool) -> bool:
        value = self.get(key, default)
        if not isinstance(value, bool):
            raise self.error(f"'{self.name(key)}' must be true or false", key)
        return value

    def choice(self, key: str, choices: Sequence[str], default: str) -> str:
        value = self.get(key, default)
        if value not in choices:
            options = ", ".join(choices)
            raise self.error(f"'{self.name(key)}' must be one of {options}", key)
        return str(value)

    def table(self, key: str, required: bool = False) -> _Table:
        values = self.values.get(key)
        if values is None:
            if required:
                raise self.error(f"missing required section '{self.name(key)}'")
            values = {}
        if not isinstance(values, dict):
            raise self.error(f"'{self.name(key)}' must be a table", key)
        section = self.name(key)
        return _Table(self.context, section, values)


def load_config(source: SupportsRead[str], filename: str = "<unknown>") -> RunConfig:
    text = source.read()
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as exc:
        raise ConfigError(exc.msg, filename, exc.lineno) from exc
    return parse_config(raw, ConfigContext(filename, text))


def parse_config(raw: Dict[str, Any], context: ConfigContext) -> RunConfig:
    top = _Table(context, "", raw)
    top.check_keys(SECTIONS)
    molecule = _molecule(top.table("molecule", required=True))
    cavity = _cavity(top.table("cavity", required=True))
    tasks_table = top.table("tasks", required=True)
    tasks = _tasks(tasks_table)
    relaxation_table = top.table("relaxation")
    relaxation = _relaxation(relaxation_table)
    config = RunConfig(
        molecule,
        cavity,
        tasks,
        grid=_grid(top.table("grid")),
        relaxation=relaxation,
        output=_output(top.table("output")),
        filename=context.filename,
        raw=raw,
    )
    _check_relaxation(config, tasks_table, relaxation_table)
    if "sweep" in raw:
        config = _with_sweep(config, top.table("sweep"), context)
    return config


def _molecule(table: _Table) -> MoleculeSection:
    table.check_keys(
        ("omega_0", "modes", "total_quanta_cap", "auto_converge", "epsilon")
    )
    omega_0 = table.number("omega_0", positive=True)
    raw_modes = table.get("modes", _MISSING)
    if not isinstance(raw_modes, list) or not raw_modes:
        raise table.error("'molecule.modes' must list at least one mode", "modes")
    modes = tuple(_mode(table, i, values) for i, values in enumerate(raw_modes))
    cap = table.integer("total_quanta_cap", None)
    return MoleculeSection(
        omega_0,
        modes,
        cap,
        auto_converge=table.boolean("auto_converge", True),
        epsilon=table.number("epsilon", 1e-6, positive=True),
    )


def _mode(parent: _Table, index: int, values: Any) -> ModeSection:
    if not isinstance(values, dict):
        raise parent.error(f"'molecule.modes[{index}]' must be a table", "modes")
    table = _Table(
        parent.context, "molecule.modes", values, index, f"molecule.modes[{index}]"
    )
    table.check_keys(("omega_nu", "sqrt_s", "s", "n_max"))
    if table.has("sqrt_s") and table.has("s"):
        raise table.error(
            f"'{table.name('s')}' and 'sqrt_s' are mutually exclusive", "s"
        )
    if table.has("sqrt_s"):
        sqrt_s = table.number("sqrt_s", non_negative=True)
        huang_rhys = sqrt_s * sqrt_s
    elif table.has("s"):
        huang_rhys = table.number("s", non_negative=True)
    else:
        raise table.error(f"'{table.prefix}' needs 'sqrt_s' or 's'")
    return ModeSection(
        table.number("omega_nu", positive=True), huang_rhys, table.integer("n_max")
    )


def _cavity(table: _Table) -> CavitySection:
    table.check_keys(
        (
            "omega_c",
            "detuning",
            "vertical_resonance",
            "g_sqrt_n",
            "n_molecules",
            "kappa",
            "gamma_xi",
            "gamma_mol",
        )
    )
    vertical = table.boolean("vertical_resonance", False)
    chosen = [table.has("omega_c"), table.has("detuning"), vertical]
    if sum(chosen) != 1:
        raise table.error(
            "exactly one of 'cavity.omega_c', 'cavity.detuning' and "
            "'cavity.vertical_resonance' must be set"
        )
    return CavitySection(
        g_sqrt_n=table.number("g_sqrt_n", non_negative=True),
        n_molecules=table.integer("n_molecules", minimum=1),
        kappa=table.number("kappa", positive=True),
        omega_c=table.number("omega_c", None, positive=True),
        detuning=table.number("detuning", None),
        vertical_resonance=vertical,
        gamma_xi=table.number("gamma_xi", None, positive=True),
        gamma_mol=table.number("gamma_mol", 0.0015, positive=True),
    )


def _grid(table: _Table) -> GridSection:
    table.check_keys(("omega_min", "omega_max", "points", "margin"))
    default = GridSection()
    omega_min = table.number("omega_min", None)
    omega_max = table.number("omega_max", None)
    if (omega_min is None) != (omega_max is None):
        raise table.error(
            "'grid.omega_min' and 'grid.omega_max' must be given together"
        )
    if omega_min is not None and not omega_max > omega_min:
        raise table.error("'grid.omega_max' must exceed 'grid.omega_min'", "omega_max")
    return GridSection(
        omega_min,
        omega_max,
        table.integer("points", default.points, minimum=2),
        table.number("margin", default.margin, positive=True),
    )


def _tasks(table: _Table) -> Tuple[str, ...]:
    table.check_keys(TASKS)
    selected = tuple(task for task in TASKS if table.boolean(task, False))
    if not selected:
        raise table.error("no task selected in 'tasks'")
    return selected


def _relaxation(table: _Table) -> RelaxationSection:
    table.check_keys(("initial_state", "variant"))
    variants = [v.value for v in RelaxationVariant]
    return RelaxationSection(
        table.integer("initial_state", 1, minimum=1),
        RelaxationVariant(
            table.choice("variant", variants, RelaxationVariant.REDUCED2.value)
        ),
    )


def _output(table: _Table) -> OutputSection:
    table.check_keys(("directory", "format"))
    directory = table.get("directory", OutputSection().directory)
    if not isinstance(directory, str) or not directory:
        raise table.error("'output.directory' must be a non-empty string", "directory")
    return OutputSection(directory, table.choice("format", FORMATS, "csv"))


def _check_relaxation(config: RunConfig, tasks: _Table, relaxation: _Table) -> None:
    if not config.wants("vr"):
        return
    molecule = config.molecule.model()
    omega_c = config.cavity.cavity_frequency(molecule)
    detuning = omega_c - molecule.electronic_gap
    if abs(detuning) > 1e-12 * max(1.0, molecule.electronic_gap):
        raise tasks.error(f"task 'vr' needs zero detuning, got {detuning:.6g}", "vr")
    size = count_states(molecule)
    k = config.relaxation.initial_state
    if k >= size:
        raise relaxation.error(
            f"'relaxation.initial_state' {k} is outside a basis of {size} states",
            "initial_state",
        )


def resolve_path(raw: Mapping[str, Any], path: str) -> Any:
    """Look up a dotted path; integer segments index into arrays of tables.

    >>> raw = {"molecule": {"modes": [{"s": 1.0}, {"s": 2.0}]}}
    >>> resolve_path(raw, "molecule.modes.1.s")
    2.0
    """
    node: Any = raw
    for part in path.split("."):
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


def apply_sweep(raw: Mapping[str, Any], path: str, value: float) -> Dict[str, Any]:
    """A deep copy of raw with the value at path replaced and no sweep table."""
    updated = copy.deepcopy(dict(raw))
    updated.pop("sweep", None)
    *parents, last = path.split(".")
    node: Any = resolve_path(updated, ".".join(parents)) if parents else updated
    if isinstance(node, list):
        index = int(last)
        if isinstance(node[index], int) and float(value).is_integer():
            value = int(value)
        node[index] = value
    else:
        if isinstance(node[last], int) and float(value).is_integer():
            value = int(value)
        node[last] = value
    return updated


def _with_sweep(config: RunConfig, table: _Table, context: ConfigContext) -> RunConfig:
    table.check_keys(("parameter", "values"))
    parameter = table.get("parameter", _MISSING)
    if not isinstance(parameter, str) or parameter.startswith("sweep"):
        raise table.error(
            "'sweep.parameter' must name a configuration key", "parameter"
        )
    try:
        current = resolve_path(config.raw, parameter)
    except KeyError:
        raise table.error(
            f"'sweep.parameter' names no existing key: {parameter}", "parameter"
        ) from None
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise table.error(f"'{parameter}' is not a numeric key", "parameter")
    values = table.get("values", _MISSING)
    if (
        not isinstance(values, list)
        or not values
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values)
    ):
        raise table.error(
            "'sweep.values' must be a non-empty list of numbers", "values"
        )
    points = []
    for value in values:
        try:
            updated = apply_sweep(config.raw, parameter, value)
            points.append(parse_config(updated, context))
        except ConfigError as exc:
            raise ConfigError(
                f"sweep value {value:g}: {exc.msg}", exc.filename, exc.lineno
            ) from exc
    sweep = SweepSection(parameter, tuple(float(v) for v in values), tuple(points))
    return RunConfig(
        config.molecule,
        config.cavity,
        config.tasks,
        config.grid,
        config.relaxation,
        sweep,
        config.output,
        config.filename,
        config.raw,
    )
