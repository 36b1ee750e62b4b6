"""YAML scenario files for ``squintsense sweep``.

A scenario file mirrors :class:`~squintsense.experiments.ScenarioConfig`
plus an ``output`` path. Units: frequencies in Hz (a suffix such as
``30GHz`` is accepted), angles in degrees, SNR in dB (``.inf`` allowed).
``sensing_range_deg: auto`` lets squint-split pick its own range.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass

import yaml

from .errors import ConfigError
from .experiments import ScenarioConfig
from .wideband import SystemConfig

_UNITS = {"": 1.0, "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
_FREQ_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Z]*)\s*$")

TOP_KEYS = {"output", "method", "base", "aod_range_deg", "sensing_range_deg", "snr_db_list", "n_list",
            "m_list", "trials", "seed", "uncovered_policy", "fallback_nearest"}
REQUIRED_TOP = {"output", "method", "base", "aod_range_deg", "snr_db_list", "n_list", "m_list", "trials"}
BASE_KEYS = {"antenna_count", "spacing_ratio", "carrier_hz", "bandwidth_hz", "subcarrier_count", "rf_chains"}
REQUIRED_BASE = {"spacing_ratio", "carrier_hz", "bandwidth_hz"}


class ScenarioFileError(ConfigError):
    """Scenario parse or validation error carrying a 1-based source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = "<scenario>"):
        self.line, self.column, self.source = line, column, source
        where = f"{source}:{line}:{column}: " if line is not None else f"{source}: "
        super().__init__(where + message)


def parse_frequency(value) -> float:
    """``30e9``, ``"30GHz"`` or ``"6 GHz"`` to Hz."""
    if isinstance(value, bool):
        raise ValueError(f"not a frequency: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    m = _FREQ_RE.match(str(value))
    if not m or m.group(2).lower() not in _UNITS:
        raise ValueError(f"not a frequency: {value!r}")
    return float(m.group(1)) * _UNITS[m.group(2).lower()]


@dataclass(frozen=True)
class ScenarioFile:
    scenario: ScenarioConfig
    output: str


def _key_mark(node, path):
    """Start mark of the key (or value) at ``path`` in a composed YAML tree."""
    mark = node.start_mark if node is not None else None
    for key in path:
        if not isinstance(node, yaml.MappingNode):
            break
        for k, v in node.value:
            if k.value == key:
                mark, node = k.start_mark, v
                break
        else:
            break
    return mark


def _fail(msg, root, path, source):
    mark = _key_mark(root, path)
    if mark is None:
        raise ScenarioFileError(msg, source=source)
    raise ScenarioFileError(msg, mark.line + 1, mark.column + 1, source)


def _pair(value, name, root, source):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(f"{name} must be a two-element list", root, [name], source)
    return (float(value[0]), float(value[1]))


def load_scenario(text: str, source: str = "<scenario>") -> ScenarioFile:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ScenarioFileError(f"YAML syntax error: {exc.problem or exc}", line, col, source) from exc
    if not isinstance(data, dict):
        raise ScenarioFileError("scenario must be a mapping", 1, 1, source)

    for key in data:
        if key not in TOP_KEYS:
            _fail(f"unknown key {key!r}", root, [key], source)
    missing = sorted(REQUIRED_TOP - data.keys())
    if missing:
        raise ScenarioFileError(f"missing required key(s): {', '.join(missing)}", 1, 1, source)
    base = data["base"]
    if not isinstance(base, dict):
        _fail("base must be a mapping", root, ["base"], source)
    for key in base:
        if key not in BASE_KEYS:
            _fail(f"unknown key {key!r} in base", root, ["base", key], source)
    missing = sorted(REQUIRED_BASE - base.keys())
    if missing:
        _fail(f"missing required key(s) in base: {', '.join(missing)}", root, ["base"], source)

    try:
        n_list = tuple(int(v) for v in data["n_list"])
        m_list = tuple(int(v) for v in data["m_list"])
        snr = tuple(float(v) for v in data["snr_db_list"])
    except (TypeError, ValueError) as exc:
        raise ScenarioFileError(f"bad list value: {exc}", source=source) from exc
    if not n_list or not m_list:
        _fail("n_list and m_list must be nonempty", root, ["n_list"], source)

    try:
        config = SystemConfig(
            antenna_count=int(base.get("antenna_count", m_list[0])),
            spacing_ratio=float(base["spacing_ratio"]),
            carrier_hz=parse_frequency(base["carrier_hz"]),
            bandwidth_hz=parse_frequency(base["bandwidth_hz"]),
            subcarrier_count=int(base.get("subcarrier_count", n_list[0])),
            rf_chains=int(base.get("rf_chains", 1)),
        )
    except (TypeError, ValueError) as exc:
        _fail(str(exc), root, ["base"], source)

    rng = data.get("sensing_range_deg", "auto")
    sensing = None if rng in (None, "auto") else _pair(rng, "sensing_range_deg", root, source)
    fallback = data.get("fallback_nearest", True)
    if not isinstance(fallback, bool):
        _fail("fallback_nearest must be true or false", root, ["fallback_nearest"], source)
    output = data["output"]
    if not isinstance(output, str) or not output:
        _fail("output must be a path string", root, ["output"], source)

    sc = ScenarioConfig(
        base=config,
        method=str(data["method"]),
        aod_range_deg=_pair(data["aod_range_deg"], "aod_range_deg", root, source),
        sensing_range_deg=sensing,
        snr_db_list=snr,
        n_list=n_list,
        m_list=m_list,
        trials=int(data["trials"]),
        seed=int(data.get("seed", 0)),
        uncovered_policy=str(data.get("uncovered_policy", "exclude")),
        fallback_nearest=fallback,
    )
    try:
        sc.validate()
    except ConfigError as exc:
        raise ScenarioFileError(str(exc), source=source) from exc
    return ScenarioFile(sc, output)


def read_scenario(path) -> ScenarioFile:
    with open(path) as fh:
        return load_scenario(fh.read(), str(path))


def dump_scenario(sf: ScenarioFile) -> str:
    """Resolved scenario as YAML; ``load_scenario`` of the result reproduces ``sf``."""
    sc = sf.scenario
    doc = {
        "output": sf.output,
        "method": sc.method,
        "base": asdict(sc.base),
        "aod_range_deg": list(sc.aod_range_deg),
        "sensing_range_deg": "auto" if sc.sensing_range_deg is None else list(sc.sensing_range_deg),
        "snr_db_list": list(sc.snr_db_list),
        "n_list": list(sc.n_list),
        "m_list": list(sc.m_list),
        "trials": sc.trials,
        "seed": sc.seed,
        "uncovered_policy": sc.uncovered_policy,
        "fallback_nearest": sc.fallback_nearest,
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
