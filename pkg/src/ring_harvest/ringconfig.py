from __future__ import annotations

import hashlib
import logging
import math
import os
import re
from configparser import ConfigParser
from configparser import Error as ConfigParserError
from typing import Mapping
from typing import Optional

import numpy as np

from ring_harvest.ringcoupling import nearest_neighbor_coupling
from ring_harvest.ringgeometry import ring_radius
from ring_harvest.ringmodel import GEOMETRY_KINDS
from ring_harvest.ringmodel import ConfigError
from ring_harvest.ringmodel import GeometrySpec

OUTPUT_ENV = "RING_HARVEST_OUTPUT"

ANALYSES = (
    "geometry",
    "coupling",
    "transport",
    "bands",
    "zak",
    "edges",
    "steady",
    "analytics",
    "trap_optimum",
)
DISORDER_TYPES = ("none", "frequency", "rotation")
OUTPUT_FORMATS = ("csv", "json", "svg", "stdout")
BEAM_TARGETS = ("donor", "acceptor")

# Every accepted key with its type. Sweep keys are "section.key" paths into
# the other sections and are validated separately.
SCHEMA: dict[str, dict[str, str]] = {
    "scenario": {"name": "str", "analysis": "analysis"},
    "geometry": {
        "kind": "kind",
        "n_r": "int",
        "rings": "int",
        "rows": "int",
        "columns": "int",
        "sites": "int",
        "d": "float",
        "radius": "float",
        "d_r": "float",
        "d_r_ratio": "ratio",
        "rotation": "float",
        "donor_acceptor": "bool",
        "center_donor": "bool",
    },
    "physics": {
        "delta": "delta",
        "acceptor_delta": "float",
        "gamma_t": "float",
        "gamma_t_over_j": "float",
        "gamma_t_grid": "grid",
        "gamma_t_over_j_grid": "grid",
        "delta_bounds": "grid",
        "omega0": "float",
        "waist": "float",
        "beam_center": "beam",
        "horizon": "float",
        "time_step": "float",
        "track_edge_states": "bool",
        "k_points": "int",
        "bloch_cells": "int",
        "zak_grids": "grid",
        "m_abs": "int",
    },
    "disorder": {
        "type": "disorder",
        "sigma": "float",
        "sigma_over_j": "float",
        "realizations": "int",
        "seed": "int",
    },
    "output": {
        "directory": "str",
        "formats": "formats",
        "plot": "bool",
    },
}
SWEEPABLE = ("geometry", "physics", "disorder")

NEW_CONFIG = """\
[scenario]
# name labels every output file of the run.
name = {name}

# One of: geometry, coupling, transport, bands, zak, edges, steady,
# analytics, trap_optimum
analysis = transport

[geometry]
# Lengths are in units of the resonant wavelength lambda0.
# Kinds: single_ring, ring_chain, ring_lattice_square, ring_lattice_hexagonal,
# linear_chain, hexagonal, honeycomb, free_pair, single_emitter
kind = ring_chain
n_r = 9
rings = 10
d = 0.05

# Inter-ring spacing as a ratio of d, or "parity" (1 for even N_R,
# sqrt(3)/2 for odd N_R). Set d_r to give it in lambda0 instead.
d_r_ratio = 0.9

[physics]
# Rates and frequencies are in units of Gamma0.
# delta may be "optimize" to maximize transport over delta_bounds.
delta = 0
gamma_t = 2
horizon = 150
time_step = 0.1

# Weak drive for the steady-state analysis.
omega0 = 0.001
waist = 0.3
beam_center = donor

[disorder]
# type: none, frequency or rotation
type = none
sigma = 0
realizations = 1
seed = 0

[sweep]
# Each line "section.key = grid" adds an axis, in order of appearance.
# Grids: comma lists, a..b, linspace(a, b, n), logspace(a, b, n)

[output]
# Defaults to ${env} or the current directory.
directory =
formats = csv, json
plot = false
"""

_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")
_SPACE = re.compile(r"^\s*(linspace|logspace)\((.*)\)\s*$")


def parse_grid(text: str) -> list[str]:
    """Expand a grid expression into its value strings."""
    text = text.strip()
    if not text:
        return []

    match = _RANGE.match(text)
    if match:
        start, stop = int(match.group(1)), int(match.group(2))
        if stop < start:
            raise ValueError(f"Empty range '{text}'")
        return [str(value) for value in range(start, stop + 1)]

    match = _SPACE.match(text)
    if match:
        arguments = [part.strip() for part in match.group(2).split(",")]
        if len(arguments) != 3:
            raise ValueError(f"{match.group(1)} needs (start, stop, count): '{text}'")
        start, stop, count = float(arguments[0]), float(arguments[1]), int(arguments[2])
        space = np.linspace if match.group(1) == "linspace" else np.logspace
        return [format(float(value), ".17g") for value in space(start, stop, count)]

    values = [part.strip() for part in text.split(",") if part.strip()]
    for value in values:
        float(value)
    return values


def grid_values(text: str) -> list[float]:
    return [float(value) for value in parse_grid(text)]


class ScenarioConfig:
    """Configuration for one scenario run."""

    logger = logging.getLogger(__name__)

    def __init__(self, filepath: Optional[str] = None) -> None:
        """Load and validate the configuration from the given file."""
        self._config = ConfigParser(interpolation=None)
        self._config.optionxform = str  # type: ignore[assignment, method-assign]
        self.source = filepath or "<string>"
        self.provenance: list[str] = []

        if filepath is not None:
            try:
                success = self._config.read(filepath)
            except ConfigParserError as error:
                raise ConfigError(f"Could not parse {filepath}: {error}") from error

            if not success:
                raise ConfigError(f"Could not read config file at {filepath}")

            self.validate()
            self.logger.debug("Loaded config from %s", filepath)

    @classmethod
    def from_string(cls, text: str, source: str = "<string>") -> ScenarioConfig:
        config = cls()
        config.source = source
        try:
            config._config.read_string(text, source=source)
        except ConfigParserError as error:
            raise ConfigError(f"Could not parse {source}: {error}") from error
        config.validate()
        return config

    def validate(self) -> None:
        """Raise ConfigError naming the first unknown or malformed field."""
        for section in self._config.sections():
            if section == "sweep":
                self._validate_sweep()
                continue
            if section not in SCHEMA:
                raise ConfigError(f"Unknown section [{section}]")
            for key, value in self._config.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"Unknown key {section}.{key}")
                _check_value(f"{section}.{key}", SCHEMA[section][key], value)

        if self.geometry_kind not in GEOMETRY_KINDS:
            raise ConfigError(f"geometry.kind: unknown kind '{self.geometry_kind}'")

    def _validate_sweep(self) -> None:
        for path, grid in self._config.items("sweep"):
            section, _, key = path.partition(".")
            if section not in SWEEPABLE or key not in SCHEMA[section]:
                raise ConfigError(f"sweep.{path}: not a sweepable parameter")
            try:
                values = parse_grid(grid)
            except ValueError as error:
                raise ConfigError(f"sweep.{path}: {error}") from error
            if not values:
                raise ConfigError(f"sweep.{path}: empty grid")
            for value in values:
                _check_value(f"sweep.{path}", SCHEMA[section][key], value)

    def override(self, assignment: str, record: bool = True) -> None:
        """
        Apply one "section.key=value" assignment.

        Recorded assignments are listed in the provenance as user overrides.
        """
        path, separator, value = assignment.partition("=")
        section, _, key = path.strip().partition(".")
        if not separator or not section or not key:
            raise ConfigError(f"Override '{assignment}' is not section.key=value")

        self._set(section, key, value.strip())
        self.validate()
        if record:
            self.provenance.append(f"--set {section}.{key}={value.strip()}")
        self.logger.debug("Override %s.%s=%s", section, key, value.strip())

    def with_values(self, values: Mapping[str, str]) -> ScenarioConfig:
        """Copy of this config with "section.key" values replaced and no sweep."""
        clone = ScenarioConfig.from_string(self.to_string(), self.source)
        clone.provenance = list(self.provenance)
        if clone._config.has_section("sweep"):
            clone._config.remove_section("sweep")
        for path, value in values.items():
            section, _, key = path.partition(".")
            clone._set(section, key, value)
        clone.validate()
        return clone

    def to_string(self) -> str:
        """Canonical text: sections and keys sorted, one "key = value" per line."""
        lines: list[str] = []
        for section in sorted(self._config.sections()):
            lines.append(f"[{section}]")
            for key, value in sorted(self._config.items(section)):
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_string().encode("utf-8")).hexdigest()

    def _set(self, section: str, key: str, value: str) -> None:
        if not self._config.has_section(section):
            self._config.add_section(section)
        self._config.set(section, key, value)

    def _get(self, section: str, key: str) -> Optional[str]:
        value = self._config.get(section, key, fallback="").strip()
        return value or None

    @property
    def name(self) -> str:
        """Return the scenario name used in output file names."""
        return self._config.get("scenario", "name", fallback="ring_harvest")

    @property
    def analysis(self) -> str:
        """Return the analysis to run."""
        return self._config.get("scenario", "analysis", fallback="transport")

    @property
    def geometry_kind(self) -> str:
        return self._config.get("geometry", "kind", fallback="ring_chain")

    @property
    def n_r(self) -> int:
        return self._config.getint("geometry", "n_r", fallback=9)

    @property
    def d(self) -> float:
        """Return the emitter spacing, derived from the ring radius when given."""
        radius = self._get("geometry", "radius")
        if radius is not None:
            return 2 * float(radius) * math.sin(math.pi / self.n_r)
        return self._config.getfloat("geometry", "d", fallback=0.05)

    @property
    def d_r(self) -> float:
        """Return the inter-ring spacing in lambda0."""
        absolute = self._get("geometry", "d_r")
        if absolute is not None:
            return float(absolute)
        ratio = self._get("geometry", "d_r_ratio") or "1"
        if ratio == "parity":
            return self.d * (1.0 if self.n_r % 2 == 0 else math.sqrt(3) / 2)
        return self.d * float(ratio)

    @property
    def radius(self) -> float:
        return ring_radius(self.n_r, self.d)

    @property
    def j_nn(self) -> float:
        """Return the nearest-neighbor coherent coupling J at spacing d."""
        return nearest_neighbor_coupling(self.d)

    @property
    def delta_optimized(self) -> bool:
        return self._get("physics", "delta") == "optimize"

    @property
    def delta(self) -> float:
        """Return the donor/acceptor detuning (0 when it is optimized)."""
        if self.delta_optimized:
            return 0.0
        return self._config.getfloat("physics", "delta", fallback=0.0)

    @property
    def acceptor_delta(self) -> Optional[float]:
        value = self._get("physics", "acceptor_delta")
        return None if value is None else float(value)

    @property
    def delta_bounds(self) -> tuple[float, float]:
        values = grid_values(self._get("physics", "delta_bounds") or "-15, 15")
        if len(values) != 2 or values[0] >= values[1]:
            raise ConfigError("physics.delta_bounds: expected 'low, high'")
        return values[0], values[1]

    @property
    def gamma_t(self) -> float:
        """Return the trap rate, scaled by |J| when gamma_t_over_j is set."""
        relative = self._get("physics", "gamma_t_over_j")
        if relative is not None:
            return float(relative) * abs(self.j_nn)
        return self._config.getfloat("physics", "gamma_t", fallback=0.0)

    @property
    def gamma_t_grid(self) -> list[float]:
        """Return the trap-rate grid of steady and trap_optimum analyses."""
        relative = self._get("physics", "gamma_t_over_j_grid")
        if relative is not None:
            return [value * abs(self.j_nn) for value in grid_values(relative)]
        absolute = self._get("physics", "gamma_t_grid")
        return grid_values(absolute) if absolute else [self.gamma_t]

    @property
    def omega0(self) -> float:
        return self._config.getfloat("physics", "omega0", fallback=1e-3)

    @property
    def waist(self) -> float:
        return self._config.getfloat("physics", "waist", fallback=0.3)

    @property
    def beam_center(self) -> str:
        return self._config.get("physics", "beam_center", fallback="donor")

    @property
    def horizon(self) -> float:
        return self._config.getfloat("physics", "horizon", fallback=150.0)

    @property
    def time_step(self) -> float:
        return self._config.getfloat("physics", "time_step", fallback=0.1)

    @property
    def track_edge_states(self) -> bool:
        return self._config.getboolean("physics", "track_edge_states", fallback=False)

    @property
    def k_points(self) -> int:
        return self._config.getint("physics", "k_points", fallback=128)

    @property
    def bloch_cells(self) -> int:
        return self._config.getint("physics", "bloch_cells", fallback=50)

    @property
    def zak_grids(self) -> list[int]:
        grids = self._get("physics", "zak_grids") or "64, 128, 256"
        return [int(value) for value in grid_values(grids)]

    @property
    def m_abs(self) -> Optional[int]:
        value = self._get("physics", "m_abs")
        return None if value is None else int(value)

    @property
    def disorder_type(self) -> str:
        return self._config.get("disorder", "type", fallback="none")

    @property
    def sigma(self) -> float:
        """Return the frequency-disorder width, scaled by |J| when requested."""
        relative = self._get("disorder", "sigma_over_j")
        if relative is not None:
            return float(relative) * abs(self.j_nn)
        return self._config.getfloat("disorder", "sigma", fallback=0.0)

    @property
    def realizations(self) -> int:
        return self._config.getint("disorder", "realizations", fallback=1)

    @property
    def seed(self) -> int:
        return self._config.getint("disorder", "seed", fallback=0)

    @property
    def sweep_axes(self) -> list[tuple[str, list[str]]]:
        """Return the sweep axes in order of appearance."""
        if not self._config.has_section("sweep"):
            return []
        return [(path, parse_grid(grid)) for path, grid in self._config.items("sweep")]

    @property
    def output_directory(self) -> str:
        """Return the output directory, falling back to $RING_HARVEST_OUTPUT."""
        directory = self._get("output", "directory")
        return directory or os.environ.get(OUTPUT_ENV, ".")

    @property
    def formats(self) -> list[str]:
        text = self._config.get("output", "formats", fallback="csv, json")
        formats = [part.strip() for part in text.split(",") if part.strip()]
        if self._config.getboolean("output", "plot", fallback=False):
            formats.append("svg")
        return sorted(set(formats), key=OUTPUT_FORMATS.index)

    def geometry_spec(self) -> GeometrySpec:
        """Return the GeometrySpec described by [geometry] and [physics]."""
        geometry = self._config
        return GeometrySpec(
            kind=self.geometry_kind,
            n_r=self.n_r,
            rings=geometry.getint("geometry", "rings", fallback=1),
            rows=geometry.getint("geometry", "rows", fallback=1),
            columns=geometry.getint("geometry", "columns", fallback=1),
            sites=geometry.getint("geometry", "sites", fallback=2),
            d=self.d,
            d_r=self.d_r,
            rotation=geometry.getfloat("geometry", "rotation", fallback=0.0),
            delta=self.delta,
            acceptor_delta=self.acceptor_delta,
            gamma_t=self.gamma_t,
            donor_acceptor=geometry.getboolean(
                "geometry", "donor_acceptor", fallback=True
            ),
            center_donor=geometry.getboolean("geometry", "center_donor", fallback=True),
        )


def write_new_config(filename: str) -> None:
    """Write a new config file if one does not exist."""
    if os.path.exists(filename):
        return

    name = os.path.splitext(os.path.basename(filename))[0]
    config = NEW_CONFIG.format(name=name, env=OUTPUT_ENV)

    with open(filename, "w") as config_file:
        config_file.write(config)


def _check_value(path: str, kind: str, value: str) -> None:
    value = value.strip()
    try:
        if kind == "int":
            int(value)
        elif kind == "float" and value:
            float(value)
        elif kind == "bool":
            if value.lower() not in ConfigParser.BOOLEAN_STATES:
                raise ValueError(f"'{value}' is not a boolean")
        elif kind == "grid":
            parse_grid(value)
        elif kind == "ratio" and value != "parity":
            float(value)
        elif kind == "delta" and value != "optimize":
            float(value)
        elif kind in _CHOICES and value not in _CHOICES[kind]:
            raise ValueError(f"'{value}' is not one of {', '.join(_CHOICES[kind])}")
        elif kind == "formats":
            for part in (p.strip() for p in value.split(",") if p.strip()):
                if part not in OUTPUT_FORMATS:
                    raise ValueError(f"unknown output format '{part}'")
    except ValueError as error:
        raise ConfigError(f"{path}: {error}") from error


_CHOICES: dict[str, tuple[str, ...]] = {
    "analysis": ANALYSES,
    "kind": GEOMETRY_KINDS,
    "disorder": DISORDER_TYPES,
    "beam": BEAM_TARGETS,
}
