from __future__ import annotations

import math
import os
from pathlib import Path
from unittest.mock import patch

import pytest

from ring_harvest.ringconfig import NEW_CONFIG
from ring_harvest.ringconfig import OUTPUT_ENV
from ring_harvest.ringconfig import ScenarioConfig
from ring_harvest.ringconfig import grid_values
from ring_harvest.ringconfig import parse_grid
from ring_harvest.ringconfig import write_new_config
from ring_harvest.ringcoupling import nearest_neighbor_coupling
from ring_harvest.ringmodel import ConfigError

CONFIG_PATH = "tests/test_config.ini"

MINIMAL = """
[scenario]
name = minimal

[geometry]
kind = ring_chain
n_r = 6
"""


def test_scenarioconfig_raises_on_invalid_config_path() -> None:
    with pytest.raises(ValueError):
        ScenarioConfig("foo/bar")


def test_scenarioconfig_loads_test_fixture_completely() -> None:
    config = ScenarioConfig(CONFIG_PATH)

    assert config.name == "test_scenario"
    assert config.analysis == "transport"

    assert config.geometry_kind == "ring_chain"
    assert config.n_r == 6
    assert config.d == 0.1
    assert config.d_r == pytest.approx(0.09)

    assert config.delta == 0.5
    assert config.delta_optimized is False
    assert config.acceptor_delta is None
    assert config.delta_bounds == (-5.0, 5.0)
    assert config.gamma_t == 1.0
    assert config.gamma_t_grid == [1.0]
    assert config.horizon == 20.0
    assert config.time_step == 0.5
    assert config.omega0 == 0.001
    assert config.waist == 0.3
    assert config.beam_center == "donor"
    assert config.k_points == 64
    assert config.bloch_cells == 20
    assert config.zak_grids == [32, 64]
    assert config.m_abs is None
    assert config.track_edge_states is False

    assert config.disorder_type == "frequency"
    assert config.sigma == 0.25
    assert config.realizations == 2
    assert config.seed == 7

    assert config.sweep_axes == []
    assert config.output_directory == "test_output"
    assert config.formats == ["csv", "json"]


def test_geometry_spec_from_fixture() -> None:
    spec = ScenarioConfig(CONFIG_PATH).geometry_spec()

    assert spec.kind == "ring_chain"
    assert spec.n_r == 6
    assert spec.rings == 3
    assert spec.d_r == pytest.approx(0.09)
    assert spec.delta == 0.5
    assert spec.gamma_t == 1.0
    assert spec.donor_acceptor is True


def test_defaults() -> None:
    config = ScenarioConfig.from_string(MINIMAL)

    assert config.analysis == "transport"
    assert config.d == 0.05
    assert config.d_r == 0.05
    assert config.gamma_t == 0.0
    assert config.horizon == 150.0
    assert config.realizations == 1
    assert config.disorder_type == "none"
    assert config.zak_grids == [64, 128, 256]
    assert config.delta_bounds == (-15.0, 15.0)


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("[plot]\nwidth = 3\n", r"Unknown section \[plot\]"),
        ("[geometry]\nspacing = 3\n", "Unknown key geometry.spacing"),
        ("[geometry]\nn_r = nine\n", "geometry.n_r"),
        ("[geometry]\nkind = triangle\n", "geometry.kind"),
        ("[physics]\ndelta = fast\n", "physics.delta"),
        ("[physics]\ntrack_edge_states = maybe\n", "physics.track_edge_states"),
        ("[output]\nformats = csv, xml\n", "output.formats"),
        ("[sweep]\nplot.width = 1, 2\n", "sweep.plot.width"),
        ("[sweep]\ngeometry.n_r = 5..3\n", "sweep.geometry.n_r"),
        ("[sweep]\ngeometry.n_r = a, b\n", "sweep.geometry.n_r"),
        ("[geometry]\nn_r\n", "Could not parse"),
    ],
)
def test_validation_names_the_field(text: str, message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        ScenarioConfig.from_string(text)


def test_unreadable_file_is_config_error(tmp_path: Path) -> None:
    path = tmp_path / "broken.ini"
    path.write_text("no section header\n")

    with pytest.raises(ConfigError, match="Could not parse"):
        ScenarioConfig(str(path))


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("3..5", ["3", "4", "5"]),
        ("-1..1", ["-1", "0", "1"]),
        ("1, 2.5, 4", ["1", "2.5", "4"]),
        ("linspace(0, 1, 3)", ["0", "0.5", "1"]),
        ("", []),
    ],
)
def test_parse_grid(text: str, expected: list[str]) -> None:
    assert parse_grid(text) == expected


def test_logspace_grid() -> None:
    assert grid_values("logspace(0, 2, 3)") == pytest.approx([1.0, 10.0, 100.0])


@pytest.mark.parametrize("text", ["4..2", "linspace(0, 1)", "1, x"])
def test_parse_grid_rejects(text: str) -> None:
    with pytest.raises(ValueError):
        parse_grid(text)


def test_sweep_axes_keep_order() -> None:
    text = MINIMAL + "\n[sweep]\ngeometry.n_r = 3..4\nphysics.delta = -1, 1\n"

    config = ScenarioConfig.from_string(text)

    assert config.sweep_axes == [
        ("geometry.n_r", ["3", "4"]),
        ("physics.delta", ["-1", "1"]),
    ]


def test_override_records_provenance() -> None:
    config = ScenarioConfig(CONFIG_PATH)

    config.override("physics.gamma_t = 3")
    config.override("scenario.analysis=bands")

    assert config.gamma_t == 3.0
    assert config.analysis == "bands"
    assert config.provenance == [
        "--set physics.gamma_t=3",
        "--set scenario.analysis=bands",
    ]


def test_unrecorded_override() -> None:
    config = ScenarioConfig(CONFIG_PATH)

    config.override("scenario.analysis=steady", record=False)

    assert config.analysis == "steady"
    assert config.provenance == []


@pytest.mark.parametrize("assignment", ["gamma_t=3", "physics.gamma_t", "=3"])
def test_override_rejects_malformed(assignment: str) -> None:
    with pytest.raises(ConfigError, match="section.key=value"):
        ScenarioConfig(CONFIG_PATH).override(assignment)


def test_override_rejects_unknown_key() -> None:
    with pytest.raises(ConfigError, match="Unknown key physics.speed"):
        ScenarioConfig(CONFIG_PATH).override("physics.speed=3")


def test_with_values_drops_sweep() -> None:
    config = ScenarioConfig.from_string(MINIMAL + "\n[sweep]\ngeometry.n_r = 3..4\n")
    config.override("physics.gamma_t=2")

    point = config.with_values({"geometry.n_r": "4", "physics.delta": "1.5"})

    assert point.n_r == 4
    assert point.delta == 1.5
    assert point.gamma_t == 2.0
    assert point.sweep_axes == []
    assert point.provenance == config.provenance
    assert config.n_r == 6


def test_hash_ignores_key_order() -> None:
    first = ScenarioConfig.from_string("[geometry]\nn_r = 6\nd = 0.1\n")
    second = ScenarioConfig.from_string("[geometry]\nd = 0.1\nn_r = 6\n")
    third = ScenarioConfig.from_string("[geometry]\nd = 0.1\nn_r = 7\n")

    assert first.config_hash() == second.config_hash()
    assert first.config_hash() != third.config_hash()
    assert len(first.config_hash()) == 64


def test_to_string_round_trips() -> None:
    config = ScenarioConfig(CONFIG_PATH)

    clone = ScenarioConfig.from_string(config.to_string())

    assert clone.config_hash() == config.config_hash()


def test_spacing_from_radius() -> None:
    config = ScenarioConfig.from_string(
        "[geometry]\nn_r = 9\nradius = 0.08\nd_r_ratio = parity\n"
    )

    assert config.d == pytest.approx(2 * 0.08 * math.sin(math.pi / 9))
    assert config.radius == pytest.approx(0.08)
    assert config.d_r == pytest.approx(config.d * math.sqrt(3) / 2)


def test_parity_spacing_of_even_ring() -> None:
    config = ScenarioConfig.from_string("[geometry]\nn_r = 8\nd_r_ratio = parity\n")

    assert config.d_r == config.d


def test_absolute_inter_ring_spacing_wins() -> None:
    config = ScenarioConfig.from_string("[geometry]\nd_r = 0.2\nd_r_ratio = 0.5\n")

    assert config.d_r == 0.2


def test_rates_relative_to_coupling() -> None:
    config = ScenarioConfig.from_string(
        "[geometry]\nd = 0.06\n[physics]\ngamma_t = 5\ngamma_t_over_j = 0.5\n"
        "gamma_t_over_j_grid = 1, 2\n[disorder]\nsigma_over_j = 0.25\n"
    )
    j_nn = abs(nearest_neighbor_coupling(0.06))

    assert config.gamma_t == pytest.approx(0.5 * j_nn)
    assert config.gamma_t_grid == pytest.approx([j_nn, 2 * j_nn])
    assert config.sigma == pytest.approx(0.25 * j_nn)


def test_absolute_trap_grid() -> None:
    config = ScenarioConfig.from_string("[physics]\ngamma_t_grid = 0.1, 1\n")

    assert config.gamma_t_grid == [0.1, 1.0]


def test_optimized_delta() -> None:
    config = ScenarioConfig.from_string("[physics]\ndelta = optimize\n")

    assert config.delta_optimized is True
    assert config.delta == 0.0
    assert config.geometry_spec().delta == 0.0


@pytest.mark.parametrize("bounds", ["5, -5", "1", "1, 2, 3"])
def test_invalid_delta_bounds(bounds: str) -> None:
    config = ScenarioConfig.from_string(f"[physics]\ndelta_bounds = {bounds}\n")

    with pytest.raises(ConfigError, match="delta_bounds"):
        config.delta_bounds


def test_output_directory_from_environment() -> None:
    config = ScenarioConfig.from_string(MINIMAL)

    with patch.dict(os.environ, {OUTPUT_ENV: "env_output"}):
        assert config.output_directory == "env_output"

    with patch.dict(os.environ, clear=True):
        assert config.output_directory == "."


def test_plot_adds_svg() -> None:
    text = "[output]\nformats = json, stdout\nplot = true\n"
    config = ScenarioConfig.from_string(text)

    assert config.formats == ["json", "svg", "stdout"]


def test_write_new_config(tmp_path: Path) -> None:
    path = tmp_path / "my_scenario.ini"

    write_new_config(str(path))
    config = ScenarioConfig(str(path))

    assert config.name == "my_scenario"
    assert config.analysis == "transport"
    assert config.sweep_axes == []
    assert OUTPUT_ENV in path.read_text()


def test_write_new_config_keeps_existing_file(tmp_path: Path) -> None:
    path = tmp_path / "existing.ini"
    path.write_text("[scenario]\nname = keep\n")

    write_new_config(str(path))

    assert path.read_text() == "[scenario]\nname = keep\n"


def test_new_config_template_is_valid() -> None:
    config = ScenarioConfig.from_string(NEW_CONFIG.format(name="template", env="X"))

    assert config.geometry_spec().rings == 10
    assert config.d_r == pytest.approx(0.045)
