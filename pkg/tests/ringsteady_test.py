from __future__ import annotations

import math
from unittest.mock import patch

import numpy as np
import pytest

from ring_harvest.ringcoupling import nearest_neighbor_coupling
from ring_harvest.ringgeometry import build_geometry
from ring_harvest.ringhamiltonian import assemble_effective
from ring_harvest.ringhamiltonian import beam_center
from ring_harvest.ringhamiltonian import gaussian_drive
from ring_harvest.ringmodel import GeometrySpec
from ring_harvest.ringmodel import NumericalError
from ring_harvest.ringsteady import single_emitter_trap_rate
from ring_harvest.ringsteady import solve_steady_state
from ring_harvest.ringsteady import steady_point
from ring_harvest.ringsteady import trapping_rate_scan


def test_single_emitter_rate_peaks_at_unit_trap() -> None:
    grid = np.logspace(-2, 2, 401)

    rates = [single_emitter_trap_rate(1e-3, float(gamma_t)) for gamma_t in grid]

    assert grid[int(np.argmax(rates))] == pytest.approx(1.0)
    assert single_emitter_trap_rate(1e-3, 1.0) == pytest.approx(1e-6)


@pytest.mark.parametrize("gamma_t", [0.1, 1.0, 4.0])
def test_driven_single_emitter_matches_formula(gamma_t: float) -> None:
    result = steady_point(
        GeometrySpec(kind="single_emitter"), gamma_t, waist=0.3, delta=0.0
    )

    assert result.effective_trap_rate == pytest.approx(
        single_emitter_trap_rate(1e-3, gamma_t), rel=1e-10
    )
    assert result.normalized_rate == pytest.approx(1.0, rel=1e-10)
    assert result.residual < 1e-15


def test_untrapped_rate_is_undefined() -> None:
    result = steady_point(GeometrySpec(kind="single_emitter"), 0.0, 0.3, 0.0)

    assert result.effective_trap_rate == 0.0
    assert math.isnan(result.normalized_rate)


def test_steady_state_is_linear_in_drive() -> None:
    spec = GeometrySpec(kind="ring_chain", n_r=6, rings=3, d=0.1)

    weak = steady_point(spec, 1.0, 0.3, 0.0, omega0=1e-4)
    strong = steady_point(spec, 1.0, 0.3, 0.0, omega0=1e-3)

    assert np.allclose(strong.amplitudes, 10 * weak.amplitudes, rtol=1e-9)
    assert strong.normalized_rate == pytest.approx(weak.normalized_rate, rel=1e-9)


def test_steady_state_solves_linear_system() -> None:
    ensemble = build_geometry(GeometrySpec(kind="free_pair", d=0.2, gamma_t=1.0))
    hamiltonian = assemble_effective(ensemble)
    drive = gaussian_drive(ensemble, 1e-3, 0.3, beam_center(ensemble, "donor"))

    result = solve_steady_state(hamiltonian, drive)

    assert np.allclose(hamiltonian.matrix @ result.amplitudes, -drive.amplitudes)
    assert result.acceptor_pop == pytest.approx(result.populations[1])
    assert result.trap_rate == 1.0


def test_steady_state_size_mismatch() -> None:
    pair = build_geometry(GeometrySpec(kind="free_pair", d=0.2, gamma_t=1.0))
    single = build_geometry(GeometrySpec(kind="single_emitter", gamma_t=1.0))
    drive = gaussian_drive(single, 1e-3, 0.3, (0.0, 0.0, 0.0))

    with pytest.raises(ValueError, match="Drive has"):
        solve_steady_state(assemble_effective(pair), drive)


def test_ill_conditioned_steady_state() -> None:
    ensemble = build_geometry(GeometrySpec(kind="free_pair", d=0.2, gamma_t=1.0))
    drive = gaussian_drive(ensemble, 1e-3, 0.3, (0.0, 0.0, 0.0))

    with patch("ring_harvest.ringsteady.np.linalg.cond", return_value=1e13):
        with pytest.raises(NumericalError, match="ill-conditioned"):
            solve_steady_state(assemble_effective(ensemble), drive)


def test_trapping_scan_of_single_emitter() -> None:
    grid = [0.1, 1.0, 10.0]

    curve = trapping_rate_scan(
        GeometrySpec(kind="single_emitter", d=0.06), grid, waist=0.3, delta=0.0
    )

    assert np.allclose(curve.normalized_rate, 1.0)
    assert curve.gamma_t.tolist() == grid
    assert curve.j_nn == pytest.approx(nearest_neighbor_coupling(0.06))
    assert np.allclose(curve.gamma_t_over_j, np.array(grid) / abs(curve.j_nn))
    assert curve.sigma0 == pytest.approx(3 / (2 * math.pi))
