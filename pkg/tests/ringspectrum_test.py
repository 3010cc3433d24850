from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg

from ring_harvest.ringgeometry import build_geometry
from ring_harvest.ringgeometry import build_ring
from ring_harvest.ringhamiltonian import assemble_effective
from ring_harvest.ringhamiltonian import ideal_dicke_hamiltonian
from ring_harvest.ringhamiltonian import with_roles
from ring_harvest.ringmodel import DONOR
from ring_harvest.ringmodel import LATTICE
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import GeometrySpec
from ring_harvest.ringmodel import NumericalError
from ring_harvest.ringspectrum import BlochBands
from ring_harvest.ringspectrum import ModeSet
from ring_harvest.ringspectrum import ansatz_state
from ring_harvest.ringspectrum import angular_momenta
from ring_harvest.ringspectrum import bloch_bands
from ring_harvest.ringspectrum import bloch_bands_for
from ring_harvest.ringspectrum import center_analytics_from_couplings
from ring_harvest.ringspectrum import center_coupling_matrix
from ring_harvest.ringspectrum import center_modes
from ring_harvest.ringspectrum import chain_k_grid
from ring_harvest.ringspectrum import classify_bands
from ring_harvest.ringspectrum import diagonalize
from ring_harvest.ringspectrum import edge_localization
from ring_harvest.ringspectrum import group_velocity
from ring_harvest.ringspectrum import group_velocity_and_optimal_trap
from ring_harvest.ringspectrum import localize_degenerate_pairs
from ring_harvest.ringspectrum import recombine_by_band
from ring_harvest.ringspectrum import resonant_momenta
from ring_harvest.ringspectrum import ring_cell_blocks
from ring_harvest.ringspectrum import ring_center_analytics
from ring_harvest.ringspectrum import spin_wave_spectrum
from ring_harvest.ringspectrum import spin_waves_from_rows
from ring_harvest.ringspectrum import subradiant_detuning
from ring_harvest.ringspectrum import wilson_loop_phase


@pytest.fixture
def bare_chain() -> EmitterEnsemble:
    spec = GeometrySpec(
        kind="ring_chain", n_r=6, rings=4, d=0.1, d_r=0.09, donor_acceptor=False
    )
    return build_geometry(spec)


def _cosine_band(hopping: float, d_tilde: float, k_points: int = 16) -> BlochBands:
    """One band J(k) = 2 t cos(k d~) from nearest-cell hopping t."""
    blocks = np.zeros((3, 1, 1), dtype=complex)
    blocks[0, 0, 0] = hopping
    blocks[2, 0, 0] = hopping
    return bloch_bands(blocks, d_tilde, k_points)


def _two_site_blocks(intra: float, inter: float) -> np.ndarray:
    blocks = np.zeros((3, 2, 2), dtype=complex)
    blocks[1] = [[0, intra], [intra, 0]]
    blocks[2] = [[0, 0], [inter, 0]]
    blocks[0] = blocks[2].T
    return blocks


def _angular_distance(a: float, b: float) -> float:
    return abs((a - b + math.pi) % (2 * math.pi) - math.pi)


def test_diagonalize_ring_chain(bare_chain: EmitterEnsemble) -> None:
    modes = diagonalize(assemble_effective(bare_chain))

    assert modes.size == len(bare_chain)
    assert modes.residual < 1e-8
    assert np.all(np.diff(modes.shifts) >= 0)
    assert np.all(modes.decays > -1e-12)
    assert np.allclose(np.linalg.norm(modes.eigenvectors, axis=0), 1.0)


@pytest.mark.parametrize(
    ("n_r", "expected"),
    [(9, [-4, -3, -2, -1, 0, 1, 2, 3, 4]), (8, [-3, -2, -1, 0, 1, 2, 3, 4])],
)
def test_angular_momenta(n_r: int, expected: list[int]) -> None:
    assert angular_momenta(n_r) == expected


@pytest.mark.parametrize("n_r", [6, 8, 9])
def test_spin_waves_are_exact_eigenstates(n_r: int) -> None:
    ring = build_ring(n_r, 0.05)

    states = spin_wave_spectrum(ring)
    eigenvalues = np.linalg.eigvals(assemble_effective(ring).matrix)

    assert [state.m for state in states] == angular_momenta(n_r)
    assert max(state.residual for state in states) < 1e-10
    for state in states:
        assert np.min(np.abs(eigenvalues - state.eigenvalue)) < 1e-9


def test_spin_waves_ignore_center_donor() -> None:
    ring = build_geometry(GeometrySpec(kind="single_ring", n_r=8, d=0.05))

    assert len(spin_wave_spectrum(ring)) == 8


def test_spin_waves_need_one_ring(bare_chain: EmitterEnsemble) -> None:
    with pytest.raises(GeometryError):
        spin_wave_spectrum(bare_chain)


def test_dicke_collective_rates() -> None:
    waves = spin_waves_from_rows(np.zeros(5), np.ones(5))

    rates = {m: gamma for m, _, gamma in waves}
    assert rates[0] == pytest.approx(5.0)
    assert all(rates[m] == pytest.approx(0.0, abs=1e-12) for m in (-2, -1, 1, 2))


def test_dicke_center_mode() -> None:
    matrix = center_coupling_matrix(0.0, 9.0, 0.0, 1.0, 9, 0.0)

    plus, minus, vector = center_modes(matrix)

    assert minus.imag == pytest.approx(0.0, abs=1e-12)
    assert plus.imag == pytest.approx(-5.0)
    assert abs(vector[1]) ** 2 == pytest.approx(0.9)
    assert abs(vector[0]) ** 2 / 9 == pytest.approx(1 / 90)


def test_dicke_analytics() -> None:
    analytics = center_analytics_from_couplings(0.0, 10.0, 0.0, 1.0, 10)

    assert analytics.delta_sub == pytest.approx(0.0, abs=1e-4)
    assert analytics.gamma_eff < 1e-6
    assert analytics.delta_min_decay == pytest.approx(0.0, abs=1e-4)
    assert analytics.gamma_min_decay < 1e-6
    assert analytics.donor_fraction == pytest.approx(10 / 11, abs=1e-4)
    assert analytics.ring_fraction == pytest.approx(1 / 110, abs=1e-4)
    assert len(analytics.lambda_minus) == 601


def test_dicke_dark_subspace_holds_donor() -> None:
    hamiltonian = with_roles(ideal_dicke_hamiltonian(10), (LATTICE,) * 9 + (DONOR,))
    dark = scipy.linalg.null_space(hamiltonian.matrix)

    donor = np.zeros(10)
    donor[hamiltonian.donor_index] = 1.0

    assert dark.shape == (10, 9)
    assert np.linalg.norm(dark.conj().T @ donor) ** 2 == pytest.approx(0.9)


def test_ring_center_analytics_small_ring() -> None:
    ring = build_geometry(GeometrySpec(kind="single_ring", n_r=9, d=0.05))

    analytics = ring_center_analytics(ring)

    assert abs(analytics.delta_sub) < 0.5
    assert analytics.gamma_eff <= 1e-3
    assert analytics.n_r == 9
    assert 0.0 < analytics.donor_fraction <= 1.0
    assert analytics.delta_sub == pytest.approx(
        subradiant_detuning(
            analytics.j0_tilde, analytics.gamma0_tilde, analytics.j_d, analytics.gamma0
        )
    )
    assert analytics.gamma_min_decay <= analytics.gamma_eff
    assert analytics.lambda_minus.imag.max() <= -analytics.gamma_min_decay / 2 + 1e-12


def test_subradiant_detuning_closed_form() -> None:
    assert subradiant_detuning(-8.0, 9.0, -1.0) == pytest.approx(0.0)
    assert subradiant_detuning(-8.0, 9.0, -1.0, gamma0=2.0) == pytest.approx(4.5)


def test_ring_center_analytics_needs_center_donor() -> None:
    with pytest.raises(GeometryError):
        ring_center_analytics(build_ring(9, 0.05))


def test_chain_k_grid() -> None:
    grid = chain_k_grid(4, 0.5)

    assert grid == pytest.approx([2 * math.pi * q / 2.0 for q in (-1, 0, 1, 2)])


def test_ansatz_states_are_orthonormal(bare_chain: EmitterEnsemble) -> None:
    meta = bare_chain.metadata
    states = np.array(
        [
            ansatz_state(bare_chain, m, float(k))
            for m in angular_momenta(meta.n_r)
            for k in chain_k_grid(meta.rings, meta.ring_spacing)
        ]
    ).T

    gram = states.conj().T @ states
    assert np.allclose(gram, np.eye(gram.shape[0]), atol=1e-10)


def test_ansatz_state_rejects(bare_chain: EmitterEnsemble) -> None:
    zone = math.pi / bare_chain.metadata.ring_spacing

    with pytest.raises(ValueError):
        ansatz_state(bare_chain, 4, 0.0)
    with pytest.raises(ValueError):
        ansatz_state(bare_chain, 0, 1.5 * zone)


def test_single_ring_bands_are_exact() -> None:
    ring = build_ring(8, 0.05)

    bands = classify_bands(diagonalize(assemble_effective(ring)), ring)

    assert bands.low_confidence == 0
    assert all(point.fidelity > 1 - 1e-10 for point in bands.points)
    assert bands.edge_states == ()
    assert math.isnan(bands.min_gap)


def test_chain_band_labels(bare_chain: EmitterEnsemble) -> None:
    bands = classify_bands(diagonalize(assemble_effective(bare_chain)), bare_chain)

    assert len(bands.points) == len(bare_chain)
    assert {point.m_abs for point in bands.points} <= {0, 1, 2, 3}
    assert all(0 <= point.fidelity <= 1 for point in bands.points)
    assert bands.low_confidence == sum(not p.confident for p in bands.points)


def test_classify_bands_unmixes_degenerate_modes(bare_chain: EmitterEnsemble) -> None:
    d_tilde = bare_chain.metadata.ring_spacing
    ansatz = np.array(
        [
            ansatz_state(bare_chain, m, float(k))
            for m in angular_momenta(6)
            for k in chain_k_grid(4, d_tilde)
        ]
    ).T
    vectors = ansatz.copy()
    vectors[:, 0] = (ansatz[:, 0] + ansatz[:, 1]) / math.sqrt(2)
    vectors[:, 1] = (ansatz[:, 0] - ansatz[:, 1]) / math.sqrt(2)
    eigenvalues = np.concatenate([[0.0], np.arange(len(bare_chain) - 1)]) - 0.1j
    modes = ModeSet(eigenvalues.astype(complex), vectors)

    bands = classify_bands(modes, bare_chain)

    assert bands.low_confidence == 0
    assert bands.points[0].fidelity == pytest.approx(1.0)
    assert bands.points[1].fidelity == pytest.approx(1.0)
    assert sorted(point.k for point in bands.points[:2]) == pytest.approx(
        [0.0, 2 * math.pi / (4 * d_tilde)]
    )


def test_recombine_by_band_leaves_distinct_modes() -> None:
    modes = diagonalize(assemble_effective(build_ring(7, 0.05)))
    distinct = ModeSet(np.arange(7) - 0.5j, modes.eigenvectors)

    assert recombine_by_band(distinct, modes.eigenvectors.T, list(range(7))) is distinct


def test_classify_bands_needs_chain() -> None:
    lattice = build_geometry(
        GeometrySpec(kind="hexagonal", rows=3, columns=3, d=0.1, donor_acceptor=False)
    )

    with pytest.raises(GeometryError):
        classify_bands(diagonalize(assemble_effective(lattice)), lattice)


def test_edge_weights_partition_rings(bare_chain: EmitterEnsemble) -> None:
    report = edge_localization(diagonalize(assemble_effective(bare_chain)), bare_chain)

    assert np.allclose(report.edge_weight + report.bulk_weight, 1.0)
    assert np.allclose(report.left_weight + report.right_weight, report.edge_weight)
    assert np.allclose(report.corner_weight, 0.0)
    assert all(report.edge_weight[i] > 0.5 for i in report.edge_states)


def test_square_lattice_corners() -> None:
    lattice = build_geometry(
        GeometrySpec(
            kind="ring_lattice_square",
            n_r=6,
            rows=3,
            columns=3,
            d=0.1,
            donor_acceptor=False,
        )
    )

    report = edge_localization(diagonalize(assemble_effective(lattice)), lattice)

    assert np.allclose(report.edge_weight + report.bulk_weight, 1.0)
    assert np.all(report.corner_weight <= report.edge_weight + 1e-12)


def test_localized_pairs_stay_eigenvectors(bare_chain: EmitterEnsemble) -> None:
    hamiltonian = assemble_effective(bare_chain)
    matrix = hamiltonian.matrix
    modes = localize_degenerate_pairs(diagonalize(hamiltonian), bare_chain)

    residual = matrix @ modes.eigenvectors - modes.eigenvectors * modes.eigenvalues
    assert np.max(np.linalg.norm(residual, axis=0)) < 1e-5


def test_edge_localization_needs_rings() -> None:
    spec = GeometrySpec(kind="linear_chain", sites=5, d=0.1, donor_acceptor=False)
    chain = build_geometry(spec)

    with pytest.raises(GeometryError):
        edge_localization(diagonalize(assemble_effective(chain)), chain)


def test_cell_blocks_are_reciprocal() -> None:
    cell = build_ring(6, 0.1)

    blocks = ring_cell_blocks(cell, 0.3, cells=3)

    assert blocks.shape == (7, 6, 6)
    for n in range(1, 4):
        assert np.allclose(blocks[3 + n], blocks[3 - n].T)
    assert np.allclose(blocks[3], assemble_effective(cell).matrix)


def test_ring_chain_bloch_bands(bare_chain: EmitterEnsemble) -> None:
    bands = bloch_bands_for(bare_chain, k_points=16, cells=10)

    assert bands.eigenvalues.shape == (16, 6)
    assert bands.m_labels == (0, 1, 2, 3)
    assert np.allclose(bands.m_weights.sum(axis=2), 1.0)
    assert bands.k[0] == pytest.approx(-math.pi / bare_chain.metadata.ring_spacing)


def test_bloch_bands_need_chain() -> None:
    with pytest.raises(GeometryError):
        bloch_bands_for(build_ring(6, 0.1))
    with pytest.raises(ValueError):
        _cosine_band(1.0, 0.25, k_points=3)


def test_wilson_loop_of_half_filled_circle() -> None:
    angles = 2 * math.pi * np.arange(64) / 64
    vectors = [np.array([1.0, np.exp(1j * phi)]) / math.sqrt(2) for phi in angles]

    assert wilson_loop_phase(vectors) == pytest.approx(math.pi, abs=1e-10)


def test_wilson_loop_is_gauge_invariant() -> None:
    rng = np.random.default_rng(4)
    angles = 2 * math.pi * np.arange(48) / 48
    vectors = [
        np.array([math.cos(0.4), math.sin(0.4) * np.exp(1j * phi)]) for phi in angles
    ]
    regauged = [v * np.exp(1j * rng.uniform(0, 2 * math.pi)) for v in vectors]

    assert _angular_distance(
        wilson_loop_phase(vectors), wilson_loop_phase(regauged)
    ) < 1e-10


def test_wilson_loop_rejects_orthogonal_steps() -> None:
    vectors = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]

    with pytest.raises(NumericalError, match="ill-conditioned"):
        wilson_loop_phase(vectors)


@pytest.mark.parametrize(
    ("intra", "inter", "expected"), [(0.5, 1.0, math.pi), (1.0, 0.5, 0.0)]
)
def test_two_site_chain_berry_phase(
    intra: float,
    inter: float,
    expected: float,
) -> None:
    bands = bloch_bands(_two_site_blocks(intra, inter), 1.0, k_points=64)

    lower = [bands.eigenvectors[index][:, 0] for index in range(len(bands.k))]

    assert _angular_distance(wilson_loop_phase(lower), expected) < 1e-8


def test_group_velocity_of_cosine_band() -> None:
    bands = _cosine_band(1.0, 0.25)

    result = group_velocity_and_optimal_trap(bands, 0.0)

    assert result.k == pytest.approx(math.pi / 0.5, rel=1e-9)
    assert result.v_g == pytest.approx(0.5, rel=1e-6)
    assert result.gamma_t_opt == pytest.approx(2.0, rel=1e-6)
    assert result.m_abs == 0


def test_group_velocity_vanishes_at_band_edge() -> None:
    bands = _cosine_band(1.0, 0.25)

    assert group_velocity(bands, 0, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_group_velocity_step_convergence() -> None:
    bands = _cosine_band(0.7, 0.4)
    k = 1.3
    h = math.pi / (64 * 0.4)

    assert group_velocity(bands, 0, k, h) == pytest.approx(
        group_velocity(bands, 0, k, h / 2), abs=1e-6
    )


def test_resonant_momenta_of_cosine_band() -> None:
    bands = _cosine_band(1.0, 0.25)

    roots = resonant_momenta(bands, 0, 1.0)

    assert len(roots) == 1
    assert roots[0] == pytest.approx(math.pi / 3 / 0.25, rel=1e-9)


def test_no_resonant_band() -> None:
    with pytest.raises(NumericalError, match="No resonant k"):
        group_velocity_and_optimal_trap(_cosine_band(1.0, 0.25), 5.0)
    with pytest.raises(NumericalError):
        group_velocity_and_optimal_trap(_cosine_band(1.0, 0.25), 0.0, m_abs=1)
