"""
Eigenmodes, spin waves, ring-chain band structure and band topology.

Finite lattices are diagonalized directly. The infinite ring chain is
handled with Bloch's theorem on a one-ring unit cell whose long-range
couplings are truncated at `BLOCH_CELLS` cells on either side.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from typing import Optional
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import brentq
from scipy.optimize import minimize_scalar

from ring_harvest.ringcoupling import coupling_matrices
from ring_harvest.ringcoupling import cross_couplings
from ring_harvest.ringhamiltonian import assemble_effective
from ring_harvest.ringmodel import LATTICE
from ring_harvest.ringmodel import BoolArray
from ring_harvest.ringmodel import ComplexArray
from ring_harvest.ringmodel import EffectiveHamiltonian
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import EnsembleMetadata
from ring_harvest.ringmodel import FloatArray
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import NumericalError

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9
CIRCULANT_TOLERANCE = 1e-10
CONFIDENCE_THRESHOLD = 0.5
EDGE_THRESHOLD = 0.5
MIN_WILSON_OVERLAP = 0.1
BLOCH_CELLS = 50
BRANCH_LIMIT = 1 / 3
CHAIN_KINDS = ("single_ring", "ring_chain")
LATTICE_2D_KINDS = ("ring_lattice_square", "ring_lattice_hexagonal")


@dataclasses.dataclass(frozen=True, eq=False)
class ModeSet:
    """
    Eigenpairs sorted by shift Re(lambda), ties by decay.

    Eigenvectors are the unit-normalized columns of `eigenvectors`.
    """

    eigenvalues: ComplexArray
    eigenvectors: ComplexArray
    residual: float = 0.0
    recombined: bool = False

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def shifts(self) -> FloatArray:
        return np.asarray(self.eigenvalues.real)

    @property
    def decays(self) -> FloatArray:
        return np.asarray(-2 * self.eigenvalues.imag)


@dataclasses.dataclass(frozen=True, eq=False)
class SpinWaveState:
    m: int
    amplitudes: ComplexArray
    shift: float
    decay: float
    residual: float = 0.0

    @property
    def eigenvalue(self) -> complex:
        return complex(self.shift, -self.decay / 2)


@dataclasses.dataclass(frozen=True)
class BandPoint:
    mode_index: int
    m_abs: int
    k: float
    shift: float
    decay: float
    fidelity: float
    confident: bool
    edge_weight: float = 0.0
    corner_weight: float = 0.0


@dataclasses.dataclass(frozen=True, eq=False)
class EdgeStateReport:
    """Ring-resolved localization of every mode."""

    modes: ModeSet
    edge_weight: FloatArray
    bulk_weight: FloatArray
    left_weight: FloatArray
    right_weight: FloatArray
    corner_weight: FloatArray
    superradiant: BoolArray
    edge_states: tuple[int, ...]
    threshold: float = EDGE_THRESHOLD


@dataclasses.dataclass(frozen=True, eq=False)
class BandStructure:
    """
    Finite ring-chain modes labelled by (|m|, |k|).

    `gap_m0` / `gap_m1` are the distances from the mean in-gap edge-state
    energy to the nearest edge of the m=0 and |m|=1 bulk bands (NaN without
    edge states).
    """

    points: tuple[BandPoint, ...]
    gap_m0: float
    gap_m1: float
    edge_states: tuple[int, ...]
    low_confidence: int
    zak_phase: Optional[float] = None

    @property
    def min_gap(self) -> float:
        return float(min(self.gap_m0, self.gap_m1))

    def band(self, m_abs: int) -> list[BandPoint]:
        return [point for point in self.points if point.m_abs == m_abs]


@dataclasses.dataclass(frozen=True, eq=False)
class SingleRingAnalytics:
    """
    Two-mode model of a ring's symmetric spin wave and a central donor.

    `delta_sub` is the small-spacing subradiant detuning
    J_d (Gamma~_0 - Gamma0) / Gamma0 - J~_0 and `gamma_eff` the decay of
    lambda_- there. `delta_min_decay` is the exact minimizer of -2 Im lambda_-
    over the scan; the decay is shallow around it for d << lambda0, so it can sit
    well away from `delta_sub` at nearly the same rate.
    """

    n_r: int
    j0_tilde: float
    gamma0_tilde: float
    j_d: float
    gamma_d: float
    gamma0: float
    deltas: FloatArray
    lambda_plus: ComplexArray
    lambda_minus: ComplexArray
    delta_sub: float
    gamma_eff: float
    donor_fraction: float
    ring_fraction: float
    delta_min_decay: float
    gamma_min_decay: float


@dataclasses.dataclass(frozen=True, eq=False)
class BlochBands:
    """
    Bands of H(k) = sum_n h(n) e^{i k d~ n} on a uniform k grid over the zone.

    `blocks[n + cells]` couples the reference cell to cell n. Band labels |m|
    come from overlaps with the ring spin waves in `basis`.
    """

    blocks: ComplexArray
    d_tilde: float
    k: FloatArray
    eigenvalues: ComplexArray
    eigenvectors: ComplexArray
    m_weights: FloatArray
    m_labels: tuple[int, ...]
    basis: ComplexArray
    basis_m: tuple[int, ...]

    @property
    def cells(self) -> int:
        return (len(self.blocks) - 1) // 2

    @property
    def band_count(self) -> int:
        return int(self.blocks.shape[1])

    def hamiltonian_at(self, k: float) -> ComplexArray:
        offsets = np.arange(-self.cells, self.cells + 1)
        phases = np.exp(1j * k * self.d_tilde * offsets)
        return np.asarray(np.einsum("n,nij->ij", phases, self.blocks))

    def solve_at(self, k: float) -> tuple[ComplexArray, ComplexArray]:
        return _sorted_eig(self.hamiltonian_at(k))

    def energy(self, band: int, k: float) -> float:
        eigenvalues, _ = self.solve_at(k)
        return float(eigenvalues[band].real)

    def weights(self, vectors: ComplexArray) -> FloatArray:
        """|m| weights of each column of `vectors`; shape (bands, labels)."""
        overlaps = np.abs(self.basis.conj().T @ vectors) ** 2
        weights = np.zeros((vectors.shape[1], len(self.m_labels)))
        for row, m in enumerate(self.basis_m):
            weights[:, self.m_labels.index(abs(m))] += overlaps[row]
        return weights

    def dominant_m(self, band: int, k: float) -> int:
        _, vectors = self.solve_at(k)
        return self.m_labels[int(np.argmax(self.weights(vectors)[band]))]


@dataclasses.dataclass(frozen=True)
class GroupVelocity:
    delta: float
    k: float
    v_g: float
    gamma_t_opt: float
    band: int
    m_abs: int


def diagonalize(hamiltonian: EffectiveHamiltonian) -> ModeSet:
    """Full complex eigendecomposition, checked against H v = lambda v."""
    matrix = hamiltonian.matrix
    if not np.all(np.isfinite(matrix)):
        raise NumericalError("Hamiltonian has non-finite entries")

    eigenvalues, vectors = _sorted_eig(matrix)
    scale = max(1.0, float(np.linalg.norm(matrix)))
    residual = float(
        np.max(np.linalg.norm(matrix @ vectors - vectors * eigenvalues, axis=0))
    )
    if residual > RESIDUAL_TOLERANCE * scale:
        raise NumericalError(
            f"Eigen-residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE} "
            f"(matrix norm {scale:.3e}, size {hamiltonian.size})"
        )

    decays = -2 * eigenvalues.imag
    if np.min(decays) < -RESIDUAL_TOLERANCE * scale:
        raise NumericalError(
            f"Negative mode decay {np.min(decays):.3e}; dissipation is not PSD"
        )
    return ModeSet(eigenvalues, vectors, residual)


def angular_momenta(n_r: int) -> list[int]:
    """m = 0, +-1, ... with one representative for m = N_R/2 on even rings."""
    if n_r % 2:
        return list(range(-(n_r - 1) // 2, (n_r - 1) // 2 + 1))
    return list(range(-n_r // 2 + 1, n_r // 2 + 1))


def spin_waves_from_rows(
    j_row: FloatArray,
    gamma_row: FloatArray,
) -> list[tuple[int, float, float]]:
    """(m, J~_m, Gamma~_m) from the first row of circulant J and Gamma."""
    n_r = len(j_row)
    angles = 2 * math.pi * np.arange(n_r) / n_r
    waves = []
    for m in angular_momenta(n_r):
        phases = np.exp(1j * m * angles)
        j_tilde = complex(phases @ j_row)
        gamma_tilde = complex(phases @ gamma_row)
        scale = max(1.0, float(np.max(np.abs(j_row))))
        if max(abs(j_tilde.imag), abs(gamma_tilde.imag)) > CIRCULANT_TOLERANCE * scale:
            raise NumericalError(f"Collective couplings of m={m} are not real")
        waves.append((m, j_tilde.real, gamma_tilde.real))
    return waves


def spin_wave_spectrum(ring: EmitterEnsemble) -> list[SpinWaveState]:
    """Spin waves e^{i m phi_j} / sqrt(N_R) of one ring and their collective rates."""
    lattice = ring.lattice()
    if len(lattice) < 3 or set(lattice.ring_indices.tolist()) != {0}:
        raise GeometryError("Spin waves need exactly one ring of lattice emitters")

    couplings = coupling_matrices(lattice)
    matrix = assemble_effective(lattice, couplings).matrix
    _check_circulant(matrix)

    n_r = len(lattice)
    angles = 2 * math.pi * np.arange(n_r) / n_r
    offset = float(lattice.detunings[0])
    states = []
    for m, j_tilde, gamma_tilde in spin_waves_from_rows(
        couplings.j[0], couplings.gamma[0]
    ):
        amplitudes = np.exp(1j * m * angles) / math.sqrt(n_r)
        eigenvalue = complex(j_tilde + offset, -gamma_tilde / 2)
        residual = float(np.linalg.norm(matrix @ amplitudes - eigenvalue * amplitudes))
        states.append(SpinWaveState(m, amplitudes, j_tilde, gamma_tilde, residual))
    return states


def center_coupling_matrix(
    j0_tilde: float,
    gamma0_tilde: float,
    j_d: float,
    gamma_d: float,
    n_r: int,
    delta: float,
    gamma0: float = 1.0,
) -> ComplexArray:
    """Hamiltonian projected on {symmetric ring mode, central donor}."""
    coupling = math.sqrt(n_r) * (j_d - 0.5j * gamma_d)
    return np.array(
        [
            [j0_tilde - 0.5j * gamma0_tilde, coupling],
            [coupling, delta - 0.5j * gamma0],
        ]
    )


def center_modes(matrix: ComplexArray) -> tuple[complex, complex, ComplexArray]:
    """(lambda_+, lambda_-, |Psi_->) of a two-mode matrix; lambda_- decays slower."""
    eigenvalues, vectors = np.linalg.eig(matrix)
    minus = int(np.argmax(eigenvalues.imag))
    plus = 1 - minus
    vector = vectors[:, minus] / np.linalg.norm(vectors[:, minus])
    return complex(eigenvalues[plus]), complex(eigenvalues[minus]), vector


def subradiant_detuning(
    j0_tilde: float, gamma0_tilde: float, j_d: float, gamma0: float = 1.0
) -> float:
    """Small-spacing subradiant detuning J_d (Gamma~_0 - Gamma0) / Gamma0 - J~_0."""
    return j_d * (gamma0_tilde - gamma0) / gamma0 - j0_tilde


def center_analytics_from_couplings(
    j0_tilde: float,
    gamma0_tilde: float,
    j_d: float,
    gamma_d: float,
    n_r: int,
    delta_scan: tuple[float, float] = (-15.0, 15.0),
    points: int = 601,
    gamma0: float = 1.0,
) -> SingleRingAnalytics:
    """
    Scan lambda_+-(Delta), evaluate the subradiant donor mode at the
    small-spacing detuning and locate the exact minimizer of -2 Im lambda_-.
    """

    def modes(delta: float) -> tuple[complex, complex, ComplexArray]:
        return center_modes(
            center_coupling_matrix(
                j0_tilde, gamma0_tilde, j_d, gamma_d, n_r, delta, gamma0
            )
        )

    def decay(delta: float) -> float:
        return -2 * modes(delta)[1].imag

    deltas = np.linspace(delta_scan[0], delta_scan[1], points)
    scan = [modes(float(delta)) for delta in deltas]
    decays = np.array([-2 * minus.imag for _, minus, _ in scan])
    best = int(np.argmin(decays))

    refined = minimize_scalar(
        decay,
        bounds=(
            float(deltas[max(best - 1, 0)]),
            float(deltas[min(best + 1, points - 1)]),
        ),
        method="bounded",
        options={"xatol": 1e-10},
    )
    if refined.fun < decays[best]:
        delta_min, gamma_min = float(refined.x), float(refined.fun)
    else:
        delta_min, gamma_min = float(deltas[best]), float(decays[best])

    delta_sub = subradiant_detuning(j0_tilde, gamma0_tilde, j_d, gamma0)
    _, minus, vector = modes(delta_sub)
    ring_population = abs(vector[0]) ** 2
    return SingleRingAnalytics(
        n_r=n_r,
        j0_tilde=j0_tilde,
        gamma0_tilde=gamma0_tilde,
        j_d=j_d,
        gamma_d=gamma_d,
        gamma0=gamma0,
        deltas=deltas,
        lambda_plus=np.array([plus for plus, _, _ in scan]),
        lambda_minus=np.array([minus for _, minus, _ in scan]),
        delta_sub=delta_sub,
        gamma_eff=-2 * minus.imag,
        donor_fraction=float(abs(vector[1]) ** 2),
        ring_fraction=float(ring_population / n_r),
        delta_min_decay=delta_min,
        gamma_min_decay=gamma_min,
    )


def ring_center_analytics(
    ring: EmitterEnsemble,
    delta_scan: tuple[float, float] = (-15.0, 15.0),
    points: int = 601,
) -> SingleRingAnalytics:
    """Two-mode analytics of a single ring with a donor at its center."""
    donor = ring.donor_index
    center = ring.metadata.ring_centers[0] if ring.metadata.ring_centers else None
    if donor is None or center is None:
        raise GeometryError("Ring-center analytics need a ring with a center donor")
    if np.linalg.norm(ring.positions[donor] - np.asarray(center)) > 1e-9:
        raise GeometryError("The donor does not sit at the ring center")

    if ring.metadata.d > BRANCH_LIMIT:
        logger.warning(
            "d=%s exceeds lambda0/3; lambda_- may not be the donor-dominated branch",
            ring.metadata.d,
        )

    waves = {wave.m: wave for wave in spin_wave_spectrum(ring)}
    couplings = coupling_matrices(ring)
    first = ring.lattice_indices[0]
    analytics = center_analytics_from_couplings(
        j0_tilde=waves[0].shift,
        gamma0_tilde=waves[0].decay,
        j_d=float(couplings.j[donor, first]),
        gamma_d=float(couplings.gamma[donor, first]),
        n_r=len(waves),
        delta_scan=delta_scan,
        points=points,
        gamma0=ring.emitters[donor].decay_rate,
    )
    logger.debug(
        "Delta_sub=%.6f, Gamma_eff=%.3e (minimum %.3e at %.6f)",
        analytics.delta_sub,
        analytics.gamma_eff,
        analytics.gamma_min_decay,
        analytics.delta_min_decay,
    )
    return analytics


def chain_k_grid(rings: int, d_tilde: float) -> FloatArray:
    """Open-chain quasimomenta 2 pi q / (M d~) inside (-pi/d~, pi/d~]."""
    q = np.arange(-((rings - 1) // 2), rings // 2 + 1)
    return np.asarray(2 * math.pi * q / (rings * d_tilde))


def ansatz_state(ensemble: EmitterEnsemble, m: int, k: float) -> ComplexArray:
    """Product of a ring spin wave and a chain plane wave on the lattice emitters."""
    meta = _chain_metadata(ensemble)
    if abs(m) > math.ceil((meta.n_r - 1) / 2):
        raise ValueError(f"|m|={abs(m)} exceeds ceil((N_R-1)/2) for N_R={meta.n_r}")
    if meta.rings > 1:
        zone = math.pi / meta.ring_spacing
        if not -zone < k <= zone * (1 + 1e-12):
            raise ValueError(f"k={k} lies outside the zone (-{zone}, {zone}]")

    state = np.zeros(len(ensemble), dtype=complex)
    indices, rings, sites = _ring_sites(ensemble)
    norm = math.sqrt(meta.rings * meta.n_r)
    state[indices] = (
        np.exp(1j * m * 2 * math.pi * sites / meta.n_r)
        * np.exp(1j * k * meta.ring_spacing * rings)
        / norm
    )
    return state


def classify_bands(
    modes: ModeSet,
    ensemble: EmitterEnsemble,
    threshold: float = CONFIDENCE_THRESHOLD,
) -> BandStructure:
    """
    Label every mode by the (|m|, |k|) bin with the largest summed ansatz
    fidelity; +-m and +-k are indistinguishable on an open chain.

    Degenerate subspaces are first recombined so each member is as pure as
    possible in one bin.
    """
    meta = _chain_metadata(ensemble)
    tic = time.perf_counter()

    labels: list[tuple[int, int]] = []
    columns = []
    q_values = np.arange(-((meta.rings - 1) // 2), meta.rings // 2 + 1)
    k_values = chain_k_grid(meta.rings, meta.ring_spacing or 1.0)
    for m in angular_momenta(meta.n_r):
        for q, k in zip(q_values, k_values):
            labels.append((abs(m), abs(int(q))))
            momentum = float(k) if meta.rings > 1 else 0.0
            columns.append(ansatz_state(ensemble, m, momentum))

    bins = sorted(set(labels))
    bin_of_row = [bins.index(label) for label in labels]
    ansatz = np.array(columns)
    modes = recombine_by_band(modes, ansatz, bin_of_row)

    overlaps = np.abs(ansatz.conj() @ modes.eigenvectors) ** 2
    binned = np.zeros((len(bins), modes.size))
    for row, label in enumerate(bin_of_row):
        binned[label] += overlaps[row]

    best = np.argmax(binned, axis=0)
    fidelities = np.clip(binned[best, np.arange(modes.size)], 0.0, 1.0)

    edge_weight = np.zeros(modes.size)
    corner_weight = np.zeros(modes.size)
    if meta.rings > 1:
        report = edge_localization(modes, ensemble)
        edge_weight, corner_weight = report.edge_weight, report.corner_weight

    d_tilde = meta.ring_spacing or 1.0
    points = tuple(
        BandPoint(
            mode_index=i,
            m_abs=bins[best[i]][0],
            k=2 * math.pi * bins[best[i]][1] / (meta.rings * d_tilde),
            shift=float(modes.shifts[i]),
            decay=float(modes.decays[i]),
            fidelity=float(fidelities[i]),
            confident=bool(fidelities[i] >= threshold),
            edge_weight=float(edge_weight[i]),
            corner_weight=float(corner_weight[i]),
        )
        for i in range(modes.size)
    )

    low_confidence = sum(not point.confident for point in points)
    if low_confidence:
        logger.warning(
            "%d of %d modes have band fidelity below %s",
            low_confidence,
            modes.size,
            threshold,
        )

    edge_states, gap_m0, gap_m1 = _in_gap_edge_states(points)
    logger.info(
        "Classified %d modes in %s seconds", modes.size, time.perf_counter() - tic
    )
    return BandStructure(points, gap_m0, gap_m1, edge_states, low_confidence)


def _degenerate_runs(eigenvalues: ComplexArray, rtol: float) -> list[tuple[int, int]]:
    """[start, end) runs of consecutive eigenvalues equal to within rtol."""
    scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if len(eigenvalues) else 1.0
    runs = []
    start = 0
    while start < len(eigenvalues):
        end = start + 1
        while (
            end < len(eigenvalues)
            and abs(eigenvalues[end] - eigenvalues[start]) < rtol * scale
        ):
            end += 1
        runs.append((start, end))
        start = end
    return runs


def recombine_by_band(
    modes: ModeSet,
    ansatz: ComplexArray,
    bin_of_row: Sequence[int],
    rtol: float = 1e-6,
) -> ModeSet:
    """
    Rotate every degenerate subspace so its members are bin-pure in turn.

    `ansatz` holds one trial state per row and `bin_of_row` its bin. Each
    step keeps the vector of the remaining span with the largest fidelity to
    any single bin and continues in its orthogonal complement.
    """
    bins = np.asarray(bin_of_row)
    vectors = modes.eigenvectors.copy()
    changed = False
    for start, end in _degenerate_runs(modes.eigenvalues, rtol):
        if end - start < 2:
            continue
        remaining, _ = np.linalg.qr(vectors[:, start:end])
        chosen = []
        for _ in range(end - start):
            projected = ansatz.conj() @ remaining
            spectra = [
                np.linalg.eigh(
                    projected[bins == label].conj().T
                    @ projected[bins == label]
                )
                for label in np.unique(bins)
            ]
            _, rotations = max(spectra, key=lambda spectrum: spectrum[0][-1])
            purest = rotations[:, -1]
            chosen.append(remaining @ purest)
            remaining = remaining @ scipy.linalg.null_space(purest.conj()[None, :])
        vectors[:, start:end] = np.column_stack(chosen)
        changed = True

    if not changed:
        return modes
    return ModeSet(modes.eigenvalues, vectors, modes.residual, recombined=True)


def localize_degenerate_pairs(
    modes: ModeSet,
    ensemble: EmitterEnsemble,
    rtol: float = 1e-6,
    threshold: float = EDGE_THRESHOLD,
) -> ModeSet:
    """
    Recombine degenerate edge pairs into left- and right-localized members.

    Only pairs whose mean edge weight exceeds `threshold` are touched; the
    new vectors maximize and minimize the weight on the left boundary within
    the pair's span.
    """
    left, _, edge, _ = _ring_masks(ensemble)
    vectors = modes.eigenvectors.copy()

    changed = False
    for start, end in _degenerate_runs(modes.eigenvalues, rtol):
        pair = vectors[:, start:end]
        edge_mean = float(np.mean(np.sum(np.abs(pair[edge]) ** 2, axis=0)))
        if end - start == 2 and edge_mean > threshold:
            basis, _ = np.linalg.qr(pair)
            left_block = basis[left].conj().T @ basis[left]
            _, rotation = np.linalg.eigh(left_block)
            vectors[:, start:end] = basis @ rotation[:, ::-1]
            changed = True

    if not changed:
        return modes
    return ModeSet(modes.eigenvalues, vectors, modes.residual, recombined=True)


def edge_localization(
    modes: ModeSet,
    ensemble: EmitterEnsemble,
    threshold: float = EDGE_THRESHOLD,
) -> EdgeStateReport:
    """
    Population of every mode on boundary, bulk and corner rings.

    Chains use the first and last ring as the boundary; 2D ring lattices use
    every ring on the outer rows and columns. Donor and acceptor count with
    the ring they sit in.
    """
    left, right, edge, corner = _ring_masks(ensemble)
    localized = localize_degenerate_pairs(modes, ensemble, threshold=threshold)

    populations = np.abs(localized.eigenvectors) ** 2
    in_rings = ensemble.ring_indices >= 0
    edge_weight = populations[edge].sum(axis=0)
    bulk_weight = populations[in_rings & ~edge].sum(axis=0)
    edge_states = tuple(int(i) for i in np.flatnonzero(edge_weight > threshold))

    return EdgeStateReport(
        modes=localized,
        edge_weight=edge_weight,
        bulk_weight=bulk_weight,
        left_weight=populations[left].sum(axis=0),
        right_weight=populations[right].sum(axis=0),
        corner_weight=populations[corner].sum(axis=0),
        superradiant=localized.decays > 1.0,
        edge_states=edge_states,
        threshold=threshold,
    )


def ring_cell_blocks(
    cell: EmitterEnsemble,
    d_tilde: float,
    cells: int = BLOCH_CELLS,
) -> ComplexArray:
    """h(n), n = -cells..cells, for one ring repeated every d~ along x."""
    positions = cell.positions
    polarizations = cell.polarizations
    blocks = np.zeros((2 * cells + 1, len(cell), len(cell)), dtype=complex)
    for n in range(-cells, cells + 1):
        if n == 0:
            blocks[cells] = assemble_effective(cell).matrix
            continue
        shifted = positions + np.array([n * d_tilde, 0.0, 0.0])
        j, gamma = cross_couplings(positions, polarizations, shifted, polarizations)
        blocks[n + cells] = j - 0.5j * gamma
    return blocks


def bloch_bands(
    blocks: ComplexArray,
    d_tilde: float,
    k_points: int = 128,
    basis: Optional[ComplexArray] = None,
    basis_m: Sequence[int] = (0,),
) -> BlochBands:
    """Diagonalize H(k) on k_j = -pi/d~ + 2 pi j / (K d~), j = 0..K-1."""
    if k_points < 4:
        raise ValueError(f"Need at least 4 k points, got {k_points}")
    size = blocks.shape[1]
    if basis is None:
        basis = np.eye(size, dtype=complex)
        basis_m = (0,) * size
    m_labels = tuple(sorted({abs(m) for m in basis_m}))

    k = -math.pi / d_tilde + 2 * math.pi * np.arange(k_points) / (k_points * d_tilde)
    bands = BlochBands(
        blocks=blocks,
        d_tilde=d_tilde,
        k=k,
        eigenvalues=np.zeros((k_points, size), dtype=complex),
        eigenvectors=np.zeros((k_points, size, size), dtype=complex),
        m_weights=np.zeros((k_points, size, len(m_labels))),
        m_labels=m_labels,
        basis=basis,
        basis_m=tuple(basis_m),
    )
    for index, momentum in enumerate(k):
        eigenvalues, vectors = bands.solve_at(float(momentum))
        bands.eigenvalues[index] = eigenvalues
        bands.eigenvectors[index] = vectors
        bands.m_weights[index] = bands.weights(vectors)
    return bands


def bloch_bands_for(
    ensemble: EmitterEnsemble,
    k_points: int = 128,
    cells: int = BLOCH_CELLS,
) -> BlochBands:
    """Infinite-chain bands whose unit cell is the first ring of `ensemble`."""
    meta = ensemble.metadata
    if meta.kind != "ring_chain":
        raise GeometryError(f"Bloch bands need a ring chain, got '{meta.kind}'")

    first_ring = tuple(
        e for e in ensemble.emitters if e.role == LATTICE and e.ring_index == 0
    )
    cell = EmitterEnsemble(first_ring, dataclasses.replace(meta, rings=1))
    tic = time.perf_counter()
    blocks = ring_cell_blocks(cell, meta.ring_spacing, cells)

    angles = 2 * math.pi * np.arange(meta.n_r) / meta.n_r
    basis_m = angular_momenta(meta.n_r)
    basis = np.array([np.exp(1j * m * angles) for m in basis_m]).T / math.sqrt(meta.n_r)
    bands = bloch_bands(blocks, meta.ring_spacing, k_points, basis, basis_m)
    logger.info(
        "Bloch bands on %d k points finished in %s seconds",
        k_points,
        time.perf_counter() - tic,
    )
    return bands


def wilson_loop_phase(vectors: Sequence[ComplexArray]) -> float:
    """-arg prod_j <u_j|u_{j+1}>, closed with u_0; reported in [0, 2 pi)."""
    overlaps = np.array(
        [
            np.vdot(vectors[j], vectors[(j + 1) % len(vectors)])
            for j in range(len(vectors))
        ]
    )
    smallest = float(np.min(np.abs(overlaps)))
    if smallest < MIN_WILSON_OVERLAP:
        raise NumericalError(
            f"Wilson loop is ill-conditioned: overlap {smallest:.3e} below "
            f"{MIN_WILSON_OVERLAP}; refine the k grid"
        )
    phase = -float(np.sum(np.angle(overlaps)))
    return phase % (2 * math.pi)


def zak_phase(bands: BlochBands, m_abs: int = 0) -> float:
    """Berry phase of the band with the largest |m| weight at every k."""
    label = bands.m_labels.index(m_abs)
    vectors = [
        bands.eigenvectors[index][:, int(np.argmax(bands.m_weights[index, :, label]))]
        for index in range(len(bands.k))
    ]
    return wilson_loop_phase(vectors)


def zak_convergence(
    ensemble: EmitterEnsemble,
    grids: Sequence[int] = (64, 128, 256),
    m_abs: int = 0,
    cells: int = BLOCH_CELLS,
) -> list[tuple[int, float]]:
    """Zak phase on successively finer k grids, sharing one set of blocks."""
    reference = bloch_bands_for(ensemble, grids[0], cells)
    table = [(grids[0], zak_phase(reference, m_abs))]
    for k_points in grids[1:]:
        bands = bloch_bands(
            reference.blocks,
            reference.d_tilde,
            k_points,
            reference.basis,
            reference.basis_m,
        )
        table.append((k_points, zak_phase(bands, m_abs)))
    return table


def group_velocity(
    bands: BlochBands,
    band: int,
    k: float,
    step: Optional[float] = None,
) -> float:
    """|dJ/dk| by a 5-point centered stencil; default step pi / (64 d~)."""
    h = step if step is not None else math.pi / (64 * bands.d_tilde)
    e = [bands.energy(band, k + offset * h) for offset in (-2, -1, 1, 2)]
    return abs((e[0] - 8 * e[1] + 8 * e[2] - e[3]) / (12 * h))


def resonant_momenta(
    bands: BlochBands,
    band: int,
    delta: float,
    scan_points: int = 257,
) -> list[float]:
    """Every k in [0, pi/d~] where the band crosses Delta."""

    def offset(k: float) -> float:
        return bands.energy(band, k) - delta

    grid = np.linspace(0.0, math.pi / bands.d_tilde, scan_points)
    values = [offset(float(k)) for k in grid]
    roots: list[float] = []
    for i in range(len(grid) - 1):
        if values[i] == 0:
            roots.append(float(grid[i]))
        elif values[i] * values[i + 1] < 0:
            roots.append(float(brentq(offset, grid[i], grid[i + 1], xtol=1e-12)))
    if values[-1] == 0:
        roots.append(float(grid[-1]))
    return roots


def group_velocity_and_optimal_trap(
    bands: BlochBands,
    delta: float = 0.0,
    m_abs: Optional[int] = None,
) -> GroupVelocity:
    """
    Group velocity of the band resonant with Delta and Gamma_T_opt = v_g / d~.

    With `m_abs` only bands of that label are considered; otherwise the
    fastest resonant band wins.
    """
    candidates: list[GroupVelocity] = []
    for band in range(bands.band_count):
        for k in resonant_momenta(bands, band, delta):
            label = bands.dominant_m(band, k)
            if m_abs is not None and label != m_abs:
                continue
            v_g = group_velocity(bands, band, k)
            candidates.append(
                GroupVelocity(delta, k, v_g, v_g / bands.d_tilde, band, label)
            )

    if not candidates:
        label = "any band" if m_abs is None else f"|m|={m_abs}"
        raise NumericalError(f"No resonant k for Delta={delta} in {label}")
    return max(candidates, key=lambda candidate: candidate.v_g)


def _sorted_eig(matrix: ComplexArray) -> tuple[ComplexArray, ComplexArray]:
    try:
        eigenvalues, vectors = scipy.linalg.eig(matrix)
    except (np.linalg.LinAlgError, ValueError) as error:
        raise NumericalError(
            f"Eigensolver failed on a {len(matrix)}x{len(matrix)} matrix "
            f"(norm {np.linalg.norm(matrix):.3e}): {error}"
        ) from error
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    order = np.lexsort((-eigenvalues.imag, eigenvalues.real))
    return eigenvalues[order], vectors[:, order]


def _check_circulant(matrix: ComplexArray) -> None:
    n = len(matrix)
    atol = CIRCULANT_TOLERANCE * max(1.0, float(np.max(np.abs(matrix))))
    for row in range(1, n):
        expected = np.roll(matrix[0], row)
        if not np.allclose(matrix[row], expected, rtol=0, atol=atol):
            raise GeometryError(
                f"Ring Hamiltonian is not circulant (row {row} differs from row 0)"
            )


def _chain_metadata(ensemble: EmitterEnsemble) -> EnsembleMetadata:
    meta = ensemble.metadata
    if meta.kind not in CHAIN_KINDS:
        raise GeometryError(f"Expected a ring chain, got '{meta.kind}'")
    return meta


def _ring_sites(ensemble: EmitterEnsemble) -> tuple[list[int], FloatArray, FloatArray]:
    """Lattice indices with their ring index and position within the ring."""
    indices: list[int] = []
    rings: list[int] = []
    sites: list[int] = []
    seen: dict[int, int] = {}
    for index, emitter in enumerate(ensemble.emitters):
        if emitter.role != LATTICE:
            continue
        site = seen.get(emitter.ring_index, 0)
        seen[emitter.ring_index] = site + 1
        indices.append(index)
        rings.append(emitter.ring_index)
        sites.append(site)
    return indices, np.array(rings, dtype=float), np.array(sites, dtype=float)


def _ring_masks(
    ensemble: EmitterEnsemble,
) -> tuple[BoolArray, BoolArray, BoolArray, BoolArray]:
    """Boolean masks (left, right, edge, corner) over emitters by ring position."""
    meta = ensemble.metadata
    rings = ensemble.ring_indices
    if meta.kind == "ring_chain":
        left = rings == 0
        right = rings == meta.rings - 1
        return left, right, left | right, np.zeros(len(rings), dtype=bool)

    if meta.kind not in LATTICE_2D_KINDS:
        raise GeometryError(f"Edge analysis needs a ring lattice, got '{meta.kind}'")

    row, column = np.divmod(rings, max(meta.columns, 1))
    valid = rings >= 0
    left = valid & (column == 0)
    right = valid & (column == meta.columns - 1)
    top_bottom = valid & ((row == 0) | (row == meta.rows - 1))
    edge = left | right | top_bottom
    corner = (left | right) & top_bottom
    return left, right, edge, corner


def _in_gap_edge_states(
    points: tuple[BandPoint, ...],
) -> tuple[tuple[int, ...], float, float]:
    """Edge states outside the m=0 and |m|=1 bulk bands and their gap distances."""
    bulk = [p for p in points if p.edge_weight <= EDGE_THRESHOLD]
    ranges = []
    for m_abs in (0, 1):
        shifts = [p.shift for p in bulk if p.m_abs == m_abs]
        if not shifts:
            return (), math.nan, math.nan
        ranges.append((min(shifts), max(shifts)))

    def outside(shift: float) -> bool:
        return all(not low <= shift <= high for low, high in ranges)

    edge_states = tuple(
        p.mode_index
        for p in points
        if p.edge_weight > EDGE_THRESHOLD and outside(p.shift)
    )
    if not edge_states:
        return (), math.nan, math.nan

    energy = float(np.mean([points[i].shift for i in edge_states]))
    gaps = [min(abs(energy - low), abs(energy - high)) for low, high in ranges]
    return edge_states, gaps[0], gaps[1]
