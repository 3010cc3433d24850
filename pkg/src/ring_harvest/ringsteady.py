"""Weak-drive steady state and lattice-enhanced trapping rates."""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from typing import Sequence

import numpy as np
import scipy.linalg

from ring_harvest.ringcoupling import K0
from ring_harvest.ringcoupling import nearest_neighbor_coupling
from ring_harvest.ringgeometry import build_geometry
from ring_harvest.ringhamiltonian import assemble_effective
from ring_harvest.ringhamiltonian import beam_center
from ring_harvest.ringhamiltonian import gaussian_drive
from ring_harvest.ringmodel import ComplexArray
from ring_harvest.ringmodel import DriveVector
from ring_harvest.ringmodel import EffectiveHamiltonian
from ring_harvest.ringmodel import FloatArray
from ring_harvest.ringmodel import GeometrySpec
from ring_harvest.ringmodel import NumericalError

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
RESIDUAL_TOLERANCE = 1e-10
DEFAULT_OMEGA0 = 1e-3
CROSS_SECTION = 6 * math.pi / K0**2


@dataclasses.dataclass(frozen=True, eq=False)
class SteadyStateResult:
    amplitudes: ComplexArray
    acceptor_pop: float
    trap_rate: float
    effective_trap_rate: float
    normalized_rate: float
    condition: float
    residual: float

    @property
    def populations(self) -> FloatArray:
        return np.asarray(np.abs(self.amplitudes) ** 2)


@dataclasses.dataclass(frozen=True, eq=False)
class TrappingCurve:
    """Normalized steady trapping rate against Gamma_T for one geometry."""

    kind: str
    gamma_t: FloatArray
    gamma_t_over_j: FloatArray
    trap_rate: FloatArray
    normalized_rate: FloatArray
    waist: float
    delta: float
    omega0: float
    j_nn: float
    sigma0: float = CROSS_SECTION


def single_emitter_trap_rate(
    omega0: float,
    gamma_t: float,
    gamma0: float = 1.0,
) -> float:
    """Resonantly driven single emitter: 4 Omega0^2 Gamma_T / (Gamma0 + Gamma_T)^2."""
    return 4 * omega0**2 * gamma_t / (gamma0 + gamma_t) ** 2


def solve_steady_state(
    hamiltonian: EffectiveHamiltonian,
    drive: DriveVector,
) -> SteadyStateResult:
    """psi_ss = -H^-1 f by a dense LU solve."""
    matrix = hamiltonian.matrix
    forcing = np.asarray(drive.amplitudes, dtype=complex)
    if forcing.shape != (hamiltonian.size,):
        raise ValueError(
            f"Drive has {len(forcing)} entries for {hamiltonian.size} emitters"
        )

    condition = float(np.linalg.cond(matrix))
    if not math.isfinite(condition) or condition > CONDITION_LIMIT:
        raise NumericalError(
            f"Steady-state solve is ill-conditioned (condition number {condition:.3e})"
        )

    amplitudes = -scipy.linalg.solve(matrix, forcing)
    residual = float(np.linalg.norm(matrix @ amplitudes + forcing))
    scale = float(np.linalg.norm(forcing)) * max(1.0, float(np.linalg.norm(matrix)))
    if residual > RESIDUAL_TOLERANCE * scale:
        raise NumericalError(
            f"Steady-state residual {residual:.3e} exceeds tolerance "
            f"(condition number {condition:.3e})"
        )

    acceptor = hamiltonian.acceptor_index
    acceptor_pop, trap_rate = 0.0, 0.0
    if acceptor is not None:
        acceptor_pop = float(abs(amplitudes[acceptor]) ** 2)
        trap_rate = float(hamiltonian.trap_rates[acceptor])
    effective = trap_rate * acceptor_pop
    reference = single_emitter_trap_rate(drive.omega0, trap_rate)
    return SteadyStateResult(
        amplitudes=np.asarray(amplitudes),
        acceptor_pop=acceptor_pop,
        trap_rate=trap_rate,
        effective_trap_rate=effective,
        normalized_rate=effective / reference if reference > 0 else math.nan,
        condition=condition,
        residual=residual,
    )


def steady_point(
    spec: GeometrySpec,
    gamma_t: float,
    waist: float,
    delta: float,
    omega0: float = DEFAULT_OMEGA0,
    center: str = "donor",
) -> SteadyStateResult:
    """Build, drive and solve one geometry at one trap rate."""
    spec = dataclasses.replace(spec, gamma_t=gamma_t, delta=delta)
    ensemble = build_geometry(spec)
    if center == "donor" and ensemble.donor_index is None:
        center = "acceptor"
    drive = gaussian_drive(ensemble, omega0, waist, beam_center(ensemble, center))
    return solve_steady_state(assemble_effective(ensemble), drive)


def trapping_rate_scan(
    spec: GeometrySpec,
    gamma_t_grid: Sequence[float],
    waist: float,
    delta: float,
    omega0: float = DEFAULT_OMEGA0,
    center: str = "donor",
) -> TrappingCurve:
    """
    Normalized trapping rate over a Gamma_T grid.

    Each point is divided by the resonantly driven single emitter at the same
    Omega0 and Gamma_T. Geometries without a donor are driven on the acceptor.
    """
    tic = time.perf_counter()
    results = [
        steady_point(spec, float(gamma_t), waist, delta, omega0, center)
        for gamma_t in gamma_t_grid
    ]
    j_nn = nearest_neighbor_coupling(spec.d, spec.polarization)
    gamma_t = np.asarray(gamma_t_grid, dtype=float)

    logger.info(
        "Trapping scan of %d points (%s) finished in %s seconds",
        len(results),
        spec.kind,
        time.perf_counter() - tic,
    )
    return TrappingCurve(
        kind=spec.kind,
        gamma_t=gamma_t,
        gamma_t_over_j=gamma_t / abs(j_nn),
        trap_rate=np.array([r.effective_trap_rate for r in results]),
        normalized_rate=np.array([r.normalized_rate for r in results]),
        waist=waist,
        delta=delta,
        omega0=omega0,
        j_nn=j_nn,
    )
