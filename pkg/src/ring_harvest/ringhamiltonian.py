"""Effective non-Hermitian Hamiltonian and coherent drive assembly."""
from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from ring_harvest.ringcoupling import coupling_matrices
from ring_harvest.ringmodel import LATTICE
from ring_harvest.ringmodel import CouplingMatrices
from ring_harvest.ringmodel import DriveVector
from ring_harvest.ringmodel import EffectiveHamiltonian
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import Vector3

logger = logging.getLogger(__name__)

WEAK_DRIVE_LIMIT = 0.1


def assemble_effective(
    ensemble: EmitterEnsemble,
    couplings: Optional[CouplingMatrices] = None,
) -> EffectiveHamiltonian:
    """
    H = J - (i/2) Gamma + diag(detuning) - (i/2) diag(trap_rate).

    The Gamma diagonal already carries each emitter's decay rate, so the
    diagonal reads detuning - (i/2)(Gamma0 + trap_rate). Couplings default to
    the cached matrices of `ensemble`.
    """
    if couplings is None:
        couplings = coupling_matrices(ensemble)

    if couplings.size != len(ensemble):
        raise ValueError(
            f"Coupling matrices are {couplings.size}x{couplings.size} "
            f"but the ensemble has {len(ensemble)} emitters"
        )

    detunings = ensemble.detunings
    trap_rates = ensemble.trap_rates
    matrix = couplings.j - 0.5j * couplings.gamma
    matrix = matrix + np.diag(detunings - 0.5j * trap_rates)

    lattice_detuned = any(
        e.detuning != 0 for e in ensemble.emitters if e.role == LATTICE
    )
    return EffectiveHamiltonian(
        matrix=matrix.astype(complex),
        roles=ensemble.roles,
        trap_rates=trap_rates,
        has_trap=bool(np.any(trap_rates > 0)),
        has_disorder=lattice_detuned,
    )


def gaussian_drive(
    ensemble: EmitterEnsemble,
    omega0: float,
    waist: float,
    center: Vector3,
) -> DriveVector:
    """Gaussian beam Rabi frequencies Omega0 exp(-|center - r_i|^2 / 2 w^2)."""
    if omega0 <= 0:
        raise ValueError(f"Rabi frequency must be positive, got {omega0}")
    if waist <= 0:
        raise ValueError(f"Beam waist must be positive, got {waist}")
    if omega0 > WEAK_DRIVE_LIMIT:
        logger.warning(
            "Drive Omega0=%s exceeds %s Gamma0; the single-excitation "
            "steady state is no longer accurate",
            omega0,
            WEAK_DRIVE_LIMIT,
        )

    distances = np.linalg.norm(ensemble.positions - np.asarray(center), axis=1)
    amplitudes = omega0 * np.exp(-(distances**2) / (2 * waist**2))
    return DriveVector(
        amplitudes=amplitudes, omega0=omega0, waist=waist, center=tuple(center)
    )


def beam_center(ensemble: EmitterEnsemble, target: str = "donor") -> Vector3:
    """Position of the donor or acceptor, used as the beam focus."""
    if target == "donor":
        index = ensemble.donor_index
    elif target == "acceptor":
        index = ensemble.acceptor_index
    else:
        raise ValueError(f"Beam center must be 'donor' or 'acceptor', got {target!r}")

    if index is None:
        raise GeometryError(f"Ensemble has no {target} to center the beam on")
    position = ensemble.emitters[index].position
    return (position[0], position[1], position[2])


def ideal_dicke_hamiltonian(n: int, gamma0: float = 1.0) -> EffectiveHamiltonian:
    """All J = 0 and every Gamma_nm = Gamma0, cross terms included."""
    if n < 1:
        raise ValueError(f"Need at least one emitter, got {n}")
    matrix = -0.5j * gamma0 * np.ones((n, n), dtype=complex)
    return EffectiveHamiltonian(
        matrix=matrix,
        roles=(LATTICE,) * n,
        trap_rates=np.zeros(n),
    )


def with_roles(
    hamiltonian: EffectiveHamiltonian,
    roles: tuple[str, ...],
) -> EffectiveHamiltonian:
    """Relabel the basis of an oracle Hamiltonian, e.g. mark the Dicke donor."""
    if len(roles) != hamiltonian.size:
        raise ValueError(f"Need {hamiltonian.size} roles, got {len(roles)}")
    return EffectiveHamiltonian(
        matrix=hamiltonian.matrix,
        roles=roles,
        trap_rates=hamiltonian.trap_rates,
        has_trap=hamiltonian.has_trap,
        has_disorder=hamiltonian.has_disorder,
    )
