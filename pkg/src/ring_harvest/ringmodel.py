"""
Shared domain types.

Units throughout the package: lengths in the resonant wavelength (lambda0 = 1),
rates and frequencies in the single-emitter decay rate (Gamma0 = 1), hbar = 1.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]
ComplexArray = npt.NDArray[np.complex128]
BoolArray = npt.NDArray[np.bool_]

Vector3 = tuple[float, float, float]
Polarization = tuple[complex, complex, complex]

CIRCULAR: Polarization = (1 / math.sqrt(2), 1j / math.sqrt(2), 0j)

LATTICE = "lattice"
DONOR = "donor"
ACCEPTOR = "acceptor"
ROLES = (LATTICE, DONOR, ACCEPTOR)

RING_KINDS = (
    "single_ring",
    "ring_chain",
    "ring_lattice_square",
    "ring_lattice_hexagonal",
)
GEOMETRY_KINDS = RING_KINDS + (
    "linear_chain",
    "hexagonal",
    "honeycomb",
    "free_pair",
    "single_emitter",
)


class RingHarvestError(Exception):
    """Base error of the package."""


class GeometryError(RingHarvestError, ValueError):
    """Invalid geometry arguments, overlapping emitters or wrong lattice kind."""


class ConfigError(RingHarvestError, ValueError):
    """Scenario configuration failed validation."""


class NumericalError(RingHarvestError, RuntimeError):
    """A numerical step failed or lost the accuracy it promises."""


@dataclasses.dataclass(frozen=True)
class DipoleEmitter:
    """A two-level emitter with a fixed transition dipole."""

    position: Vector3
    polarization: Polarization = CIRCULAR
    role: str = LATTICE
    detuning: float = 0.0
    decay_rate: float = 1.0
    trap_rate: float = 0.0
    ring_index: int = -1

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise GeometryError(f"Unknown emitter role '{self.role}'")

        norm = math.sqrt(sum(abs(component) ** 2 for component in self.polarization))
        if abs(norm - 1.0) > 1e-12:
            raise GeometryError(f"Polarization must have unit norm, got {norm}")

        if self.decay_rate <= 0:
            raise GeometryError("decay_rate must be positive")

        if self.trap_rate < 0:
            raise GeometryError("trap_rate must be non-negative")

        if self.trap_rate > 0 and self.role != ACCEPTOR:
            raise GeometryError("Only the acceptor may carry a trap rate")


@dataclasses.dataclass(frozen=True)
class EnsembleMetadata:
    """How an ensemble was built. Serialized next to every output."""

    kind: str
    n_r: int = 0
    rings: int = 0
    rows: int = 0
    columns: int = 0
    d: float = 0.0
    d_r: float = 0.0
    radius: float = 0.0
    ring_spacing: float = 0.0
    ring_centers: tuple[Vector3, ...] = ()
    rotations: tuple[float, ...] = ()
    placement: str = ""

    @property
    def is_ring_based(self) -> bool:
        return self.kind in RING_KINDS


@dataclasses.dataclass(frozen=True)
class EmitterEnsemble:
    """
    An ordered, immutable collection of emitters.

    Index order: lattice emitters ring by ring (site by site for non-ring
    lattices), then the donor, then the acceptor.
    """

    emitters: tuple[DipoleEmitter, ...]
    metadata: EnsembleMetadata

    def __len__(self) -> int:
        return len(self.emitters)

    @property
    def positions(self) -> FloatArray:
        return np.array([emitter.position for emitter in self.emitters], dtype=float)

    @property
    def polarizations(self) -> ComplexArray:
        return np.array(
            [emitter.polarization for emitter in self.emitters], dtype=complex
        )

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(emitter.role for emitter in self.emitters)

    @property
    def detunings(self) -> FloatArray:
        return np.array([emitter.detuning for emitter in self.emitters], dtype=float)

    @property
    def decay_rates(self) -> FloatArray:
        return np.array([emitter.decay_rate for emitter in self.emitters], dtype=float)

    @property
    def trap_rates(self) -> FloatArray:
        return np.array([emitter.trap_rate for emitter in self.emitters], dtype=float)

    @property
    def ring_indices(self) -> npt.NDArray[np.int64]:
        return np.array([emitter.ring_index for emitter in self.emitters], dtype=int)

    @property
    def lattice_indices(self) -> list[int]:
        return [i for i, role in enumerate(self.roles) if role == LATTICE]

    @property
    def donor_index(self) -> Optional[int]:
        return _first_index(self.roles, DONOR)

    @property
    def acceptor_index(self) -> Optional[int]:
        return _first_index(self.roles, ACCEPTOR)

    def lattice(self) -> EmitterEnsemble:
        """Return the ensemble stripped of donor and acceptor."""
        emitters = tuple(e for e in self.emitters if e.role == LATTICE)
        placement = "lattice only"
        return EmitterEnsemble(
            emitters, dataclasses.replace(self.metadata, placement=placement)
        )

    def replace_emitters(self, emitters: tuple[DipoleEmitter, ...]) -> EmitterEnsemble:
        return EmitterEnsemble(emitters, self.metadata)


@dataclasses.dataclass(frozen=True)
class GeometrySpec:
    """
    Everything needed to build an ensemble.

    `rings` is the ring count of a ring chain, `rows`/`columns` the extents of
    2D lattices (rings for ring lattices, sites or unit cells otherwise) and
    `sites` the length of a linear chain. `d_r` defaults to `d`.
    `acceptor_delta` defaults to `delta` (donor and acceptor share one
    transition frequency).
    """

    kind: str
    n_r: int = 9
    rings: int = 1
    rows: int = 1
    columns: int = 1
    sites: int = 2
    d: float = 0.05
    d_r: Optional[float] = None
    rotation: float = 0.0
    rotations: tuple[float, ...] = ()
    delta: float = 0.0
    acceptor_delta: Optional[float] = None
    gamma_t: float = 0.0
    donor_acceptor: bool = True
    center_donor: bool = True
    polarization: Polarization = CIRCULAR

    @property
    def inter_ring_spacing(self) -> float:
        return self.d if self.d_r is None else self.d_r


@dataclasses.dataclass(frozen=True, eq=False)
class CouplingMatrices:
    """Coherent (J) and dissipative (Gamma) couplings, in Gamma0 units."""

    j: FloatArray
    gamma: FloatArray
    k0: float

    @property
    def size(self) -> int:
        return int(self.j.shape[0])


@dataclasses.dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    """
    Complex non-Hermitian single-excitation generator in the emitter basis.

    `matrix` = J - (i/2) Gamma + diag(detuning) - (i/2) diag(trap_rates).
    """

    matrix: ComplexArray
    roles: tuple[str, ...]
    trap_rates: FloatArray
    has_trap: bool = False
    has_disorder: bool = False

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def hermitian_part(self) -> ComplexArray:
        return (self.matrix + self.matrix.conj().T) / 2

    @property
    def decay_operator(self) -> ComplexArray:
        """Gamma plus the trap diagonal, i.e. i (H - H^dagger)."""
        return 1j * (self.matrix - self.matrix.conj().T)

    @property
    def radiative_operator(self) -> ComplexArray:
        """The dissipative coupling matrix alone (trap channel excluded)."""
        return self.decay_operator - np.diag(self.trap_rates).astype(complex)

    @property
    def donor_index(self) -> Optional[int]:
        return _first_index(self.roles, DONOR)

    @property
    def acceptor_index(self) -> Optional[int]:
        return _first_index(self.roles, ACCEPTOR)


@dataclasses.dataclass(frozen=True, eq=False)
class DriveVector:
    """Weak coherent drive amplitudes per emitter (Gamma0 units)."""

    amplitudes: FloatArray
    omega0: float
    waist: float
    center: Vector3


def _first_index(roles: tuple[str, ...], role: str) -> Optional[int]:
    for index, candidate in enumerate(roles):
        if candidate == role:
            return index
    return None
