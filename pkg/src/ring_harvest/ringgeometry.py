"""Emitter positions, roles and disorder for every lattice family."""
from __future__ import annotations

import dataclasses
import logging
import math
from typing import Callable

import numpy as np
from scipy.spatial.distance import pdist

from ring_harvest.ringmodel import ACCEPTOR
from ring_harvest.ringmodel import CIRCULAR
from ring_harvest.ringmodel import DONOR
from ring_harvest.ringmodel import GEOMETRY_KINDS
from ring_harvest.ringmodel import LATTICE
from ring_harvest.ringmodel import DipoleEmitter
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import EnsembleMetadata
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import GeometrySpec
from ring_harvest.ringmodel import Polarization
from ring_harvest.ringmodel import Vector3

logger = logging.getLogger(__name__)

MIN_SEPARATION = 1e-9
DONOR_ACCEPTOR_DISTANCE = 1.0
DONOR_ACCEPTOR_WINDOW = (0.9, 1.1)


def ring_radius(n_r: int, d: float) -> float:
    """Radius of a regular N_R-gon with side d."""
    return d / (2 * math.sin(math.pi / n_r))


def ring_positions(
    n_r: int,
    d: float,
    center: Vector3 = (0.0, 0.0, 0.0),
    rotation: float = 0.0,
) -> list[Vector3]:
    """Positions on a circle in the x-y plane, angle 2 pi j / N_R + rotation."""
    if n_r < 3:
        raise GeometryError(f"A ring needs at least 3 emitters, got {n_r}")
    if d <= 0:
        raise GeometryError(f"Emitter spacing must be positive, got {d}")

    radius = ring_radius(n_r, d)
    positions: list[Vector3] = []
    for j in range(n_r):
        angle = 2 * math.pi * j / n_r + rotation
        positions.append(
            (
                center[0] + radius * math.cos(angle),
                center[1] + radius * math.sin(angle),
                center[2],
            )
        )
    return positions


def build_ring(
    n_r: int,
    d: float,
    center: Vector3 = (0.0, 0.0, 0.0),
    rotation: float = 0.0,
    polarization: Polarization = CIRCULAR,
) -> EmitterEnsemble:
    """A single isolated ring of lattice emitters."""
    emitters = tuple(
        DipoleEmitter(position, polarization, ring_index=0)
        for position in ring_positions(n_r, d, center, rotation)
    )
    metadata = EnsembleMetadata(
        kind="single_ring",
        n_r=n_r,
        rings=1,
        d=d,
        radius=ring_radius(n_r, d),
        ring_centers=(center,),
        rotations=(rotation,),
        placement="none",
    )
    return EmitterEnsemble(emitters, metadata)


def build_geometry(spec: GeometrySpec) -> EmitterEnsemble:
    """Build the complete ensemble, donor and acceptor included, for `spec`."""
    if spec.kind not in GEOMETRY_KINDS:
        raise GeometryError(f"Unknown geometry kind '{spec.kind}'")
    if spec.d <= 0 or spec.inter_ring_spacing <= 0:
        raise GeometryError("Spacings d and d_R must be positive")

    ensemble = _BUILDERS[spec.kind](spec)
    check_separations(ensemble)

    logger.debug(
        "Built %s geometry with %d emitters (%s)",
        spec.kind,
        len(ensemble),
        ensemble.metadata.placement,
    )
    return ensemble


def check_separations(ensemble: EmitterEnsemble) -> None:
    """Raise GeometryError when two emitters sit closer than MIN_SEPARATION."""
    if len(ensemble) < 2:
        return
    closest = float(np.min(pdist(ensemble.positions)))
    if closest < MIN_SEPARATION:
        raise GeometryError(f"Emitters overlap (closest pair {closest:.3e} lambda0)")


def apply_rotational_disorder(
    ensemble: EmitterEnsemble,
    rng_seed: int,
) -> EmitterEnsemble:
    """
    Rotate every ring about its own center by a uniform angle in [0, 2 pi / N_R).

    Donor and acceptor sit in ring centers and do not move.
    """
    meta = ensemble.metadata
    if not meta.is_ring_based:
        raise GeometryError(f"Rotational disorder needs rings, got '{meta.kind}'")

    rng = np.random.default_rng(rng_seed)
    angles = rng.uniform(0.0, 2 * math.pi / meta.n_r, size=len(meta.ring_centers))

    emitters: list[DipoleEmitter] = []
    for emitter in ensemble.emitters:
        if emitter.role != LATTICE:
            emitters.append(emitter)
            continue
        center = meta.ring_centers[emitter.ring_index]
        position = _rotate_about(emitter.position, center, angles[emitter.ring_index])
        emitters.append(dataclasses.replace(emitter, position=position))

    base = meta.rotations or (0.0,) * len(meta.ring_centers)
    rotations = tuple(float(r + a) for r, a in zip(base, angles))
    return EmitterEnsemble(
        tuple(emitters), dataclasses.replace(meta, rotations=rotations)
    )


def apply_frequency_disorder(
    ensemble: EmitterEnsemble,
    sigma: float,
    rng_seed: int,
) -> EmitterEnsemble:
    """Add Gaussian(0, sigma^2) offsets to lattice detunings only."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return ensemble

    rng = np.random.default_rng(rng_seed)
    lattice = ensemble.lattice_indices
    offsets = iter(rng.normal(0.0, sigma, size=len(lattice)))

    emitters = tuple(
        dataclasses.replace(e, detuning=e.detuning + float(next(offsets)))
        if e.role == LATTICE
        else e
        for e in ensemble.emitters
    )
    return ensemble.replace_emitters(emitters)


def donor_acceptor_distance(ensemble: EmitterEnsemble) -> float:
    donor, acceptor = ensemble.donor_index, ensemble.acceptor_index
    if donor is None or acceptor is None:
        raise GeometryError("Ensemble has no donor/acceptor pair")
    positions = ensemble.positions
    return float(np.linalg.norm(positions[donor] - positions[acceptor]))


def _rotate_about(position: Vector3, center: Vector3, angle: float) -> Vector3:
    x, y = position[0] - center[0], position[1] - center[1]
    cos, sin = math.cos(angle), math.sin(angle)
    return (center[0] + cos * x - sin * y, center[1] + sin * x + cos * y, position[2])


def _partner(
    spec: GeometrySpec,
    role: str,
    position: Vector3,
    ring: int = -1,
) -> DipoleEmitter:
    """Donor or acceptor at `position` with its detuning and trap rate."""
    if role == DONOR:
        return DipoleEmitter(
            position, spec.polarization, DONOR, detuning=spec.delta, ring_index=ring
        )

    delta = spec.delta if spec.acceptor_delta is None else spec.acceptor_delta
    return DipoleEmitter(
        position,
        spec.polarization,
        ACCEPTOR,
        detuning=delta,
        trap_rate=spec.gamma_t,
        ring_index=ring,
    )


def _ring_rotation(spec: GeometrySpec, ring: int) -> float:
    if spec.rotations:
        return spec.rotation + spec.rotations[ring]
    return spec.rotation


def _ring_lattice(
    spec: GeometrySpec,
    kind: str,
    centers: list[Vector3],
    donor_ring: int,
    acceptor_ring: int,
) -> EmitterEnsemble:
    """Shared assembly for every ring-based lattice."""
    if spec.rotations and len(spec.rotations) != len(centers):
        raise GeometryError(
            f"Got {len(spec.rotations)} ring rotations for {len(centers)} rings"
        )

    emitters: list[DipoleEmitter] = []
    rotations: list[float] = []
    for ring, center in enumerate(centers):
        rotation = _ring_rotation(spec, ring)
        rotations.append(rotation)
        for position in ring_positions(spec.n_r, spec.d, center, rotation):
            emitters.append(DipoleEmitter(position, spec.polarization, ring_index=ring))

    placement = "none"
    if spec.donor_acceptor:
        placement = f"donor in ring {donor_ring}, acceptor in ring {acceptor_ring}"
        emitters.append(_partner(spec, DONOR, centers[donor_ring], donor_ring))
        emitters.append(_partner(spec, ACCEPTOR, centers[acceptor_ring], acceptor_ring))

    radius = ring_radius(spec.n_r, spec.d)
    metadata = EnsembleMetadata(
        kind=kind,
        n_r=spec.n_r,
        rings=len(centers),
        rows=spec.rows if kind != "ring_chain" else 1,
        columns=spec.columns if kind != "ring_chain" else len(centers),
        d=spec.d,
        d_r=spec.inter_ring_spacing,
        radius=radius,
        ring_spacing=2 * radius + spec.inter_ring_spacing,
        ring_centers=tuple(centers),
        rotations=tuple(rotations),
        placement=placement,
    )
    return EmitterEnsemble(tuple(emitters), metadata)


def _build_single_ring(spec: GeometrySpec) -> EmitterEnsemble:
    ring = build_ring(
        spec.n_r,
        spec.d,
        rotation=_ring_rotation(spec, 0),
        polarization=spec.polarization,
    )
    if not (spec.donor_acceptor and spec.center_donor):
        return ring

    donor = _partner(spec, DONOR, (0.0, 0.0, 0.0), 0)
    metadata = dataclasses.replace(ring.metadata, placement="donor in ring 0")
    return EmitterEnsemble(ring.emitters + (donor,), metadata)


def _build_ring_chain(spec: GeometrySpec) -> EmitterEnsemble:
    if spec.rings < 1:
        raise GeometryError(f"A ring chain needs at least one ring, got {spec.rings}")
    spacing = 2 * ring_radius(spec.n_r, spec.d) + spec.inter_ring_spacing
    centers: list[Vector3] = [(j * spacing, 0.0, 0.0) for j in range(spec.rings)]
    return _ring_lattice(spec, "ring_chain", centers, 0, spec.rings - 1)


def _build_ring_lattice_square(spec: GeometrySpec) -> EmitterEnsemble:
    _check_extents(spec.rows, spec.columns)
    spacing = 2 * ring_radius(spec.n_r, spec.d) + spec.inter_ring_spacing
    centers: list[Vector3] = [
        (ix * spacing, iy * spacing, 0.0)
        for iy in range(spec.rows)
        for ix in range(spec.columns)
    ]
    return _ring_lattice(spec, "ring_lattice_square", centers, 0, len(centers) - 1)


def _build_ring_lattice_hexagonal(spec: GeometrySpec) -> EmitterEnsemble:
    _check_extents(spec.rows, spec.columns)
    spacing = 2 * ring_radius(spec.n_r, spec.d) + spec.inter_ring_spacing
    centers: list[Vector3] = [
        ((ix + iy / 2) * spacing, iy * spacing * math.sqrt(3) / 2, 0.0)
        for iy in range(spec.rows)
        for ix in range(spec.columns)
    ]
    return _ring_lattice(spec, "ring_lattice_hexagonal", centers, 0, len(centers) - 1)


def _build_linear_chain(spec: GeometrySpec) -> EmitterEnsemble:
    if spec.sites < 2:
        raise GeometryError(f"A linear chain needs two or more sites, got {spec.sites}")
    sites: list[Vector3] = [(i * spec.d, 0.0, 0.0) for i in range(spec.sites)]
    return _site_lattice(spec, "linear_chain", sites)


def _build_hexagonal(spec: GeometrySpec) -> EmitterEnsemble:
    _check_extents(spec.rows, spec.columns)
    sites: list[Vector3] = [
        ((ix + (iy % 2) / 2) * spec.d, iy * spec.d * math.sqrt(3) / 2, 0.0)
        for iy in range(spec.rows)
        for ix in range(spec.columns)
    ]
    return _site_lattice(spec, "hexagonal", sites)


def _build_honeycomb(spec: GeometrySpec) -> EmitterEnsemble:
    """Rows of hexagonal cells with nearest-neighbor distance d; two sites per cell."""
    _check_extents(spec.rows, spec.columns)
    width = math.sqrt(3) * spec.d
    sites: list[Vector3] = []
    for iy in range(spec.rows):
        for ix in range(spec.columns):
            x0 = ix * width + (iy % 2) * width / 2
            y0 = iy * 1.5 * spec.d
            sites.append((x0, y0, 0.0))
            sites.append((x0, y0 + spec.d, 0.0))
    return _site_lattice(spec, "honeycomb", sites)


def _build_free_pair(spec: GeometrySpec) -> EmitterEnsemble:
    emitters = (
        _partner(spec, DONOR, (0.0, 0.0, 0.0)),
        _partner(spec, ACCEPTOR, (spec.d, 0.0, 0.0)),
    )
    metadata = EnsembleMetadata(
        kind="free_pair", d=spec.d, placement="pair at separation d"
    )
    return EmitterEnsemble(emitters, metadata)


def _build_single_emitter(spec: GeometrySpec) -> EmitterEnsemble:
    emitters = (_partner(spec, ACCEPTOR, (0.0, 0.0, 0.0)),)
    metadata = EnsembleMetadata(
        kind="single_emitter", d=spec.d, placement="acceptor only"
    )
    return EmitterEnsemble(emitters, metadata)


def _site_lattice(
    spec: GeometrySpec,
    kind: str,
    sites: list[Vector3],
) -> EmitterEnsemble:
    """
    Lattice of single sites; donor and acceptor replace the two sites nearest to
    the ends of a lambda0-long segment along x through the lattice center.
    """
    metadata = EnsembleMetadata(
        kind=kind, rows=spec.rows, columns=spec.columns, d=spec.d, placement="none"
    )
    if not spec.donor_acceptor:
        emitters = tuple(DipoleEmitter(site, spec.polarization) for site in sites)
        return EmitterEnsemble(emitters, metadata)

    points = np.array(sites)
    center = points.mean(axis=0)
    offset = np.array([DONOR_ACCEPTOR_DISTANCE / 2, 0.0, 0.0])
    donor = int(np.argmin(np.linalg.norm(points - (center - offset), axis=1)))
    acceptor = int(np.argmin(np.linalg.norm(points - (center + offset), axis=1)))

    separation = float(np.linalg.norm(points[donor] - points[acceptor]))
    low, high = DONOR_ACCEPTOR_WINDOW
    if not low <= separation <= high:
        raise GeometryError(
            f"{kind} extents too small: donor-acceptor distance {separation:.3f} "
            f"outside [{low}, {high}] lambda0"
        )

    emitters_list = [
        DipoleEmitter(site, spec.polarization)
        for i, site in enumerate(sites)
        if i not in (donor, acceptor)
    ]
    emitters_list.append(_partner(spec, DONOR, sites[donor]))
    emitters_list.append(_partner(spec, ACCEPTOR, sites[acceptor]))

    placement = f"substituted sites {donor} (donor) and {acceptor} (acceptor)"
    return EmitterEnsemble(
        tuple(emitters_list), dataclasses.replace(metadata, placement=placement)
    )


def _check_extents(rows: int, columns: int) -> None:
    if rows < 1 or columns < 1:
        raise GeometryError(f"Lattice extents must be positive, got {rows}x{columns}")


_BUILDERS: dict[str, Callable[[GeometrySpec], EmitterEnsemble]] = {
    "single_ring": _build_single_ring,
    "ring_chain": _build_ring_chain,
    "ring_lattice_square": _build_ring_lattice_square,
    "ring_lattice_hexagonal": _build_ring_lattice_hexagonal,
    "linear_chain": _build_linear_chain,
    "hexagonal": _build_hexagonal,
    "honeycomb": _build_honeycomb,
    "free_pair": _build_free_pair,
    "single_emitter": _build_single_emitter,
}
