"""Free-space dyadic Green's tensor and the J / Gamma coupling matrices."""
from __future__ import annotations

import functools
import logging
import math

import numpy as np

from ring_harvest.ringmodel import CIRCULAR
from ring_harvest.ringmodel import ComplexArray
from ring_harvest.ringmodel import CouplingMatrices
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import FloatArray
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import Polarization

logger = logging.getLogger(__name__)

K0 = 2 * math.pi
SINGULAR_SEPARATION = 1e-6

_CacheKey = tuple[
    tuple[tuple[float, float, float], ...],
    tuple[Polarization, ...],
    tuple[float, ...],
]


def green_tensor(r_vec: FloatArray, k0: float = K0) -> ComplexArray:
    """
    G(r, omega0) for separation vectors of shape (..., 3); returns (..., 3, 3).

        G = e^{ikr} / (4 pi k^2 r^3)
            * [(k^2 r^2 + ikr - 1) I - (k^2 r^2 + 3ikr - 3) rr / r^2]
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec, axis=-1)
    _check_singular(r)

    kr = k0 * r
    prefactor = np.exp(1j * kr) / (4 * np.pi * k0**2 * r**3)
    transverse = kr**2 + 1j * kr - 1
    longitudinal = kr**2 + 3j * kr - 3

    r_hat = r_vec / r[..., None]
    outer = r_hat[..., :, None] * r_hat[..., None, :]
    identity = np.eye(3)
    return prefactor[..., None, None] * (
        transverse[..., None, None] * identity - longitudinal[..., None, None] * outer
    )


def green_projected(
    r_nm: FloatArray,
    p_n: Polarization,
    p_m: Polarization,
    k0: float = K0,
) -> complex:
    """G_nm = p_n^* . G(r_nm) . p_m for one pair."""
    tensor = green_tensor(np.asarray(r_nm, dtype=float), k0)
    return complex(np.conj(np.asarray(p_n)) @ tensor @ np.asarray(p_m))


def pair_couplings(
    r_nm: FloatArray,
    p_n: Polarization = CIRCULAR,
    p_m: Polarization = CIRCULAR,
    k0: float = K0,
) -> tuple[float, float]:
    """(J_nm, Gamma_nm) of one pair in Gamma0 units."""
    g = green_projected(r_nm, p_n, p_m, k0)
    return -3 * math.pi / k0 * g.real, 6 * math.pi / k0 * g.imag


def nearest_neighbor_coupling(d: float, polarization: Polarization = CIRCULAR) -> float:
    """Coherent coupling J of two emitters at in-plane separation d."""
    j, _ = pair_couplings(np.array([d, 0.0, 0.0]), polarization, polarization)
    return j


def coupling_matrices(ensemble: EmitterEnsemble) -> CouplingMatrices:
    """
    J and Gamma for every pair of the ensemble.

    Matrices depend on positions, polarizations and decay rates only, so
    detuning disorder reuses the cached result.
    """
    key: _CacheKey = (
        tuple(e.position for e in ensemble.emitters),
        tuple(e.polarization for e in ensemble.emitters),
        tuple(e.decay_rate for e in ensemble.emitters),
    )
    return _cached_couplings(key)


@functools.lru_cache(maxsize=128)
def _cached_couplings(key: _CacheKey) -> CouplingMatrices:
    positions = np.array(key[0], dtype=float)
    polarizations = np.array(key[1], dtype=complex)
    decay_rates = np.array(key[2], dtype=float)

    logger.debug("Computing couplings for %d emitters", len(positions))
    j, gamma = _coupling_arrays(positions, polarizations, decay_rates, K0)
    j.flags.writeable = False
    gamma.flags.writeable = False
    return CouplingMatrices(j=j, gamma=gamma, k0=K0)


def cross_couplings(
    positions_a: FloatArray,
    polarizations_a: ComplexArray,
    positions_b: FloatArray,
    polarizations_b: ComplexArray,
    k0: float = K0,
) -> tuple[FloatArray, FloatArray]:
    """J and Gamma blocks between two disjoint emitter sets; shape (N_a, N_b)."""
    rows, cols = np.meshgrid(
        np.arange(len(positions_a)), np.arange(len(positions_b)), indexing="ij"
    )
    g = _projected_kernel(
        positions_a[rows.ravel()] - positions_b[cols.ravel()],
        polarizations_a[rows.ravel()],
        polarizations_b[cols.ravel()],
        k0,
    ).reshape(rows.shape)
    return -3 * np.pi / k0 * g.real, 6 * np.pi / k0 * g.imag


def _coupling_arrays(
    positions: FloatArray,
    polarizations: ComplexArray,
    decay_rates: FloatArray,
    k0: float,
) -> tuple[FloatArray, FloatArray]:
    n = len(positions)
    j = np.zeros((n, n))
    gamma = np.diag(decay_rates).astype(float)
    if n < 2:
        return j, gamma

    rows, cols = np.triu_indices(n, k=1)
    g = _projected_kernel(
        positions[rows] - positions[cols], polarizations[rows], polarizations[cols], k0
    )

    j[rows, cols] = -3 * np.pi / k0 * g.real
    gamma[rows, cols] = 6 * np.pi / k0 * g.imag
    j[cols, rows] = j[rows, cols]
    gamma[cols, rows] = gamma[rows, cols]
    return j, gamma


def _projected_kernel(
    r_vec: FloatArray,
    p_n: ComplexArray,
    p_m: ComplexArray,
    k0: float,
) -> ComplexArray:
    """p_n^* . G(r) . p_m for stacked pairs, without building the 3x3 tensors."""
    r = np.linalg.norm(r_vec, axis=-1)
    _check_singular(r)

    kr = k0 * r
    prefactor = np.exp(1j * kr) / (4 * np.pi * k0**2 * r**3)
    transverse = kr**2 + 1j * kr - 1
    longitudinal = kr**2 + 3j * kr - 3

    r_hat = r_vec / r[:, None]
    bra = np.conj(p_n)
    dot = np.einsum("ij,ij->i", bra, p_m)
    projected = np.einsum("ij,ij->i", bra, r_hat) * np.einsum("ij,ij->i", r_hat, p_m)
    return np.asarray(prefactor * (transverse * dot - longitudinal * projected))


def _check_singular(r: FloatArray) -> None:
    if np.any(r < SINGULAR_SEPARATION):
        raise GeometryError(
            f"Singular separation {float(np.min(r)):.3e} lambda0 in Green's tensor"
        )
