"""
Single-excitation dynamics under i d/dt psi = H psi + f.

Propagation is spectral: H is diagonalized once and every amplitude, and
every time integral of a quadratic form psi^dagger A psi, is evaluated in
closed form in the eigenbasis. An adaptive integrator and a trapezoid
quadrature are kept as independent cross-checks.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import time
from typing import Callable
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from ring_harvest.ringmodel import ComplexArray
from ring_harvest.ringmodel import DriveVector
from ring_harvest.ringmodel import EffectiveHamiltonian
from ring_harvest.ringmodel import FloatArray
from ring_harvest.ringmodel import GeometryError
from ring_harvest.ringmodel import NumericalError

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 150.0
BUDGET_TOLERANCE = 1e-4
CONDITION_WARNING = 1e10
CONDITION_LIMIT = 1e14
SERIES_THRESHOLD = 1e-5
CHUNK_ELEMENTS = 2_000_000


@dataclasses.dataclass(frozen=True, eq=False)
class AmplitudeState:
    """Amplitudes alpha_m(t) of the single-excitation state at `time`."""

    amplitudes: ComplexArray
    time: float = 0.0

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


class SpectralPropagator:
    """Eigendecomposition of one Hamiltonian, optionally with a constant drive."""

    logger = logging.getLogger(__name__)

    def __init__(
        self,
        hamiltonian: EffectiveHamiltonian,
        drive: Optional[DriveVector] = None,
    ) -> None:
        matrix = hamiltonian.matrix
        if not np.all(np.isfinite(matrix)):
            raise NumericalError("Hamiltonian has non-finite entries")

        try:
            eigenvalues, eigenvectors = scipy.linalg.eig(matrix)
        except (np.linalg.LinAlgError, ValueError) as error:
            raise NumericalError(
                f"Eigensolver failed on a {hamiltonian.size}x{hamiltonian.size} "
                f"Hamiltonian (norm {np.linalg.norm(matrix):.3e}): {error}"
            ) from error

        condition = float(np.linalg.cond(eigenvectors))
        if not math.isfinite(condition) or condition > CONDITION_LIMIT:
            raise NumericalError(
                f"Eigenvector basis is singular (condition number {condition:.3e})"
            )
        if condition > CONDITION_WARNING:
            self.logger.warning(
                "Eigenvector basis is ill-conditioned (condition number %.3e)",
                condition,
            )

        self.hamiltonian = hamiltonian
        self.eigenvalues: ComplexArray = eigenvalues
        self.eigenvectors: ComplexArray = eigenvectors
        self.condition = condition
        self.drive = drive
        self.steady = self._steady_state(drive)

    @property
    def size(self) -> int:
        return self.hamiltonian.size

    def coefficients(self, psi0: ComplexArray) -> ComplexArray:
        """Expansion of psi0 - psi_ss in the right eigenvectors."""
        shifted = np.asarray(psi0, dtype=complex) - self.steady
        return np.asarray(scipy.linalg.solve(self.eigenvectors, shifted))

    def amplitudes(self, coefficients: ComplexArray, times: FloatArray) -> ComplexArray:
        """psi(t) for every t; shape (len(times), N)."""
        phases = np.exp(-1j * np.outer(times, self.eigenvalues))
        psi = (phases * coefficients) @ self.eigenvectors.T + self.steady
        if not np.all(np.isfinite(psi)):
            raise NumericalError("Propagation produced non-finite amplitudes")
        return np.asarray(psi)

    def quadratic_integrals(
        self,
        coefficients: ComplexArray,
        operators: list[ComplexArray],
        times: FloatArray,
    ) -> FloatArray:
        """
        integral_0^t psi^dagger A psi dt' for every operator and time point.

        Returns shape (len(operators), len(times)).
        """
        vectors = self.eigenvectors
        eigenvalues = self.eigenvalues
        weights = np.array(
            [
                np.conj(coefficients)[:, None]
                * (vectors.conj().T @ operator @ vectors)
                * coefficients[None, :]
                for operator in operators
            ]
        )
        rates = 1j * (np.conj(eigenvalues)[:, None] - eigenvalues[None, :])

        size = len(eigenvalues)
        chunk = max(1, CHUNK_ELEMENTS // max(1, size * size))
        result = np.zeros((len(operators), len(times)))
        for start in range(0, len(times), chunk):
            window = times[start : start + chunk]
            exponents = _exp_integral(rates[None, :, :], window[:, None, None])
            result[:, start : start + chunk] = np.einsum(
                "tkl,skl->st", exponents, weights
            ).real

        if np.any(self.steady):
            result += self._drive_terms(coefficients, operators, times)
        return result

    def _drive_terms(
        self,
        coefficients: ComplexArray,
        operators: list[ComplexArray],
        times: FloatArray,
    ) -> FloatArray:
        """Steady-state and cross terms of a driven quadratic-form integral."""
        steady = self.steady
        modes = _exp_integral(-1j * self.eigenvalues[None, :], times[:, None])
        terms = np.zeros((len(operators), len(times)))
        for s, operator in enumerate(operators):
            constant = float(np.vdot(steady, operator @ steady).real)
            cross = (steady.conj() @ operator @ self.eigenvectors) * coefficients
            terms[s] = constant * times + 2 * (modes @ cross).real
        return terms

    def _steady_state(self, drive: Optional[DriveVector]) -> ComplexArray:
        if drive is None:
            return np.zeros(self.size, dtype=complex)
        if len(drive.amplitudes) != self.size:
            raise ValueError(
                f"Drive has {len(drive.amplitudes)} entries for {self.size} emitters"
            )
        steady = -scipy.linalg.solve(self.hamiltonian.matrix, drive.amplitudes)
        return np.asarray(steady, dtype=complex)


@dataclasses.dataclass(frozen=True, eq=False)
class TransportTrace:
    """
    Time series of one evolution.

    `trapped` is the cumulative trap-channel integral, which is the transport
    efficiency eta_t for the Hamiltonian's own Gamma_T.
    """

    times: FloatArray
    amplitudes: ComplexArray
    donor_pop: FloatArray
    acceptor_pop: FloatArray
    norm2: FloatArray
    radiated: FloatArray
    trapped: FloatArray
    initial_norm2: float
    driven: bool
    propagator: SpectralPropagator
    coefficients: ComplexArray

    @property
    def eta_t(self) -> FloatArray:
        return self.trapped

    def state_at(self, index: int) -> AmplitudeState:
        return AmplitudeState(self.amplitudes[index], float(self.times[index]))


def donor_excited_state(hamiltonian: EffectiveHamiltonian) -> AmplitudeState:
    """Unit excitation on the donor (on the only emitter of a one-emitter system)."""
    index = hamiltonian.donor_index
    if index is None and hamiltonian.size == 1:
        index = 0
    if index is None:
        raise GeometryError("Hamiltonian has no donor to excite")
    amplitudes = np.zeros(hamiltonian.size, dtype=complex)
    amplitudes[index] = 1.0
    return AmplitudeState(amplitudes)


def time_grid(horizon: float = DEFAULT_HORIZON, step: float = 0.1) -> FloatArray:
    """Uniform grid 0, step, ..., horizon (horizon included)."""
    if horizon <= 0 or step <= 0:
        raise ValueError("horizon and step must be positive")
    points = int(round(horizon / step)) + 1
    return np.linspace(0.0, horizon, points)


def evolve(
    hamiltonian: EffectiveHamiltonian,
    psi0: AmplitudeState,
    times: FloatArray,
    drive: Optional[DriveVector] = None,
    propagator: Optional[SpectralPropagator] = None,
) -> TransportTrace:
    """
    Propagate psi0 over `times` (measured from psi0's own time).

    Pass a prebuilt `propagator` to reuse one eigendecomposition across
    initial states; it carries its own drive, so `drive` must then be None.
    """
    if propagator is not None and drive is not None:
        raise ValueError("Pass the drive to the SpectralPropagator, not to evolve")
    psi = np.asarray(psi0.amplitudes, dtype=complex)
    if psi.shape != (hamiltonian.size,):
        raise ValueError(
            f"Initial state has shape {psi.shape}, expected ({hamiltonian.size},)"
        )
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1D grid")
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be non-negative and strictly increasing")

    tic = time.perf_counter()
    if propagator is None:
        propagator = SpectralPropagator(hamiltonian, drive)
    coefficients = propagator.coefficients(psi)
    amplitudes = propagator.amplitudes(coefficients, times)

    trap_operator = np.diag(hamiltonian.trap_rates).astype(complex)
    radiated, trapped = propagator.quadratic_integrals(
        coefficients, [hamiltonian.radiative_operator, trap_operator], times
    )

    populations = np.abs(amplitudes) ** 2
    donor, acceptor = hamiltonian.donor_index, hamiltonian.acceptor_index
    absent = np.zeros(len(times))
    trace = TransportTrace(
        times=times,
        amplitudes=amplitudes,
        donor_pop=populations[:, donor] if donor is not None else absent,
        acceptor_pop=populations[:, acceptor] if acceptor is not None else absent,
        norm2=populations.sum(axis=1),
        radiated=radiated,
        trapped=trapped,
        initial_norm2=float(np.vdot(psi, psi).real),
        driven=propagator.drive is not None,
        propagator=propagator,
        coefficients=coefficients,
    )

    logger.debug(
        "Evolved %d emitters over %d time points in %.3f seconds",
        hamiltonian.size,
        len(times),
        time.perf_counter() - tic,
    )
    return trace


def transport_efficiency(trace: TransportTrace, gamma_t: float, t: float) -> float:
    """
    eta_t = Gamma_T integral_0^t |alpha_a|^2 dt', evaluated in closed form.

    Raises NumericalError when eta_t leaves [0, initial norm] by more than the
    budget tolerance; smaller excursions are clamped.
    """
    if not 0 <= t <= trace.times[-1]:
        raise ValueError(f"t={t} lies outside the trace window [0, {trace.times[-1]}]")
    if gamma_t < 0:
        raise ValueError(f"Gamma_T must be non-negative, got {gamma_t}")

    hamiltonian = trace.propagator.hamiltonian
    acceptor = hamiltonian.acceptor_index
    if acceptor is None:
        raise GeometryError("Trace has no acceptor")

    operator = np.zeros((hamiltonian.size, hamiltonian.size), dtype=complex)
    operator[acceptor, acceptor] = 1.0
    integral = trace.propagator.quadratic_integrals(
        trace.coefficients, [operator], np.array([t])
    )[0, 0]
    eta = float(gamma_t * integral)
    upper = math.inf if trace.driven else trace.initial_norm2
    if not -BUDGET_TOLERANCE <= eta <= upper + BUDGET_TOLERANCE:
        raise NumericalError(
            f"eta_t={eta:.6e} lies outside [0, {upper}] "
            f"(eigenvector condition number {trace.propagator.condition:.3e})"
        )
    return min(max(eta, 0.0), upper)


def excitation_budget(trace: TransportTrace) -> tuple[float, float, float]:
    """
    (remaining, radiated, trapped) at the end of an undriven trace.

    Raises NumericalError when any grid point loses more than 1e-4 of the
    initial norm to integration error.
    """
    if trace.driven:
        raise ValueError("The excitation budget is only defined without a drive")

    total = trace.norm2 + trace.radiated + trace.trapped
    error = float(np.max(np.abs(total - trace.initial_norm2)))
    if error > BUDGET_TOLERANCE:
        raise NumericalError(
            f"Excitation budget violated by {error:.3e} "
            f"(eigenvector condition number {trace.propagator.condition:.3e})"
        )
    return float(trace.norm2[-1]), float(trace.radiated[-1]), float(trace.trapped[-1])


def eigenstate_fidelity(states: ComplexArray, mode: ComplexArray) -> FloatArray:
    """|<psi(t)|mode>|^2 for every row of `states` (or a single state)."""
    mode = np.asarray(mode, dtype=complex)
    norm = float(np.linalg.norm(mode))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"Mode must be unit-normalized, got norm {norm}")
    overlaps = np.atleast_2d(states).conj() @ mode
    return np.asarray(np.abs(overlaps) ** 2)


def integrate_amplitudes(
    hamiltonian: EffectiveHamiltonian,
    psi0: AmplitudeState,
    times: FloatArray,
    drive: Optional[DriveVector] = None,
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> ComplexArray:
    """Adaptive DOP853 integration of the same equation; shape (len(times), N)."""
    matrix = hamiltonian.matrix
    forcing = (
        np.zeros(hamiltonian.size, dtype=complex)
        if drive is None
        else drive.amplitudes.astype(complex)
    )

    def rhs(_: float, psi: ComplexArray) -> ComplexArray:
        return np.asarray(-1j * (matrix @ psi + forcing))

    times = np.asarray(times, dtype=float)
    solution = solve_ivp(
        rhs,
        (float(times[0]), float(times[-1])),
        np.asarray(psi0.amplitudes, dtype=complex),
        method="DOP853",
        t_eval=times,
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise NumericalError(f"Adaptive integration failed: {solution.message}")
    return np.asarray(solution.y.T)


def trapezoid_efficiency(trace: TransportTrace, gamma_t: float) -> FloatArray:
    """Cumulative trapezoid of Gamma_T |alpha_a|^2 on the trace's own grid."""
    integral = cumulative_trapezoid(trace.acceptor_pop, trace.times, initial=0.0)
    return np.asarray(gamma_t * integral)


@dataclasses.dataclass(frozen=True)
class DetuningScan:
    """Result of a detuning optimization and every evaluation it made."""

    best_delta: float
    best_efficiency: float
    deltas: tuple[float, ...]
    efficiencies: tuple[float, ...]


def optimize_detuning(
    efficiency: Callable[[float], float],
    bounds: tuple[float, float] = (-15.0, 15.0),
    tol: float = 1e-3,
    coarse_points: int = 31,
) -> DetuningScan:
    """
    Maximize `efficiency` over the donor/acceptor detuning.

    A coarse grid brackets the best point and bounded Brent (golden-section
    with parabolic steps) refines it within one grid cell.
    """
    low, high = bounds
    if not low < high:
        raise ValueError(f"Invalid detuning bounds {bounds}")
    if coarse_points < 3:
        raise ValueError("coarse_points must be at least 3")

    deltas: list[float] = []
    efficiencies: list[float] = []

    def evaluate(delta: float) -> float:
        value = float(efficiency(delta))
        deltas.append(float(delta))
        efficiencies.append(value)
        return value

    grid = np.linspace(low, high, coarse_points)
    coarse = [evaluate(float(delta)) for delta in grid]
    best = int(np.argmax(coarse))

    left = float(grid[max(best - 1, 0)])
    right = float(grid[min(best + 1, coarse_points - 1)])
    refined = minimize_scalar(
        lambda delta: -evaluate(float(delta)),
        bounds=(left, right),
        method="bounded",
        options={"xatol": tol},
    )

    best_delta, best_value = float(grid[best]), coarse[best]
    if -float(refined.fun) > best_value:
        best_delta, best_value = float(refined.x), -float(refined.fun)

    logger.debug(
        "Detuning optimum %.4f with efficiency %.6f after %d evaluations",
        best_delta,
        best_value,
        len(deltas),
    )
    return DetuningScan(best_delta, best_value, tuple(deltas), tuple(efficiencies))


def _exp_integral(rates: ComplexArray, times: FloatArray) -> ComplexArray:
    """integral_0^t e^{mu t'} dt' = (e^{mu t} - 1) / mu, series near mu t = 0."""
    product = rates * times
    small = np.abs(product) < SERIES_THRESHOLD
    safe_rates = np.where(small, 1.0, rates)
    exact = np.expm1(np.where(small, 0.0, product)) / safe_rates
    series = times * (1 + product / 2 + product**2 / 6)
    return np.asarray(np.where(small, series, exact))
