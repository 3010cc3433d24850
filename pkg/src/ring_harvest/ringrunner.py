"""Scenario orchestration: analyses, parameter sweeps and disorder ensembles."""
from __future__ import annotations

import dataclasses
import importlib.metadata
import itertools
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable
from typing import Optional

import numpy as np
import scipy

from ring_harvest.ringconfig import ScenarioConfig
from ring_harvest.ringcoupling import coupling_matrices
from ring_harvest.ringdynamics import donor_excited_state
from ring_harvest.ringdynamics import eigenstate_fidelity
from ring_harvest.ringdynamics import evolve
from ring_harvest.ringdynamics import excitation_budget
from ring_harvest.ringdynamics import optimize_detuning
from ring_harvest.ringdynamics import time_grid
from ring_harvest.ringgeometry import apply_frequency_disorder
from ring_harvest.ringgeometry import apply_rotational_disorder
from ring_harvest.ringgeometry import build_geometry
from ring_harvest.ringgeometry import donor_acceptor_distance
from ring_harvest.ringhamiltonian import assemble_effective
from ring_harvest.ringmodel import ConfigError
from ring_harvest.ringmodel import EmitterEnsemble
from ring_harvest.ringmodel import GeometrySpec
from ring_harvest.ringmodel import NumericalError
from ring_harvest.ringmodel import RingHarvestError
from ring_harvest.ringspectrum import bloch_bands_for
from ring_harvest.ringspectrum import classify_bands
from ring_harvest.ringspectrum import diagonalize
from ring_harvest.ringspectrum import edge_localization
from ring_harvest.ringspectrum import group_velocity_and_optimal_trap
from ring_harvest.ringspectrum import ring_center_analytics
from ring_harvest.ringspectrum import spin_wave_spectrum
from ring_harvest.ringspectrum import zak_convergence
from ring_harvest.ringsteady import trapping_rate_scan
from ring_harvest.ringwriter import Cell
from ring_harvest.ringwriter import ResultTable
from ring_harvest.ringwriter import ResultWriter

logger = logging.getLogger(__name__)

PRIMARY_METRIC = {
    "geometry": "emitters",
    "coupling": "j_nn",
    "transport": "eta_t",
    "bands": "min_gap_over_j",
    "zak": "zak_phase",
    "edges": "min_bulk_weight",
    "steady": "peak_normalized_rate",
    "analytics": "gamma_eff",
    "trap_optimum": "gamma_t_argmax",
}
UNDISORDERED = ("steady", "analytics")
GEOMETRY_COLUMNS = (
    "index", "x", "y", "z", "role", "detuning", "trap_rate", "ring_index"
)
TRANSPORT_COLUMNS = ("t", "donor_pop", "acceptor_pop", "norm2", "eta_t", "radiated")
BANDS_COLUMNS = (
    "mode_index",
    "Re_lambda",
    "decay",
    "m_abs",
    "k",
    "fidelity",
    "edge_weight",
    "corner_weight",
)
STEADY_COLUMNS = (
    "gamma_T", "gamma_T_over_J", "trap_rate", "normalized_rate", "waist", "delta"
)


@dataclasses.dataclass(frozen=True)
class PointResult:
    """Scalars of one (sweep point, realization) and its detail tables."""

    scalars: dict[str, float]
    tables: tuple[ResultTable, ...] = ()


@dataclasses.dataclass(frozen=True)
class EnsembleResult:
    metric: str
    values: tuple[float, ...]
    seeds: tuple[int, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))


@dataclasses.dataclass(frozen=True)
class RunResult:
    tables: tuple[ResultTable, ...]
    summary: dict[str, object]
    ensembles: tuple[EnsembleResult, ...]


def build_ensemble(
    config: ScenarioConfig,
    seed: int,
    spec: Optional[GeometrySpec] = None,
) -> EmitterEnsemble:
    """Geometry of the config with the realization's disorder applied."""
    ensemble = build_geometry(spec or config.geometry_spec())
    if config.disorder_type == "frequency":
        return apply_frequency_disorder(ensemble, config.sigma, seed)
    if config.disorder_type == "rotation":
        return apply_rotational_disorder(ensemble, seed)
    return ensemble


def final_efficiency(config: ScenarioConfig, seed: int, spec: GeometrySpec) -> float:
    """eta_t at the horizon, evaluated without the intermediate time grid."""
    hamiltonian = assemble_effective(build_ensemble(config, seed, spec))
    trace = evolve(
        hamiltonian,
        donor_excited_state(hamiltonian),
        np.array([0.0, config.horizon]),
    )
    return float(trace.eta_t[-1])


def run_geometry(config: ScenarioConfig, seed: int) -> PointResult:
    ensemble = build_ensemble(config, seed)
    meta = ensemble.metadata
    rows = tuple(
        (
            index,
            *emitter.position,
            emitter.role,
            emitter.detuning,
            emitter.trap_rate,
            emitter.ring_index,
        )
        for index, emitter in enumerate(ensemble.emitters)
    )
    has_pair = ensemble.donor_index is not None and ensemble.acceptor_index is not None
    scalars = {
        "emitters": float(len(ensemble)),
        "lattice_emitters": float(len(ensemble.lattice_indices)),
        "rings": float(len(meta.ring_centers)),
        "radius": meta.radius,
        "ring_spacing": meta.ring_spacing,
        "donor_acceptor_distance": (
            donor_acceptor_distance(ensemble) if has_pair else math.nan
        ),
    }
    table = ResultTable(
        name="emitters",
        columns=GEOMETRY_COLUMNS,
        rows=rows,
        x="x",
        y=("y",),
    )
    return PointResult(scalars, (table,))


def run_coupling(config: ScenarioConfig, seed: int) -> PointResult:
    couplings = coupling_matrices(build_ensemble(config, seed))
    size = couplings.size
    rows = tuple(
        (row, col, float(couplings.j[row, col]), float(couplings.gamma[row, col]))
        for row in range(size)
        for col in range(size)
    )
    off_diagonal = np.abs(couplings.j[~np.eye(size, dtype=bool)])
    scalars = {
        "j_nn": config.j_nn,
        "max_abs_j": float(off_diagonal.max()) if size > 1 else 0.0,
        "min_gamma_eigenvalue": float(np.linalg.eigvalsh(couplings.gamma).min()),
    }
    table = ResultTable(
        name="couplings",
        columns=("row", "column", "j", "gamma"),
        rows=rows,
        x="column",
        y=("row",),
        value="j",
    )
    return PointResult(scalars, (table,))


def run_transport(config: ScenarioConfig, seed: int) -> PointResult:
    """Donor-to-acceptor transport, optionally at the optimal detuning."""
    spec = config.geometry_spec()
    tables: list[ResultTable] = []

    delta = config.delta
    if config.delta_optimized:
        scan = optimize_detuning(
            lambda value: final_efficiency(
                config, seed, dataclasses.replace(spec, delta=value)
            ),
            bounds=config.delta_bounds,
        )
        delta = scan.best_delta
        evaluations = sorted(zip(scan.deltas, scan.efficiencies))
        tables.append(
            ResultTable(
                name="detuning_scan",
                columns=("delta", "eta_t"),
                rows=tuple(evaluations),
                x="delta",
                y=("eta_t",),
            )
        )

    ensemble = build_ensemble(config, seed, dataclasses.replace(spec, delta=delta))
    hamiltonian = assemble_effective(ensemble)
    trace = evolve(
        hamiltonian,
        donor_excited_state(hamiltonian),
        time_grid(config.horizon, config.time_step),
    )
    remaining, radiated, trapped = excitation_budget(trace)

    columns = list(TRANSPORT_COLUMNS)
    series = [
        trace.times,
        trace.donor_pop,
        trace.acceptor_pop,
        trace.norm2,
        trace.eta_t,
        trace.radiated,
    ]
    if config.track_edge_states:
        report = edge_localization(diagonalize(hamiltonian), ensemble)
        for index in report.edge_states:
            mode = report.modes.eigenvectors[:, index]
            columns.append(f"fidelity_{index}")
            series.append(eigenstate_fidelity(trace.amplitudes, mode))

    tables.append(
        ResultTable(
            name="trace",
            columns=tuple(columns),
            rows=tuple(tuple(float(v) for v in row) for row in zip(*series)),
            x="t",
            y=("donor_pop", "eta_t", *columns[len(TRANSPORT_COLUMNS) :]),
        )
    )
    scalars = {
        "delta": delta,
        "eta_t": trapped,
        "donor_pop": float(trace.donor_pop[-1]),
        "acceptor_pop": float(trace.acceptor_pop[-1]),
        "remaining": remaining,
        "radiated": radiated,
    }
    return PointResult(scalars, tuple(tables))


def run_bands(config: ScenarioConfig, seed: int) -> PointResult:
    ensemble = build_ensemble(config, seed)
    structure = classify_bands(diagonalize(assemble_effective(ensemble)), ensemble)
    rows = tuple(
        (
            p.mode_index,
            p.shift,
            p.decay,
            p.m_abs,
            p.k,
            p.fidelity,
            p.edge_weight,
            p.corner_weight,
        )
        for p in structure.points
    )
    scalars = {
        "gap_m0": structure.gap_m0,
        "gap_m1": structure.gap_m1,
        "min_gap": structure.min_gap,
        "min_gap_over_j": structure.min_gap / abs(config.j_nn),
        "edge_states": float(len(structure.edge_states)),
        "low_confidence": float(structure.low_confidence),
    }
    table = ResultTable(
        name="bands",
        columns=BANDS_COLUMNS,
        rows=rows,
    )
    return PointResult(scalars, (table,))


def run_zak(config: ScenarioConfig, seed: int) -> PointResult:
    """Zak phase convergence and the infinite-chain bands it is computed from."""
    ensemble = build_ensemble(config, seed)
    m_abs = config.m_abs or 0
    phases = zak_convergence(ensemble, config.zak_grids, m_abs, config.bloch_cells)

    bands = bloch_bands_for(ensemble, config.k_points, config.bloch_cells)
    band_rows = tuple(
        (
            float(k),
            band,
            float(bands.eigenvalues[index, band].real),
            float(-2 * bands.eigenvalues[index, band].imag),
            bands.m_labels[int(np.argmax(bands.m_weights[index, band]))],
        )
        for index, k in enumerate(bands.k)
        for band in range(bands.band_count)
    )

    finest, previous = phases[-1][1], phases[-2][1] if len(phases) > 1 else math.nan
    scalars = {
        "m_abs": float(m_abs),
        "zak_phase": finest,
        "convergence": _angle_between(finest, previous),
    }
    tables = (
        ResultTable(
            name="zak",
            columns=("k_points", "zak_phase"),
            rows=tuple(phases),
            x="k_points",
            y=("zak_phase",),
        ),
        ResultTable(
            name="bloch_bands",
            columns=("k", "band", "shift", "decay", "m_abs"),
            rows=band_rows,
        ),
    )
    return PointResult(scalars, tables)


def run_edges(config: ScenarioConfig, seed: int) -> PointResult:
    """Boundary localization; ring chains count in-gap edge states only."""
    ensemble = build_ensemble(config, seed)
    modes = diagonalize(assemble_effective(ensemble))
    report = edge_localization(modes, ensemble)

    states = report.edge_states
    if ensemble.metadata.kind == "ring_chain":
        states = classify_bands(modes, ensemble).edge_states

    selected = list(states)
    scalars = {
        "edge_states": float(len(selected)),
        "min_bulk_weight": (
            float(report.bulk_weight[selected].min()) if selected else math.nan
        ),
        "max_edge_weight": float(report.edge_weight.max()),
        "max_corner_weight": float(report.corner_weight.max()),
        "superradiant_edge_states": float(np.sum(report.superradiant[selected])),
    }
    rows = tuple(
        (
            index,
            float(report.modes.shifts[index]),
            float(report.modes.decays[index]),
            float(report.edge_weight[index]),
            float(report.bulk_weight[index]),
            float(report.left_weight[index]),
            float(report.right_weight[index]),
            float(report.corner_weight[index]),
            bool(report.superradiant[index]),
        )
        for index in range(report.modes.size)
    )
    table = ResultTable(
        name="edges",
        columns=(
            "mode",
            "shift",
            "decay",
            "edge_weight",
            "bulk_weight",
            "left_weight",
            "right_weight",
            "corner_weight",
            "superradiant",
        ),
        rows=rows,
    )
    return PointResult(scalars, (table,))


def run_steady(config: ScenarioConfig, seed: int) -> PointResult:
    curve = trapping_rate_scan(
        config.geometry_spec(),
        config.gamma_t_grid,
        config.waist,
        config.delta,
        config.omega0,
        config.beam_center,
    )
    rates = curve.normalized_rate
    if np.all(np.isnan(rates)):
        logger.warning("No finite normalized trapping rate; every Gamma_T is zero")
        peak_rate, peak_gamma_t = math.nan, math.nan
    else:
        peak = int(np.nanargmax(rates))
        peak_rate, peak_gamma_t = float(rates[peak]), float(curve.gamma_t[peak])
    scalars = {
        "peak_normalized_rate": peak_rate,
        "gamma_t_at_peak": peak_gamma_t,
        "normalized_rate_first": float(curve.normalized_rate[0]),
        "j_nn": curve.j_nn,
        "sigma0": curve.sigma0,
    }
    table = ResultTable(
        name="trapping",
        columns=STEADY_COLUMNS,
        rows=tuple(
            (gamma_t, over_j, rate, normalized, config.waist, config.delta)
            for gamma_t, over_j, rate, normalized in zip(
                curve.gamma_t.tolist(),
                curve.gamma_t_over_j.tolist(),
                curve.trap_rate.tolist(),
                curve.normalized_rate.tolist(),
            )
        ),
        x="gamma_T_over_J",
        y=("normalized_rate",),
        log_x=True,
    )
    return PointResult(scalars, (table,))


def run_analytics(config: ScenarioConfig, seed: int) -> PointResult:
    ring = build_geometry(config.geometry_spec())
    analytics = ring_center_analytics(ring, config.delta_bounds)
    scalars = {
        "j0_tilde": analytics.j0_tilde,
        "gamma0_tilde": analytics.gamma0_tilde,
        "j_d": analytics.j_d,
        "gamma_d": analytics.gamma_d,
        "delta_sub": analytics.delta_sub,
        "gamma_eff": analytics.gamma_eff,
        "delta_min_decay": analytics.delta_min_decay,
        "gamma_min_decay": analytics.gamma_min_decay,
        "donor_fraction": analytics.donor_fraction,
        "ring_fraction": analytics.ring_fraction,
    }
    tables = (
        ResultTable(
            name="center_modes",
            columns=("delta", "plus_shift", "plus_decay", "minus_shift", "minus_decay"),
            rows=tuple(
                (
                    float(delta),
                    float(plus.real),
                    float(-2 * plus.imag),
                    float(minus.real),
                    float(-2 * minus.imag),
                )
                for delta, plus, minus in zip(
                    analytics.deltas, analytics.lambda_plus, analytics.lambda_minus
                )
            ),
            x="delta",
            y=("plus_decay", "minus_decay"),
        ),
        ResultTable(
            name="spin_waves",
            columns=("m", "shift", "decay", "residual"),
            rows=tuple(
                (wave.m, wave.shift, wave.decay, wave.residual)
                for wave in spin_wave_spectrum(ring)
            ),
            x="m",
            y=("shift", "decay"),
        ),
    )
    return PointResult(scalars, tables)


def run_trap_optimum(config: ScenarioConfig, seed: int) -> PointResult:
    """Best Gamma_T over the grid next to the group-velocity estimate v_g / d~."""
    spec = config.geometry_spec()
    grid = config.gamma_t_grid
    efficiencies = [
        final_efficiency(config, seed, dataclasses.replace(spec, gamma_t=gamma_t))
        for gamma_t in grid
    ]
    best = int(np.argmax(efficiencies))

    bands = bloch_bands_for(build_geometry(spec), config.k_points, config.bloch_cells)
    velocity = group_velocity_and_optimal_trap(bands, config.delta, config.m_abs)
    scalars = {
        "gamma_t_argmax": grid[best],
        "eta_max": efficiencies[best],
        "v_g": velocity.v_g,
        "gamma_t_opt": velocity.gamma_t_opt,
        "argmax_over_opt": grid[best] / velocity.gamma_t_opt,
        "k_resonant": velocity.k,
        "band_m_abs": float(velocity.m_abs),
    }
    table = ResultTable(
        name="trap_scan",
        columns=("gamma_t", "eta_t"),
        rows=tuple(zip(grid, efficiencies)),
        x="gamma_t",
        y=("eta_t",),
        log_x=True,
    )
    return PointResult(scalars, (table,))


ANALYSIS_RUNNERS: dict[str, Callable[[ScenarioConfig, int], PointResult]] = {
    "geometry": run_geometry,
    "coupling": run_coupling,
    "transport": run_transport,
    "bands": run_bands,
    "zak": run_zak,
    "edges": run_edges,
    "steady": run_steady,
    "analytics": run_analytics,
    "trap_optimum": run_trap_optimum,
}


def evaluate_task(task: tuple[str, int]) -> PointResult:
    """Run one (config text, seed) task; picklable for worker processes."""
    text, seed = task
    config = ScenarioConfig.from_string(text, "<task>")
    try:
        return ANALYSIS_RUNNERS[config.analysis](config, seed)
    except NumericalError as error:
        raise NumericalError(f"{config.name} (seed {seed}): {error}") from error
    except RingHarvestError as error:
        raise type(error)(f"{config.name} (seed {seed}): {error}") from error
    except ValueError as error:
        raise ValueError(f"{config.name} (seed {seed}): {error}") from error


class ScenarioRunner:
    """Expand a scenario into tasks, run them and reduce in axis order."""

    logger = logging.getLogger(__name__)

    def __init__(self, config: ScenarioConfig, workers: Optional[int] = None) -> None:
        """
        Initialize the runner.

        Args:
            config: A validated scenario.
            workers: Worker processes. Defaults to the available cores; 1 runs
                every task in this process.
        """
        self._config = config
        self._workers = workers or os.cpu_count() or 1

    @property
    def seeds(self) -> tuple[int, ...]:
        """Return seed, seed + 1, ... for every realization."""
        base = self._config.seed
        return tuple(base + index for index in range(self._config.realizations))

    def points(self) -> list[dict[str, str]]:
        """Return every sweep point; the last axis varies fastest."""
        axes = self._config.sweep_axes
        names = [path for path, _ in axes]
        grids = [values for _, values in axes]
        return [dict(zip(names, combo)) for combo in itertools.product(*grids)]

    def check(self) -> None:
        """Raise ConfigError for analysis options that do not combine."""
        config = self._config
        if config.realizations < 1:
            raise ConfigError("disorder.realizations: must be at least 1")
        if config.disorder_type != "none" and config.analysis in UNDISORDERED:
            raise ConfigError(
                f"disorder.type: '{config.analysis}' runs without disorder"
            )
        if config.delta_optimized and config.analysis != "transport":
            raise ConfigError("physics.delta: 'optimize' needs the transport analysis")

    def run(self) -> RunResult:
        """Run every sweep point and realization."""
        self.check()
        config = self._config
        points = self.points()
        seeds = self.seeds
        tasks = [
            (config.with_values(point).to_string(), seed)
            for point in points
            for seed in seeds
        ]

        self.logger.info(
            "Running %s: %d points x %d realizations on %d workers",
            config.analysis,
            len(points),
            len(seeds),
            min(self._workers, len(tasks)),
        )
        tic = time.perf_counter()
        results = self.map_tasks(tasks)
        toc = time.perf_counter()
        self.logger.info("Scenario %s finished in %s seconds", config.name, toc - tic)

        return self._reduce(points, results)

    def map_tasks(self, tasks: list[tuple[str, int]]) -> list[PointResult]:
        if self._workers <= 1 or len(tasks) == 1:
            return [evaluate_task(task) for task in tasks]

        with ProcessPoolExecutor(max_workers=self._workers) as executor:
            futures = [executor.submit(evaluate_task, task) for task in tasks]
            try:
                return [future.result() for future in futures]
            except Exception:
                executor.shutdown(wait=False, cancel_futures=True)
                raise

    def _reduce(
        self,
        points: list[dict[str, str]],
        results: list[PointResult],
    ) -> RunResult:
        config = self._config
        seeds = self.seeds
        metric = PRIMARY_METRIC[config.analysis]
        count = len(seeds)
        keys = list(results[0].scalars)
        axis_names = [path for path, _ in config.sweep_axes]

        columns = list(axis_names)
        for key in keys:
            columns.extend([key, f"{key}_std"] if count > 1 else [key])

        rows: list[tuple[Cell, ...]] = []
        ensembles: list[EnsembleResult] = []
        for index, point in enumerate(points):
            chunk = results[index * count : (index + 1) * count]
            row: list[Cell] = [_axis_cell(point[name]) for name in axis_names]
            for key in keys:
                values = tuple(float(result.scalars[key]) for result in chunk)
                row.append(float(np.mean(values)))
                if count > 1:
                    row.append(float(np.std(values)))
            rows.append(tuple(row))
            if count > 1:
                ensembles.append(
                    EnsembleResult(
                        metric, tuple(r.scalars[metric] for r in chunk), seeds
                    )
                )

        tables = [self._points_table(tuple(columns), tuple(rows), metric)]
        if len(results) == 1:
            tables.extend(results[0].tables)

        summary: dict[str, object] = {
            "scenario": config.name,
            "analysis": config.analysis,
            "metric": metric,
            "points": len(points),
            "manifest": self.manifest(),
        }
        if len(points) == 1:
            summary["result"] = dict(zip(columns, rows[0]))
        if ensembles:
            summary["ensembles"] = [
                {
                    "point": point,
                    "metric": ensemble.metric,
                    "mean": ensemble.mean,
                    "std": ensemble.std,
                    "values": list(ensemble.values),
                    "seeds": list(ensemble.seeds),
                }
                for point, ensemble in zip(points, ensembles)
            ]
        return RunResult(tuple(tables), summary, tuple(ensembles))

    def _points_table(
        self,
        columns: tuple[str, ...],
        rows: tuple[tuple[Cell, ...], ...],
        metric: str,
    ) -> ResultTable:
        axes = self._config.sweep_axes
        if len(axes) == 1:
            values = [float(v) for v in axes[0][1] if _is_number(v)]
            wide = bool(values) and min(values) > 0 and max(values) >= 100 * min(values)
            return ResultTable(
                "points", columns, rows, x=axes[0][0], y=(metric,), log_x=wide
            )
        if len(axes) == 2:
            return ResultTable(
                "points", columns, rows, x=axes[1][0], y=(axes[0][0],), value=metric
            )
        return ResultTable("points", columns, rows)

    def manifest(self) -> dict[str, object]:
        """Everything needed to reproduce the run bit for bit."""
        return {
            "config_hash": self._config.config_hash(),
            "config": self._config.to_string(),
            "source": self._config.source,
            "seeds": list(self.seeds),
            "overrides": list(self._config.provenance),
            "versions": {
                "ring-harvest": _package_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
        }


def run_scenario(config: ScenarioConfig, workers: Optional[int] = None) -> list[str]:
    """Run a scenario and write its outputs; returns the written paths."""
    runner = ScenarioRunner(config, workers)
    result = runner.run()

    writer = ResultWriter(config, runner.seeds)
    for table in result.tables:
        writer.add_table(table)
    for key, value in result.summary.items():
        writer.add_summary(key, value)
    return writer.emit()


def disorder_ensemble(
    config: ScenarioConfig,
    workers: Optional[int] = None,
) -> EnsembleResult:
    """Primary metric over every realization of an unswept scenario."""
    if config.sweep_axes:
        raise ConfigError("sweep: disorder ensembles run on a single point")
    runner = ScenarioRunner(config, workers)
    runner.check()
    seeds = runner.seeds
    text = config.with_values({}).to_string()
    results = runner.map_tasks([(text, seed) for seed in seeds])
    metric = PRIMARY_METRIC[config.analysis]
    return EnsembleResult(
        metric, tuple(float(r.scalars[metric]) for r in results), seeds
    )


def _angle_between(first: float, second: float) -> float:
    if math.isnan(second):
        return math.nan
    return abs((first - second + math.pi) % (2 * math.pi) - math.pi)


def _is_number(value: str) -> bool:
    try:
        float(value)
    except ValueError:
        return False
    return True


def _axis_cell(value: str) -> Cell:
    return float(value) if _is_number(value) else value


def _package_version() -> str:
    try:
        return importlib.metadata.version("ring-harvest")
    except importlib.metadata.PackageNotFoundError:
        return "unknown"
