"""
Experiment runner for attack sweeps.

This module provides the ExperimentRunner class that wires data, the
federated client, the attacks and the recovery metrics together, sweeps a
grid of (batch size, neurons, rounds, noise) cells over a list of seeds,
and writes JSON or CSV reports.
"""

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from .attack import (
    UPPER_PADDING,
    AttackConfig,
    HyperplaneAttack,
    epsilon_for_confidence,
    initial_interval,
    round_bound,
)
from .cah_baseline import CahConfig, run_cah_attack
from .config import ExperimentConfig, RuntimeConfig, get_config
from .data import FeatureBounds, load_dataset, sample_batch
from .exceptions import ConfigurationError, DataFormatError, FedsgdLeakageError, ReportIOError, ValidationError
from .federation import ClientConfig, FullBatch, LocalSteps
from .geometry import PointCloud, hull_vertices
from .metrics import SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW_SIZE, match_reconstructions
from .model import Batch
from .numerics import resolve_dtype

REPORT_COLUMNS = [
    "cell",
    "seed",
    "batch_size",
    "neurons",
    "rounds",
    "noise_std",
    "attack",
    "status",
    "n_true",
    "hp_recovered",
    "hp_fraction",
    "hp_max_error",
    "hp_label_accuracy",
    "hp_rounds_used",
    "hp_collisions",
    "hp_unmatched",
    "round_bound_prediction",
    "epsilon_used",
    "isolation_round",
    "cah_recovered",
    "cah_fraction",
    "cah_rounds_used",
    "hull_vertex_count",
    "dominance_violations",
    "wall_time_seconds",
    "error",
]

AGGREGATED_METRICS = ("hp_fraction", "hp_rounds_used", "cah_fraction", "hull_vertex_count")

# Fields that vary between identical runs
TIMING_FIELDS = ("wall_time_seconds",)


@dataclass
class ExperimentRecord:
    """One (cell, seed) run; attack columns stay None when that attack did not run."""

    cell: int
    seed: int
    batch_size: int
    neurons: int
    rounds: int
    noise_std: float
    attack: str
    status: str = "pending"
    n_true: Optional[int] = None
    hp_recovered: Optional[int] = None
    hp_fraction: Optional[float] = None
    hp_max_error: Optional[float] = None
    hp_label_accuracy: Optional[float] = None
    hp_rounds_used: Optional[int] = None
    hp_collisions: Optional[int] = None
    hp_unmatched: Optional[int] = None
    round_bound_prediction: Optional[int] = None
    epsilon_used: Optional[float] = None
    isolation_round: Optional[int] = None
    cah_recovered: Optional[int] = None
    cah_fraction: Optional[float] = None
    cah_rounds_used: Optional[int] = None
    hull_vertex_count: Optional[int] = None
    dominance_violations: Optional[int] = None
    wall_time_seconds: float = 0.0
    error: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.status == "ok"

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        return {column: row[column] for column in REPORT_COLUMNS}


class ExperimentReport:
    """Represents the result of an experiment sweep."""

    def __init__(self, config: Optional[ExperimentConfig] = None):
        self.config = config
        self.records: List[ExperimentRecord] = []
        self.success = False
        self.errors = []
        self.start_time = datetime.now()
        self.end_time = None

    def mark_complete(self, success: bool = True):
        """Mark the sweep as complete."""
        self.success = success
        self.end_time = datetime.now()

    def add_error(self, error: str):
        """Add an error message."""
        self.errors.append(error)

    def get_duration(self) -> float:
        """Get sweep duration in seconds."""
        if self.end_time:
            return (self.end_time - self.start_time).total_seconds()
        return 0.0

    @property
    def failed_records(self) -> List[ExperimentRecord]:
        return [r for r in self.records if not r.succeeded]

    def aggregate(self) -> List[Dict[str, Any]]:
        """
        Mean and population std of each metric per sweep cell.

        Cells appear in declared order; failed runs are counted but not
        averaged, and a metric no successful run produced is None.
        """
        cells: Dict[int, List[ExperimentRecord]] = {}
        for record in self.records:
            cells.setdefault(record.cell, []).append(record)

        summary = []
        for cell, records in cells.items():
            first = records[0]
            ok = [r for r in records if r.succeeded]
            entry = {
                "cell": cell,
                "batch_size": first.batch_size,
                "neurons": first.neurons,
                "rounds": first.rounds,
                "noise_std": first.noise_std,
                "runs": len(records),
                "failed": len(records) - len(ok),
            }
            for metric in AGGREGATED_METRICS:
                values = [getattr(r, metric) for r in ok if getattr(r, metric) is not None]
                entry[f"{metric}_mean"] = float(np.mean(values)) if values else None
                entry[f"{metric}_std"] = float(np.std(values)) if values else None
            summary.append(entry)
        return summary

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.config.name if self.config else None,
            "generated_at": (self.end_time or datetime.now()).isoformat(),
            "duration_seconds": self.get_duration(),
            "config": self.config.to_dict() if self.config else None,
            "ssim_parameters": {
                "window": SSIM_WINDOW_SIZE,
                "sigma": SSIM_SIGMA,
                "k1": SSIM_K1,
                "k2": SSIM_K2,
                "dynamic_range": 1.0,
            },
            "records": [r.to_row() for r in self.records],
            "aggregates": self.aggregate(),
            "errors": list(self.errors),
        }

    def __str__(self):
        status = "SUCCESS" if self.success else "FAILED"
        return (f"ExperimentReport(status={status}, duration={self.get_duration():.2f}s, "
                f"records={len(self.records)}, failed={len(self.failed_records)})")


def predict_rounds(
    inputs: np.ndarray,
    w: np.ndarray,
    bounds: FeatureBounds,
    neurons: int,
    epsilon: float = 0.0,
    confidence: float = 0.01
) -> Tuple[Optional[float], Optional[int]]:
    """
    Round-bound prediction for one attack run.

    When ``epsilon`` is 0 it is derived from the true minimum pairwise
    distance, scaled by the per-coordinate size of ``w``.

    Returns:
        (epsilon used, predicted rounds); the prediction is None when the
        batch has duplicates or is larger than the neuron count
    """
    n = inputs.shape[0]
    low, high = initial_interval(w, bounds)
    width = (high - low) * (1.0 + UPPER_PADDING / neurons)
    if epsilon <= 0:
        if n < 2:
            return None, 1
        delta = float(np.min(pdist(inputs)))
        if delta <= 0:
            return None, None
        scale = float(np.linalg.norm(w)) / math.sqrt(w.size)
        epsilon = epsilon_for_confidence(delta * scale, n, confidence)
    try:
        return epsilon, round_bound(width, neurons, n, epsilon)
    except ValidationError:
        return epsilon, None


def _client_config(config: ExperimentConfig, batch: Batch, noise_std: float, seed: int) -> ClientConfig:
    if config.client_mode == "local_steps":
        mode = LocalSteps(config.local_steps, config.minibatch_size, config.learning_rate)
    else:
        mode = FullBatch()
    client = ClientConfig(batch, mode, noise_std=noise_std, rng_seed=seed,
                          report_batch_size=config.report_batch_size)
    client.validate()
    return client


def _run_hyperplane(config, record, client, bounds, dtype, logger):
    batch = client.batch
    attack_cfg = AttackConfig(
        neurons=record.neurons,
        class_count=batch.class_count,
        rounds=record.rounds,
        feature_bounds=bounds,
        weight_mode=config.weight_mode,
        g_equal_tol=config.g_equal_tol,
        residual_tol=config.residual_tol,
        epsilon=config.epsilon,
        hidden_widths=tuple(config.hidden_widths),
        rng_seed=record.seed,
    )
    attack = HyperplaneAttack(attack_cfg, logger, dtype)
    result = attack.run(client, track_isolation=config.track_isolation)

    w = attack.params.layers[0].weights[0].astype(np.float64)
    epsilon, prediction = predict_rounds(
        batch.inputs.astype(np.float64), w, bounds, record.neurons, config.epsilon, config.confidence
    )
    logger.info(f"Round-bound prediction (n={record.batch_size}, N={record.neurons}): "
                f"{prediction} rounds, T={record.rounds}, used {result.rounds_used}")

    stats = match_reconstructions(
        batch, result.recovered_inputs, config.modality,
        tuple(config.image_shape) if config.image_shape else None,
        result.recovered_labels, config.optimal_matching, result.rounds_used
    )
    record.hp_recovered = stats.n_recovered_exact
    record.hp_fraction = stats.fraction
    record.hp_max_error = stats.max_error()
    record.hp_label_accuracy = stats.label_accuracy
    record.hp_rounds_used = result.rounds_used
    record.hp_collisions = result.collisions + result.search_collisions
    record.hp_unmatched = stats.unmatched_recovered
    record.round_bound_prediction = prediction
    record.epsilon_used = epsilon
    record.isolation_round = result.isolation_round


def _run_cah(config, record, client, dtype, logger):
    overrides = {}
    if config.cah_weight_std is not None:
        overrides["weight_std"] = config.cah_weight_std
    if config.cah_scale_factor is not None:
        overrides["scale_factor"] = config.cah_scale_factor
    cah_cfg = CahConfig.for_modality(
        config.modality,
        neurons=record.neurons,
        class_count=client.batch.class_count,
        rounds=config.cah_rounds,
        rng_seed=record.seed,
        **overrides
    )
    result = run_cah_attack(client, cah_cfg, logger, dtype)
    stats = match_reconstructions(
        client.batch, result.recovered_inputs, config.modality,
        tuple(config.image_shape) if config.image_shape else None,
        optimal=config.optimal_matching, rounds_used=result.rounds_used
    )
    record.cah_recovered = stats.n_recovered_exact
    record.cah_fraction = stats.fraction
    record.cah_rounds_used = result.rounds_used
    return result


def run_single(
    config: ExperimentConfig,
    cell_index: int,
    cell: Tuple[int, int, int, float],
    seed: int,
    precision: str = "float64",
    logger: Optional[logging.Logger] = None
) -> ExperimentRecord:
    """
    Run every configured attack for one sweep cell and seed.

    Failures are caught and recorded on the returned record.
    """
    log = logger if logger else logging.getLogger(__name__)
    n, N, T, sigma = cell
    record = ExperimentRecord(cell_index, seed, n, N, T, float(sigma), config.attack)
    start = time.perf_counter()
    try:
        dtype = resolve_dtype(precision)
        pool, bounds = load_dataset(config.dataset_spec(n, seed))
        batch = sample_batch(pool, n, seed).astype(dtype)
        client = _client_config(config, batch, float(sigma), seed)
        record.n_true = batch.size

        if config.attack in ("hyperplane", "both"):
            _run_hyperplane(config, record, client, bounds, dtype, log)
        cah_result = None
        if config.attack in ("cah", "both"):
            cah_result = _run_cah(config, record, client, dtype, log)

        if config.compute_hull:
            vertices = set(hull_vertices(PointCloud(batch.inputs.astype(np.float64))))
            record.hull_vertex_count = len(vertices)
            if cah_result is not None:
                record.dominance_violations = sum(1 for i in cah_result.matched_indices if i not in vertices)
        record.status = "ok"

    except FedsgdLeakageError as e:
        record.status = "failed"
        record.error = str(e)
        log.error(f"Cell {cell_index} seed {seed} failed: {e}")
    except (ArithmeticError, ValueError, MemoryError) as e:
        record.status = "failed"
        record.error = f"{type(e).__name__}: {e}"
        log.error(f"Cell {cell_index} seed {seed} failed: {record.error}")

    record.wall_time_seconds = round(time.perf_counter() - start, 6)
    return record


def _run_task(task: Tuple[Dict[str, Any], int, Tuple[int, int, int, float], int, str]) -> ExperimentRecord:
    config_values, cell_index, cell, seed, precision = task
    return run_single(ExperimentConfig(**config_values), cell_index, cell, seed, precision)


class ExperimentRunner:
    """
    Runs an experiment sweep.

    This class coordinates the following steps:
    1. Validate the configuration
    2. Run every (cell, seed) pair, in parallel when workers > 1
    3. Merge the records in declared sweep order and aggregate them
    """

    def __init__(
        self,
        config: ExperimentConfig,
        runtime: Optional[RuntimeConfig] = None,
        logger: Optional[logging.Logger] = None
    ):
        """
        Initialize ExperimentRunner.

        Args:
            config: Experiment configuration
            runtime: Runtime settings; the global ones when omitted
            logger: Optional logger instance
        """
        self.config = config
        self.runtime = runtime if runtime else get_config().runtime_config
        self.logger = logger if logger else logging.getLogger(__name__)

    @property
    def workers(self) -> int:
        return self.config.workers or self.runtime.workers

    @property
    def precision(self) -> str:
        return self.config.precision or self.runtime.precision

    def tasks(self) -> List[Tuple[Dict[str, Any], int, Tuple[int, int, int, float], int, str]]:
        values = self.config.to_dict()
        return [
            (values, cell_index, cell, seed, self.precision)
            for cell_index, cell in enumerate(self.config.sweep_cells())
            for seed in self.config.seeds
        ]

    def run(self) -> ExperimentReport:
        """
        Execute the sweep.

        Returns:
            ExperimentReport with one record per (cell, seed)

        Raises:
            ConfigurationError: If the configuration does not validate
        """
        report = ExperimentReport(self.config)

        self.logger.info("=" * 60)
        self.logger.info(f"STARTING EXPERIMENT: {self.config.name}")
        self.logger.info("=" * 60)

        self.logger.info("STEP 1: Validating configuration")
        errors = self.config.validate()
        if errors:
            raise ConfigurationError("Invalid experiment configuration", errors)

        tasks = self.tasks()
        self.logger.info(f"STEP 2: Running {len(tasks)} runs over {len(self.config.sweep_cells())} cells "
                         f"({self.workers} workers, {self.precision})")
        try:
            if self.workers > 1 and len(tasks) > 1:
                with ProcessPoolExecutor(max_workers=self.workers) as executor:
                    report.records = list(executor.map(_run_task, tasks))
            else:
                for values, cell_index, cell, seed, precision in tasks:
                    report.records.append(
                        run_single(self.config, cell_index, cell, seed, precision, self.logger)
                    )
        except Exception as e:
            report.add_error(f"Sweep aborted: {e}")
            self.logger.error(f"Sweep aborted: {e}")
            report.mark_complete(False)
            return report

        self.logger.info("STEP 3: Aggregating results")
        for record in report.failed_records:
            report.add_error(f"cell {record.cell} seed {record.seed}: {record.error}")
        for entry in report.aggregate():
            self.logger.info(
                f"  cell {entry['cell']} (n={entry['batch_size']}, N={entry['neurons']}, "
                f"T={entry['rounds']}, sigma={entry['noise_std']}): "
                f"hyperplane {_fmt(entry['hp_fraction_mean'])} ± {_fmt(entry['hp_fraction_std'])}, "
                f"trap weights {_fmt(entry['cah_fraction_mean'])} ± {_fmt(entry['cah_fraction_std'])}"
            )

        report.mark_complete(True)
        self.logger.info("=" * 60)
        self.logger.info(f"EXPERIMENT COMPLETED in {report.get_duration():.2f}s "
                         f"({len(report.failed_records)} failed runs)")
        self.logger.info("=" * 60)
        return report


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def emit_report(report: ExperimentReport, format: str, path: str) -> str:
    """
    Write a report as JSON or CSV.

    CSV has one row per record with the columns of REPORT_COLUMNS; JSON is
    one document with the config under "config".

    Raises:
        ValidationError: For an unknown format
        ReportIOError: If the file cannot be written
    """
    if format not in ("json", "csv"):
        raise ValidationError(f"Unknown report format: {format}")
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        if format == "json":
            with open(path, "w") as f:
                json.dump(report.to_dict(), f, indent=2)
                f.write("\n")
        else:
            frame = pd.DataFrame([r.to_row() for r in report.records], columns=REPORT_COLUMNS)
            frame.to_csv(path, index=False)
    except OSError as e:
        raise ReportIOError(f"Cannot write report to {path}: {e}")
    logging.getLogger(__name__).info(f"Report written to {path} ({format}, {len(report.records)} records)")
    return path


def _clean(value: Any) -> Any:
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, np.generic):
        return _clean(value.item())
    return value


def load_report(path: str) -> ExperimentReport:
    """
    Read a report written by emit_report.

    CSV reports carry no config, so ``report.config`` is None for them.

    Raises:
        ReportIOError: If the file cannot be read
        DataFormatError: If it is not a report
    """
    record_fields = {f.name for f in fields(ExperimentRecord)}
    try:
        if path.endswith(".csv"):
            frame = pd.read_csv(path)
            rows = [{k: _clean(v) for k, v in row.items()} for row in frame.to_dict("records")]
            config = None
            errors = []
        else:
            with open(path, "r") as f:
                document = json.load(f)
            rows = document["records"]
            config = ExperimentConfig(**document["config"]) if document.get("config") else None
            errors = document.get("errors", [])
    except OSError as e:
        raise ReportIOError(f"Cannot read report {path}: {e}")
    except (ValueError, KeyError, TypeError) as e:
        raise DataFormatError(f"{path} is not a valid report: {e}")

    report = ExperimentReport(config)
    try:
        report.records = [
            ExperimentRecord(**{k: v for k, v in row.items() if k in record_fields}) for row in rows
        ]
    except TypeError as e:
        raise DataFormatError(f"{path} has malformed records: {e}")
    report.errors = errors
    report.mark_complete(True)
    return report


def run_experiment(
    config: ExperimentConfig,
    runtime: Optional[RuntimeConfig] = None,
    logger: Optional[logging.Logger] = None
) -> ExperimentReport:
    """Run a sweep and write the report when the config names an output path."""
    report = ExperimentRunner(config, runtime, logger).run()
    if config.output_path:
        emit_report(report, config.output_format, config.output_path)
    return report
