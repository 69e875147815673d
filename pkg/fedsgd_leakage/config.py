#!/usr/bin/env python3
"""
Configuration for the fedsgd-leakage package.

Runtime settings (logging, worker count, precision) come from environment
variables. Experiment settings come from a flat JSON document whose keys are
the ExperimentConfig field names; command-line overrides win over the file,
which wins over the defaults.
"""

import os
import json
import logging
from typing import Any, Dict, List, Optional, Tuple
from dataclasses import asdict, dataclass, field, fields

from .exceptions import ConfigurationError, DataFormatError
from .numerics import PRECISIONS
from .data import DatasetSpec, DISTRIBUTIONS, HETEROGENEITY, SCALINGS, SOURCES
from .attack import WEIGHT_MODES

ATTACKS = ("hyperplane", "cah", "both")
CLIENT_MODES = ("full_batch", "local_steps")
OUTPUT_FORMATS = ("json", "csv")
MODALITIES = ("tabular", "image")


@dataclass
class RuntimeConfig:
    """Process-wide settings taken from the environment."""

    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    workers: int = 1
    precision: str = "float64"
    enable_detailed_logging: bool = False


@dataclass
class ExperimentConfig:
    """
    One sweep of attack runs.

    The sweep is the product batch_sizes x neurons x rounds x noise_stds,
    each cell repeated for every seed.
    """

    name: str = "experiment"
    attack: str = "hyperplane"

    # Data
    source: str = "synthetic"
    distribution: str = "gauss"
    dataset_size: int = 0
    dimension: int = 64
    class_count: int = 10
    path: Optional[str] = None
    label_column: str = "label"
    label_path: Optional[str] = None
    scaling: str = "minus1to1"
    heterogeneity: str = "iid"
    classes_per_client: Optional[int] = None
    client_index: int = 0

    # Sweep
    batch_sizes: List[int] = field(default_factory=lambda: [256])
    neurons: List[int] = field(default_factory=lambda: [256])
    rounds: List[int] = field(default_factory=lambda: [10])
    noise_stds: List[float] = field(default_factory=lambda: [0.0])
    seeds: List[int] = field(default_factory=lambda: [0])

    # Hyperplane attack
    weight_mode: str = "standard"
    hidden_widths: List[int] = field(default_factory=list)
    epsilon: float = 0.0
    confidence: float = 0.01
    g_equal_tol: float = 1e-9
    residual_tol: float = 1e-4
    track_isolation: bool = False

    # Client
    client_mode: str = "full_batch"
    local_steps: int = 1
    minibatch_size: int = 32
    learning_rate: float = 0.1
    report_batch_size: bool = True

    # Trap-weights baseline
    cah_rounds: int = 1
    cah_weight_std: Optional[float] = None
    cah_scale_factor: Optional[float] = None

    # Scoring
    modality: str = "tabular"
    image_shape: Optional[List[int]] = None
    optimal_matching: bool = False
    compute_hull: bool = False

    # Output and execution
    output_path: Optional[str] = None
    output_format: str = "json"
    precision: Optional[str] = None
    workers: Optional[int] = None

    def dataset_spec(self, n: int, seed: int) -> DatasetSpec:
        """DatasetSpec for one run; synthetic pools hold max(dataset_size, n) samples."""
        return DatasetSpec(
            source=self.source,
            distribution=self.distribution,
            n=max(self.dataset_size, n),
            dimension=self.dimension,
            class_count=self.class_count,
            seed=seed,
            path=self.path,
            label_column=self.label_column,
            scaling=self.scaling,
            label_path=self.label_path,
            heterogeneity=self.heterogeneity,
            classes_per_client=self.classes_per_client,
            client_index=self.client_index,
        )

    def sweep_cells(self) -> List[Tuple[int, int, int, float]]:
        """Sweep cells (n, N, T, sigma) in declared order."""
        return [
            (n, N, T, sigma)
            for n in self.batch_sizes
            for N in self.neurons
            for T in self.rounds
            for sigma in self.noise_stds
        ]

    def validate(self) -> List[Tuple[str, str]]:
        """Return a list of (field, message) problems; empty when valid."""
        errors = []

        def choice(name, value, options):
            if value not in options:
                errors.append((name, f"must be one of {list(options)}, got {value!r}"))

        choice("attack", self.attack, ATTACKS)
        choice("source", self.source, SOURCES)
        choice("distribution", self.distribution, DISTRIBUTIONS)
        choice("scaling", self.scaling, SCALINGS)
        choice("heterogeneity", self.heterogeneity, HETEROGENEITY)
        choice("weight_mode", self.weight_mode, WEIGHT_MODES)
        choice("client_mode", self.client_mode, CLIENT_MODES)
        choice("modality", self.modality, MODALITIES)
        choice("output_format", self.output_format, OUTPUT_FORMATS)
        if self.precision is not None:
            choice("precision", self.precision, tuple(PRECISIONS))

        for name in ("batch_sizes", "neurons", "rounds", "seeds", "noise_stds"):
            if not isinstance(getattr(self, name), list):
                errors.append((name, "must be a list"))
        if errors:
            return errors

        for name in ("batch_sizes", "neurons", "rounds"):
            values = getattr(self, name)
            if not values:
                errors.append((name, "must not be empty"))
            if any(not isinstance(v, int) or isinstance(v, bool) or v < 1 for v in values):
                errors.append((name, "entries must be integers >= 1"))
        if not self.seeds:
            errors.append(("seeds", "must not be empty"))
        if any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in self.seeds):
            errors.append(("seeds", "entries must be non-negative integers"))
        if not self.noise_stds:
            errors.append(("noise_stds", "must not be empty"))
        if any(not isinstance(s, (int, float)) or s < 0 for s in self.noise_stds):
            errors.append(("noise_stds", "entries must be non-negative"))

        if self.source == "synthetic":
            if self.dimension < 1:
                errors.append(("dimension", "must be >= 1"))
            if self.dataset_size and self.batch_sizes and self.dataset_size < max(self.batch_sizes):
                errors.append(("dataset_size", "must be >= every batch size"))
        elif not self.path:
            errors.append(("path", f"required for source {self.source!r}"))
        if self.class_count < 2:
            errors.append(("class_count", "must be >= 2"))
        if self.heterogeneity == "class_partition" and not self.classes_per_client:
            errors.append(("classes_per_client", "required for class_partition"))

        if any(not isinstance(m, int) or m < 1 for m in self.hidden_widths):
            errors.append(("hidden_widths", "entries must be integers >= 1"))
        if self.epsilon < 0:
            errors.append(("epsilon", "must be non-negative"))
        if not 0 < self.confidence < 1:
            errors.append(("confidence", "must lie in (0, 1)"))

        if self.client_mode == "local_steps":
            if self.local_steps < 1:
                errors.append(("local_steps", "must be >= 1"))
            if self.minibatch_size < 1:
                errors.append(("minibatch_size", "must be >= 1"))
            if self.learning_rate <= 0:
                errors.append(("learning_rate", "must be positive"))
            if self.batch_sizes and self.local_steps * self.minibatch_size > min(self.batch_sizes):
                errors.append(("minibatch_size", "local_steps * minibatch_size exceeds the smallest batch size"))

        if self.cah_rounds < 1:
            errors.append(("cah_rounds", "must be >= 1"))
        if self.cah_scale_factor is not None and not 0 < self.cah_scale_factor < 1:
            errors.append(("cah_scale_factor", "must lie in (0, 1)"))
        if self.cah_weight_std is not None and self.cah_weight_std <= 0:
            errors.append(("cah_weight_std", "must be positive"))

        if self.modality == "image":
            if not self.image_shape or len(self.image_shape) != 3:
                errors.append(("image_shape", "image modality needs [height, width, channels]"))
            elif self.image_shape[0] * self.image_shape[1] * self.image_shape[2] != self.dimension \
                    and self.source == "synthetic":
                errors.append(("image_shape", "height * width * channels must equal dimension"))

        if self.workers is not None and self.workers < 1:
            errors.append(("workers", "must be >= 1"))
        return errors

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_FIELD_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _coerce_value(raw: str) -> Any:
    """Parse a ``--set`` value: JSON when it parses, the raw string otherwise."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, Any]:
    """
    Turn ``key=value`` strings into a dict of overrides.

    Raises:
        ConfigurationError: For malformed pairs or unknown keys
    """
    overrides, errors = {}, []
    for pair in pairs or []:
        if "=" not in pair:
            errors.append((pair, "expected key=value"))
            continue
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            errors.append((key, "unknown configuration key"))
            continue
        overrides[key] = _coerce_value(raw.strip())
    if errors:
        raise ConfigurationError("Invalid overrides", errors)
    return overrides


class ConfigManager:
    """Manages configuration for the fedsgd-leakage package."""

    def __init__(self):
        self.runtime_config = RuntimeConfig()
        self._load_from_environment()

    def _load_from_environment(self):
        """Load configuration from environment variables."""

        if os.getenv("FEDSGD_LEAKAGE_LOG_LEVEL"):
            self.runtime_config.log_level = os.getenv("FEDSGD_LEAKAGE_LOG_LEVEL")

        if os.getenv("FEDSGD_LEAKAGE_PRECISION"):
            precision = os.getenv("FEDSGD_LEAKAGE_PRECISION").lower()
            if precision in PRECISIONS:
                self.runtime_config.precision = precision
            else:
                logging.warning(f"Ignoring unknown precision: {precision}")

        # Numeric settings
        try:
            if os.getenv("FEDSGD_LEAKAGE_WORKERS"):
                self.runtime_config.workers = int(os.getenv("FEDSGD_LEAKAGE_WORKERS"))

        except ValueError as e:
            logging.warning(f"Invalid numeric environment variable: {e}")

        # Boolean settings
        if os.getenv("FEDSGD_LEAKAGE_DETAILED_LOGGING"):
            self.runtime_config.enable_detailed_logging = (
                os.getenv("FEDSGD_LEAKAGE_DETAILED_LOGGING").lower() in ["true", "1", "yes"]
            )

    def setup_logging(self):
        """Set up logging based on configuration."""
        log_level = getattr(logging, self.runtime_config.log_level.upper(), logging.INFO)

        if self.runtime_config.enable_detailed_logging:
            log_level = logging.DEBUG

        logging.basicConfig(
            level=log_level,
            format=self.runtime_config.log_format
        )

    def validate_config(self) -> bool:
        """Validate the runtime configuration."""
        errors = []

        if not hasattr(logging, self.runtime_config.log_level.upper()):
            errors.append(f"unknown log level: {self.runtime_config.log_level}")

        if self.runtime_config.workers < 1:
            errors.append("workers must be positive")

        if self.runtime_config.precision not in PRECISIONS:
            errors.append(f"precision must be one of {list(PRECISIONS)}")

        if errors:
            for error in errors:
                logging.error(f"Configuration error: {error}")
            return False

        return True

    def load_experiment_config(
        self,
        path: Optional[str] = None,
        overrides: Optional[Dict[str, Any]] = None
    ) -> ExperimentConfig:
        """
        Build an ExperimentConfig from a JSON file and overrides.

        Args:
            path: Flat JSON document; defaults only when None
            overrides: Keys that take precedence over the file

        Returns:
            Validated ExperimentConfig

        Raises:
            DataFormatError: If the file cannot be read or parsed
            ConfigurationError: Listing every offending field
        """
        values: Dict[str, Any] = {}
        if path:
            try:
                with open(path, "r") as f:
                    values = json.load(f)
            except OSError as e:
                raise DataFormatError(f"Cannot read config file {path}: {e}")
            except json.JSONDecodeError as e:
                raise DataFormatError(f"Config file {path} is not valid JSON: {e}")
            if not isinstance(values, dict):
                raise ConfigurationError(f"Config file {path} must hold a JSON object")

        values.update(overrides or {})
        unknown = [(key, "unknown configuration key") for key in values if key not in _FIELD_TYPES]
        if unknown:
            raise ConfigurationError("Invalid experiment configuration", unknown)

        try:
            config = ExperimentConfig(**values)
            errors = config.validate()
        except TypeError as e:
            raise ConfigurationError("Invalid experiment configuration", [("config", str(e))])
        if errors:
            for name, message in errors:
                logging.error(f"Configuration error: {name}: {message}")
            raise ConfigurationError("Invalid experiment configuration", errors)
        return config

    def print_config_summary(self, experiment: Optional[ExperimentConfig] = None):
        """Print a summary of the current configuration."""
        print("=" * 50)
        print("FEDSGD LEAKAGE CONFIGURATION SUMMARY")
        print("=" * 50)

        print(f"Log Level: {self.runtime_config.log_level}")
        print(f"Workers: {self.runtime_config.workers}")
        print(f"Precision: {self.runtime_config.precision}")

        detail_status = "✓" if self.runtime_config.enable_detailed_logging else "✗"
        print(f"Detailed Logging: {detail_status}")

        if experiment is not None:
            print(f"Experiment: {experiment.name} ({experiment.attack})")
            print(f"Data: {experiment.source}/{experiment.distribution} d={experiment.dimension}")
            print(f"Batch Sizes: {experiment.batch_sizes}")
            print(f"Neurons: {experiment.neurons}")
            print(f"Rounds: {experiment.rounds}")
            print(f"Noise: {experiment.noise_stds}")
            print(f"Seeds: {experiment.seeds}")
            print(f"Sweep Cells: {len(experiment.sweep_cells())}")

        print("=" * 50)


# Global configuration instance
config_manager = ConfigManager()


def get_config() -> ConfigManager:
    """Get the global configuration manager instance."""
    return config_manager


def setup_logging():
    """Set up logging using the global configuration."""
    config_manager.setup_logging()


if __name__ == "__main__":
    config = get_config()

    print("Testing configuration management...")
    config.print_config_summary(ExperimentConfig())

    print(f"\nConfiguration valid: {config.validate_config()}")
