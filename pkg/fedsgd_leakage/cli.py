#!/usr/bin/env python3
"""
Command-line interface for the fedsgd-leakage package.

This module provides a CLI for running experiment sweeps, generating
synthetic data and counting hull vertices without Python scripting.
"""

import sys
import argparse
import logging
import json

from .config import get_config, parse_overrides
from .data import DatasetSpec, gen_synthetic, load_tensor, write_csv, write_tensor
from .exceptions import ConfigurationError, DataFormatError, ReportIOError, ValidationError
from .experiment_runner import run_experiment
from .geometry import PointCloud, hull_vertex_count, planar_hull_vertices, theoretical_order

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_IO_ERROR = 2


def setup_cli_logging(verbose: bool = False):
    """Set up logging for CLI operations."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format='%(levelname)s: %(message)s'
    )


def _print_config_errors(error: ConfigurationError):
    print(f"Configuration error: {error.message}", file=sys.stderr)
    for name, message in error.errors:
        print(f"  {name}: {message}", file=sys.stderr)


def run_command(args):
    """Handle run command."""
    try:
        overrides = parse_overrides(args.set)
        if args.output:
            overrides["output_path"] = args.output
        if args.format:
            overrides["output_format"] = args.format
        if args.workers:
            overrides["workers"] = args.workers

        config = get_config().load_experiment_config(args.config, overrides)
        report = run_experiment(config)

        print(f"Experiment '{config.name}' finished: {len(report.records)} runs, "
              f"{len(report.failed_records)} failed")
        for entry in report.aggregate():
            print(f"  n={entry['batch_size']} N={entry['neurons']} T={entry['rounds']} "
                  f"sigma={entry['noise_std']}: hyperplane={entry['hp_fraction_mean']} "
                  f"cah={entry['cah_fraction_mean']}")
        if config.output_path:
            print(f"Report: {config.output_path}")

    except ConfigurationError as e:
        _print_config_errors(e)
        return EXIT_CONFIG_ERROR
    except ValidationError as e:
        print(f"Error running experiment: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataFormatError, ReportIOError, OSError) as e:
        print(f"Error running experiment: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    return EXIT_OK


def gen_data_command(args):
    """Handle gen-data command."""
    try:
        with open(args.spec, "r") as f:
            values = json.load(f)
        spec = DatasetSpec(
            distribution=values.get("distribution", "gauss"),
            n=values.get("n", 256),
            dimension=values.get("dimension", 64),
            class_count=values.get("class_count", 10),
            seed=values.get("seed", 0),
        )
        errors = spec.validate()
        if errors:
            raise ConfigurationError("Invalid data specification", errors)

        batch, _ = gen_synthetic(spec.distribution, spec.n, spec.dimension, spec.class_count, spec.seed)
        if args.out.endswith(".csv"):
            write_csv(args.out, batch)
        else:
            write_tensor(args.out, batch.inputs)
        print(f"Wrote {batch.size} samples of dimension {batch.dimension} to {args.out}")

    except ConfigurationError as e:
        _print_config_errors(e)
        return EXIT_CONFIG_ERROR
    except json.JSONDecodeError as e:
        print(f"Error generating data: {args.spec} is not valid JSON: {e}", file=sys.stderr)
        return EXIT_IO_ERROR
    except ValidationError as e:
        print(f"Error generating data: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataFormatError, OSError) as e:
        print(f"Error generating data: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    return EXIT_OK


def hull_stats_command(args):
    """Handle hull-stats command."""
    try:
        batch, _ = load_tensor(args.tensor)
        cloud = PointCloud(batch.inputs)
        count = hull_vertex_count(cloud)

        print(f"Points: {cloud.size}")
        print(f"Dimension: {cloud.dimension}")
        print(f"Hull vertices: {count}")
        print(f"Vertex fraction: {count / cloud.size:.6f}")
        if args.distribution:
            print(f"Theoretical order ({args.distribution}): "
                  f"{theoretical_order(args.distribution, cloud.size, cloud.dimension):.6g}")
        if cloud.dimension == 2:
            planar = len(planar_hull_vertices(cloud.points))
            status = "✓" if planar == count else "✗"
            print(f"Planar sweep check: {planar} {status}")

    except ValidationError as e:
        print(f"Error computing hull statistics: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataFormatError, OSError) as e:
        print(f"Error computing hull statistics: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    return EXIT_OK


def validate_command(args):
    """Handle validate command."""
    try:
        config = get_config().load_experiment_config(args.config, parse_overrides(args.set))
        print("Configuration is valid")
        if args.verbose:
            get_config().print_config_summary(config)

    except ConfigurationError as e:
        _print_config_errors(e)
        return EXIT_CONFIG_ERROR
    except DataFormatError as e:
        print(f"Error with configuration: {e}", file=sys.stderr)
        return EXIT_IO_ERROR

    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser."""
    parser = argparse.ArgumentParser(
        description="FedSGD leakage attack simulator",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run a sweep described by a JSON config
  fedsgd-leakage run docs/example_config.json

  # Override keys from the command line
  fedsgd-leakage run docs/example_config.json --set batch_sizes=[64,128] --format csv --output out.csv

  # Generate a synthetic dataset
  fedsgd-leakage gen-data docs/example_gen_spec.json points.hrt

  # Count convex-hull vertices of a tensor file
  fedsgd-leakage hull-stats points.hrt --distribution gauss

  # Check a configuration
  fedsgd-leakage validate docs/example_config.json
        """
    )

    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Enable verbose output"
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Run command
    run_parser = subparsers.add_parser("run", help="Run an experiment sweep")
    run_parser.add_argument("config", help="Experiment config (flat JSON)")
    run_parser.add_argument("--output", help="Report path (overrides output_path)")
    run_parser.add_argument("--format", choices=["json", "csv"], help="Report format")
    run_parser.add_argument("--workers", type=int, help="Worker processes for sweep cells")
    run_parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key")
    run_parser.set_defaults(func=run_command)

    # Gen-data command
    gen_parser = subparsers.add_parser("gen-data", help="Generate a synthetic dataset")
    gen_parser.add_argument("spec", help="JSON with distribution, n, dimension, class_count, seed")
    gen_parser.add_argument("out", help="Output file (.csv, otherwise binary tensor)")
    gen_parser.set_defaults(func=gen_data_command)

    # Hull-stats command
    hull_parser = subparsers.add_parser("hull-stats", help="Count convex-hull vertices of a tensor file")
    hull_parser.add_argument("tensor", help="Binary tensor file")
    hull_parser.add_argument("--distribution", choices=["ball", "cube", "gauss"],
                             help="Print the theoretical vertex-count order for this distribution")
    hull_parser.set_defaults(func=hull_stats_command)

    # Validate command
    validate_parser = subparsers.add_parser("validate", help="Validate an experiment config")
    validate_parser.add_argument("config", help="Experiment config (flat JSON)")
    validate_parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override a config key")
    validate_parser.set_defaults(func=validate_command)

    return parser


def main(argv=None):
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 1

    # Set up logging
    setup_cli_logging(args.verbose)

    # Execute command
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 130
    except Exception as e:
        print(f"Unexpected error: {e}", file=sys.stderr)
        if args.verbose:
            import traceback
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
