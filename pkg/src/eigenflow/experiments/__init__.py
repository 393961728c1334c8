"""Configured experiments, CSV/SVG output and the command-line interface."""
from .compare import CompareReport, Tolerance, compare, parse_tolerance
from .config import EXPERIMENTS, SCHEMA_VERSION, ExperimentConfig, config_hash, load_config
from .io import RunRecord, read_csv, read_record, verify_record, write_csv
from .runner import figure_config, run

__all__ = ["CompareReport", "Tolerance", "compare", "parse_tolerance", "EXPERIMENTS",
           "SCHEMA_VERSION", "ExperimentConfig", "config_hash", "load_config", "RunRecord",
           "read_csv", "read_record", "verify_record", "write_csv", "figure_config", "run"]
