"""Experiment configuration, benchmark runner, SVG charts and the CLI."""
from .bench import (CSV_HEADER, ResultRow, format_rows, read_csv, run_benchmark, sweep_budget,
                    write_csv)
from .charts import render_chart
from .config import Combo, ConfigError, ExperimentConfig, load_config, parse_config

__all__ = ["CSV_HEADER", "ResultRow", "format_rows", "read_csv", "run_benchmark", "sweep_budget", "write_csv",
           "render_chart", "Combo", "ConfigError", "ExperimentConfig", "load_config",
           "parse_config"]
