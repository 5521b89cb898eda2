"""Benchmark harness: data generators, dataset loaders, experiment
drivers and the command-line entry point."""

from .config import ConfigError, load_config
from .mnist import DataError

__all__ = ["ConfigError", "DataError", "load_config"]
