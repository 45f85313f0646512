"""Integrated terrestrial/satellite network simulator with a constrained
bandit optimiser for bandwidth split, offload thresholds and association."""

from .config import Config, ConfigError, load_config, preset

__all__ = ["Config", "ConfigError", "load_config", "preset"]
__version__ = "0.1.0"
