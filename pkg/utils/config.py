"""Configuration module for fairrewire.

This module provides access to user configuration stored in one of these locations:
1. $FAIRREWIRE_CONFIG_DIR/fairrewirerc if $FAIRREWIRE_CONFIG_DIR is defined
2. $XDG_CONFIG_HOME/fairrewire/fairrewirerc if $XDG_CONFIG_HOME is defined
3. $HOME/.fairrewirerc

The configuration is stored in TOML format. Experiment files use the same
format and are loaded through load_experiment().
"""

import copy
import logging
import os
from pathlib import Path
from typing import Any

import tomli

from utils.errors import ConfigError

__all__ = [
    "DEFAULT_CONFIG",
    "get_config_path",
    "load_config",
    "load_experiment",
    "get_logger_verbosity",
    "get_default_alpha",
    "get_default_budget",
    "get_dense_cap",
    "get_drift_tolerance",
    "get_default_workers",
    "get_max_walk_steps",
]

logger = logging.getLogger(__name__)

WORKERS_ENV_VAR = "FAIRREWIRE_WORKERS"

# Default configuration values
DEFAULT_CONFIG = {
    "logger": {
        "verbosity": "INFO",
    },
    "pagerank": {
        "alpha": 0.15,
        "dense_cap": 20000,
        "drift_tolerance": 1e-6,
    },
    "rewiring": {
        "budget": 50,
    },
    "sampler": {
        "workers": 1,
        "max_walk_steps": 10**9,
    },
}


def get_config_path() -> Path:
    """Return the path to the user's config file.

    Checks the following locations in order:
    1. $FAIRREWIRE_CONFIG_DIR/fairrewirerc if $FAIRREWIRE_CONFIG_DIR is defined
    2. $XDG_CONFIG_HOME/fairrewire/fairrewirerc if $XDG_CONFIG_HOME is defined
    3. Fallback to $HOME/.fairrewirerc

    Returns:
        Path to the config file
    """
    if "FAIRREWIRE_CONFIG_DIR" in os.environ:
        path = Path(os.environ["FAIRREWIRE_CONFIG_DIR"]) / "fairrewirerc"
        if path.exists():
            return path

    if "XDG_CONFIG_HOME" in os.environ:
        path = Path(os.environ["XDG_CONFIG_HOME"]) / "fairrewire" / "fairrewirerc"
        if path.exists():
            return path

    return Path.home() / ".fairrewirerc"


def load_config() -> dict[str, Any]:
    """Load configuration from the config file.

    Returns:
        Dict containing the merged configuration (defaults + user config).
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    config_path = get_config_path()

    if config_path.exists():
        try:
            with open(config_path, "rb") as f:
                user_config = tomli.load(f)

            _merge_configs(config, user_config)
        except (OSError, tomli.TOMLDecodeError) as e:
            logger.error(f"Error loading config from {config_path}: {e}")

    return config


def load_experiment(path: str | os.PathLike[str]) -> dict[str, Any]:
    """Load a declarative experiment file.

    Args:
        path: Path to a TOML file with a [run] table

    Returns:
        The [run] table as a plain dict (empty when the table is missing)

    Raises:
        ConfigError: If the file cannot be read or parsed
    """
    try:
        with open(path, "rb") as f:
            data = tomli.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read experiment file {path}: {e}") from e
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in experiment file {path}: {e}") from e
    run_table = data.get("run", {})
    if not isinstance(run_table, dict):
        raise ConfigError(f"[run] in {path} must be a table")
    return dict(run_table)


def _merge_configs(base: dict[str, Any], override: dict[str, Any]) -> None:
    """Recursively merge override dict into base dict.

    Args:
        base: The base configuration dictionary to merge into.
        override: The override configuration dictionary to merge from.

    """
    for key, value in override.items():
        if key in base and isinstance(base[key], dict) and isinstance(value, dict):
            nested_value: dict[str, Any] = value
            _merge_configs(base[key], nested_value)
        else:
            base[key] = value


def get_logger_verbosity() -> str:
    """Get the configured logger verbosity level.

    Returns:
        String representing the logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).

    """
    config = load_config()
    return config["logger"]["verbosity"]


def get_default_alpha() -> float:
    """Restart probability used when a command does not set one."""
    return float(load_config()["pagerank"]["alpha"])


def get_default_budget() -> int:
    return int(load_config()["rewiring"]["budget"])


def get_dense_cap() -> int:
    """Largest node count the dense O(n^3) path accepts."""
    return int(load_config()["pagerank"]["dense_cap"])


def get_drift_tolerance() -> float:
    return float(load_config()["pagerank"]["drift_tolerance"])


def get_default_workers() -> int:
    """Get the default sampler worker count.

    The FAIRREWIRE_WORKERS environment variable wins over the config file.

    Returns:
        Number of sampling workers (at least 1)

    """
    env_value = os.environ.get(WORKERS_ENV_VAR)
    if env_value:
        try:
            return max(1, int(env_value))
        except ValueError:
            logger.warning(f"Ignoring non-integer {WORKERS_ENV_VAR}={env_value!r}")
    return max(1, int(load_config()["sampler"]["workers"]))


def get_max_walk_steps() -> int:
    return int(load_config()["sampler"]["max_walk_steps"])
