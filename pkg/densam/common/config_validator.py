"""
Environment Validator for DenseAM Runs

Fail-fast validation of the environment variables the CLI and sweeps read,
so a run never starts with a malformed thread count or sample budget.
"""

import logging
import os
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)

MAX_DEFAULT_THREADS = 8
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class ConfigurationError(Exception):
    """Raised when configuration validation fails"""

    pass


def _positive_int(value: str) -> bool:
    return value.strip().isdigit() and int(value) >= 1


def default_thread_count() -> int:
    return max(1, min(os.cpu_count() or 1, MAX_DEFAULT_THREADS))


class EnvironmentValidator:
    """
    Validates the environment variables of a densam run.

    Each variable spec names a description, an optional default (None means
    required), a validation callable and the message shown when it fails.
    """

    DENSAM_VARS = {
        "DENSAM_THREADS": {
            "description": "Worker threads for sweep cells",
            "default": str(default_thread_count()),
            "validation": _positive_int,
            "error_msg": "Must be a positive integer",
        },
        "LOG_LEVEL": {
            "description": "Root log level",
            "default": "INFO",
            "validation": lambda v: v.upper() in LOG_LEVELS,
            "error_msg": f"Must be one of {', '.join(LOG_LEVELS)}",
        },
        "DENSAM_MC_SAMPLES": {
            "description": "Default Monte Carlo sample count",
            "default": "100000",
            "validation": _positive_int,
            "error_msg": "Must be a positive integer",
        },
    }

    @staticmethod
    def validate_required_variables(
        required_vars: Dict[str, dict],
        service_name: str = "densam",
        strict: bool = True,
    ) -> Tuple[bool, List[str]]:
        """
        Validate a set of environment variables.

        Args:
            required_vars: Dictionary of variable specifications
            service_name: Name used in log lines
            strict: If True, raise on failure; if False, return the status

        Returns:
            Tuple of (success, errors)

        Raises:
            ConfigurationError: If validation fails and strict=True
        """
        errors = []
        logger.debug(f"Validating environment for {service_name}")

        for var_name, spec in required_vars.items():
            value = os.getenv(var_name)
            default = spec.get("default")
            validation_func = spec.get("validation")
            error_msg = spec.get("error_msg", "Validation failed")

            if not value and default is not None:
                logger.debug(f"  {var_name} = {default} (default)")
                continue

            if not value:
                errors.append(f"{var_name}: REQUIRED but not set - {spec.get('description', '')}")
                continue

            if validation_func:
                try:
                    if not validation_func(value):
                        errors.append(f"{var_name}: {error_msg} (value: {value[:20]})")
                        continue
                except Exception as e:
                    errors.append(f"{var_name}: Validation error - {e}")
                    continue

            logger.debug(f"  {var_name} = {value}")

        if errors:
            for error in errors:
                logger.error(f"Invalid configuration: {error}")
            if strict:
                raise ConfigurationError(f"Configuration validation failed: {len(errors)} errors ({'; '.join(errors)})")
            return False, errors

        return True, []

    @staticmethod
    def validate_environment(strict: bool = True) -> Dict[str, str]:
        """
        Validate every densam variable and return the effective values

        Raises:
            ConfigurationError: If a variable is set to an invalid value and strict=True
        """
        EnvironmentValidator.validate_required_variables(EnvironmentValidator.DENSAM_VARS, strict=strict)
        return {
            name: os.getenv(name) or spec["default"] for name, spec in EnvironmentValidator.DENSAM_VARS.items()
        }


def thread_count() -> int:
    """Worker threads from DENSAM_THREADS (validated), else the CPU count capped at 8"""
    value = os.getenv("DENSAM_THREADS")
    if not value:
        return default_thread_count()
    if not _positive_int(value):
        raise ConfigurationError(f"DENSAM_THREADS must be a positive integer, got '{value}'")
    return int(value)


def mc_samples_override() -> Optional[int]:
    """DENSAM_MC_SAMPLES when set, else None"""
    value = os.getenv("DENSAM_MC_SAMPLES")
    if not value:
        return None
    if not _positive_int(value):
        raise ConfigurationError(f"DENSAM_MC_SAMPLES must be a positive integer, got '{value}'")
    return int(value)
