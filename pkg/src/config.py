"""Configuration management from environment variables."""

import os
from pathlib import Path

from .errors import ConfigError


class Config:
    """Lab configuration from environment variables."""

    # Experiment configs directory
    EXPERIMENTS_DIR = Path(os.getenv("EXPERIMENTS_DIR", "./experiments"))

    # Default output directory for CSV and JSONL artifacts
    RESULTS_DIR = Path(os.getenv("RESULTS_DIR", "./results"))

    # Logging level
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Dense statevector budget in amplitudes (2**22 by default)
    MAX_AMPLITUDES = int(os.getenv("MAX_AMPLITUDES", str(2**22)))

    # Worker pool size for Monte Carlo commands
    THREADS = int(os.getenv("THREADS", str(os.cpu_count() or 1)))

    # Master seed used when a command is given none
    DEFAULT_SEED = int(os.getenv("DEFAULT_SEED", "20110701"))

    @classmethod
    def validate(cls):
        """Validate configuration and normalize values."""
        if not cls.EXPERIMENTS_DIR.is_absolute():
            cls.EXPERIMENTS_DIR = cls.EXPERIMENTS_DIR.resolve()

        if not cls.RESULTS_DIR.is_absolute():
            cls.RESULTS_DIR = cls.RESULTS_DIR.resolve()

        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR"]
        if cls.LOG_LEVEL.upper() not in valid_levels:
            cls.LOG_LEVEL = "INFO"
        else:
            cls.LOG_LEVEL = cls.LOG_LEVEL.upper()

        if cls.MAX_AMPLITUDES < 2:
            raise ConfigError(
                "MAX_AMPLITUDES must be at least 2",
                details={"MAX_AMPLITUDES": cls.MAX_AMPLITUDES}
            )

        if cls.THREADS < 1:
            raise ConfigError(
                "THREADS must be a positive integer",
                details={"THREADS": cls.THREADS}
            )
