"""Application settings and configuration."""

import os
import logging
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PACKAGE_ROOT = Path(__file__).resolve().parent.parent


class Settings:
    """Lab settings loaded from environment variables."""

    # Data root; relative path flags resolve against it
    DATA_DIR: str = os.getenv('XALMA_LAB_DATA_DIR', './data')

    # Language grouping registry
    GROUPS_CONFIG: str = os.getenv(
        'XALMA_LAB_GROUPS', str(PACKAGE_ROOT / 'config' / 'language_groups.txt')
    )
    TOY_GROUPS_CONFIG: str = str(PACKAGE_ROOT / 'config' / 'toy_groups.txt')

    # Fan-out width for preference-data generation
    WORKERS: int = int(os.getenv('XALMA_LAB_WORKERS', '1'))

    # Logging
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE: Optional[str] = os.getenv('LOG_FILE') or None

    @property
    def data_root(self) -> Path:
        """Data directory as a Path."""
        return Path(self.DATA_DIR)

    def resolve(self, path: str) -> Path:
        """Resolve a path flag against the data root unless it is absolute."""
        candidate = Path(path)
        if candidate.is_absolute():
            return candidate
        return self.data_root / candidate


# Create global settings instance
settings = Settings()


logger = logging.getLogger(__name__)


def validate_settings():
    """Validate that all settings are usable."""
    from utils.errors import ConfigurationError

    errors = []

    if settings.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        errors.append(f"LOG_LEVEL must be a logging level name, got {settings.LOG_LEVEL!r}")

    if settings.WORKERS < 1:
        errors.append("XALMA_LAB_WORKERS must be >= 1")

    if not Path(settings.GROUPS_CONFIG).is_file():
        errors.append(f"XALMA_LAB_GROUPS points to a missing file: {settings.GROUPS_CONFIG}")

    if errors:
        raise ConfigurationError(f"Configuration errors: {', '.join(errors)}")

    logger.debug(f"Settings validated (data dir: {settings.DATA_DIR})")
    return True
