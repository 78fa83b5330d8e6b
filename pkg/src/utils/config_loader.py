"""
Configuration Loader Utility
Loads configuration from YAML and environment overrides (.env)
"""

import os
import sys
from pathlib import Path
from typing import Dict, Any, Optional

import yaml
from dotenv import load_dotenv

sys.path.append(str(Path(__file__).parent.parent))

from utils.errors import ConfigValidationError

PROJECT_ROOT = Path(__file__).resolve().parent.parent.parent


class ConfigLoader:
    """Handles loading configuration from config.yaml and the environment"""

    # Environment variable -> dot path it overrides
    ENV_OVERRIDES = {
        'DISCLAB_THREADS': ('sampling.max_workers', int),
        'DISCLAB_LOG_LEVEL': ('logging.level', str),
        'DISCLAB_OUTPUT_DIR': ('paths.outputs', str),
    }

    REQUIRED_KEYS = [
        'project.name',
        'sampling.seed',
        'sampling.n_haar',
        'limit_law.M',
        'limit_law.P_max',
        'paths.outputs',
    ]

    def __init__(self, config_dir: Optional[str] = None):
        config_dir = config_dir or os.getenv("DISCLAB_CONFIG_DIR")
        self.config_dir = Path(config_dir) if config_dir else PROJECT_ROOT / "config"
        self.config = None

    def load_yaml_config(self, filename: str = "config.yaml") -> Dict[str, Any]:
        """Load YAML configuration file"""
        config_path = self.config_dir / filename

        if not config_path.exists():
            raise FileNotFoundError(f"Config file not found: {config_path}")

        with open(config_path, 'r') as f:
            self.config = yaml.safe_load(f) or {}

        return self.config

    def apply_env_overrides(self, env_file: Optional[str] = None) -> None:
        """Apply DISCLAB_* overrides from the process environment and .env"""
        load_dotenv(env_file or PROJECT_ROOT / ".env", override=False)

        for var, (key_path, cast) in self.ENV_OVERRIDES.items():
            raw = os.getenv(var)
            if raw is None or raw == "":
                continue
            try:
                self.set(key_path, cast(raw))
            except ValueError as e:
                raise ConfigValidationError(f"Invalid value for {var}: {raw!r}") from e

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation

        Example:
            config.get('limit_law.M')
            config.get('sampling.n_haar', 1000000)
        """
        if self.config is None:
            self.load_yaml_config()

        keys = key_path.split('.')
        value = self.config

        try:
            for key in keys:
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any) -> None:
        """Set a configuration value using dot notation"""
        if self.config is None:
            self.load_yaml_config()

        keys = key_path.split('.')
        node = self.config
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value

    def validate_config(self) -> bool:
        """Validate that all required configuration is present"""
        missing_keys = [key for key in self.REQUIRED_KEYS if self.get(key) is None]

        if missing_keys:
            raise ConfigValidationError(f"Missing required configuration keys: {missing_keys}")

        if int(self.get('sampling.max_workers', 1)) < 1:
            raise ConfigValidationError("sampling.max_workers must be >= 1")

        return True

    def as_dict(self) -> Dict[str, Any]:
        """Resolved configuration (for echoing into JSON summaries)"""
        if self.config is None:
            self.load_yaml_config()
        return dict(self.config)


# Singleton instance
_config_loader = None


def get_config() -> ConfigLoader:
    """Get singleton ConfigLoader instance"""
    global _config_loader
    if _config_loader is None:
        _config_loader = ConfigLoader()
        _config_loader.load_yaml_config()
        _config_loader.apply_env_overrides()
        _config_loader.validate_config()
    return _config_loader


def reset_config() -> None:
    """Drop the cached loader (tests and --config switch)"""
    global _config_loader
    _config_loader = None
