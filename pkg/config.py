"""
Configuration management for the checkpoint placement toolkit.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional

logger = logging.getLogger(__name__)


class Config:
    """Configuration manager with default settings."""

    DEFAULT_CONFIG = {
        "placement": {
            "exhaustive_budget": 10_000_000,
            "snap_uniform": False,
            "break_even_reference_k": 16,
            "break_even_k_max": 64
        },
        "genetic": {
            "base_population": 100,
            "expanded_population": 300,
            "elite": 10,
            "survivor_exchange_p": 0.5,
            "crossover_p": 0.5,
            "per_mutation_p": 0.125,
            "time_budget": 10.0,
            "max_generations": None,
            "stall_generations": None,
            "islands": None,
            "seed": 0
        },
        "ilp": {
            "integrality_tolerance": 1e-6
        },
        "metrics": {
            "bins": 200,
            "zero_tolerance": 1e-9
        },
        "synthgen": {
            "steps": 10000,
            "carpet_height": 4,
            "peak_count_mu": 2.5,
            "peak_count_sigma": 0.8,
            "peak_count_range": [2, 100],
            "height_factor_range": [2.0, 5.0],
            "width_fraction_range": [0.02, 0.10],
            "seed": 0
        },
        "cachesim": {
            "total_size": 8192,
            "associativity": 4,
            "line_size": 64,
            "weight_per_miss": 1,
            "filter": "data"
        },
        "experiments": {
            "max_workers": None,
            "omit_timing": False
        },
        "logging": {
            "level": "INFO",
            "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            "file": None
        }
    }

    def __init__(self, config_path: Optional[str] = "config.json"):
        self.config_path = Path(config_path) if config_path else None
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.load_config()

    def load_config(self):
        """Load configuration from file, falling back to defaults."""
        if self.config_path is None:
            return
        if not self.config_path.exists():
            logger.warning(f"Config file {self.config_path} not found, using defaults")
            return
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                user_config = json.load(f)
            self._merge_config(self.config, user_config)
        except Exception as e:
            logger.error(f"Error loading config: {e}. Using defaults.")

    def save_config(self):
        """Save current configuration to file."""
        if self.config_path is None:
            raise ValueError("No config path to save to")
        self.config_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.config_path, 'w', encoding='utf-8') as f:
            json.dump(self.config, f, indent=2)

    def _merge_config(self, base: Dict[str, Any], update: Dict[str, Any]):
        """Recursively merge configuration dictionaries."""
        for key, value in update.items():
            if key in base and isinstance(base[key], dict) and isinstance(value, dict):
                self._merge_config(base[key], value)
            else:
                base[key] = value

    def get(self, key_path: str, default=None):
        """Get configuration value using dot notation (e.g., 'genetic.elite')."""
        keys = key_path.split('.')
        value = self.config

        for key in keys:
            if isinstance(value, dict) and key in value:
                value = value[key]
            else:
                return default

        return value

    def set(self, key_path: str, value: Any):
        """Set configuration value using dot notation (in memory only)."""
        keys = key_path.split('.')
        config = self.config

        for key in keys[:-1]:
            if key not in config:
                config[key] = {}
            config = config[key]

        config[keys[-1]] = value

    @property
    def exhaustive_budget(self) -> int:
        return self.get('placement.exhaustive_budget')

    @property
    def log_level(self) -> str:
        return self.get('logging.level', 'INFO')

    @property
    def log_format(self) -> str:
        return self.get('logging.format')

    @property
    def log_file(self) -> Optional[str]:
        return self.get('logging.file')

    def to_dict(self) -> dict:
        """Convert config to dictionary format."""
        return copy.deepcopy(self.config)
