"""
Configuration Manager
Handles persistence of lab configuration to disk
"""

import copy
import json
import os
from typing import Dict, Any, List, Optional
from pathlib import Path
from logger import get_logger

logger = get_logger('lo_lab.config_manager')

OPTIMIZERS = ('star_ary', 'three_ary', 'ranking')
BASELINES = ('opo_ea', 'binary_search')


class ConfigManager:
    """Manages configuration persistence"""

    DEFAULT_CONFIG = {
        'budget_factor': 50,  # Multiplies n*log2(n) (n^2 for opo_ea)
        'workers': 1,
        'base_seed': 20110101,
        'trials_per_size': {
            'optimizer': 200,
            'baseline': 1000
        },
        'default_sizes': {
            'opo_ea': [128, 256, 512],
            'binary_search': [256, 512, 1024],
            'star_ary': [1024, 4096, 16384],
            'three_ary': [1024, 4096, 16384],
            'ranking': [1024]
        },
        'verification': {
            'success_frequency': 0.9,
            'identification_n': 65536,
            'identification_trials': 100,
            'improvement_samples': 100000,
            'spread_min_trials': 30
        }
    }

    def __init__(self, config_path: str = 'data/config/lab_config.json'):
        self.config_path = Path(config_path)
        self.config = self.load()

    def load(self) -> Dict[str, Any]:
        """Load configuration from disk or return default"""
        try:
            if self.config_path.exists():
                with open(self.config_path, 'r') as f:
                    loaded_config = json.load(f)
                # Merge with defaults to ensure all keys exist, one level deep
                config = copy.deepcopy(self.DEFAULT_CONFIG)
                for key, value in loaded_config.items():
                    if isinstance(value, dict) and isinstance(config.get(key), dict):
                        config[key].update(value)
                    else:
                        config[key] = value
                logger.info(f"[CONFIG] Loaded {self.config_path}")
                return config
            else:
                return copy.deepcopy(self.DEFAULT_CONFIG)
        except Exception as e:
            logger.error(f"[CONFIG] Error loading {self.config_path}: {e}, using defaults")
            return copy.deepcopy(self.DEFAULT_CONFIG)

    def save(self, config: Dict[str, Any] = None) -> bool:
        """Save configuration to disk"""
        try:
            self.config_path.parent.mkdir(parents=True, exist_ok=True)

            # Use provided config or instance config
            config_to_save = config if config is not None else self.config

            with open(self.config_path, 'w') as f:
                json.dump(config_to_save, f, indent=2)

            file_size = os.path.getsize(self.config_path)
            logger.info(f"[CONFIG] ✓ Saved {self.config_path} ({file_size} bytes)")

            if config is not None:
                self.config = config

            return True
        except Exception as e:
            logger.error(f"[CONFIG] ✗ Error saving config: {e}", exc_info=True)
            return False

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value"""
        return self.config.get(key, default)

    def update(self, updates: Dict[str, Any]) -> bool:
        """Update multiple configuration values and save"""
        self.config.update(updates)
        logger.info(f"[CONFIG] Keys updated: {', '.join(sorted(updates))}")
        return self.save()

    def merged_updates(self, assignments: Dict[str, Any]) -> Dict[str, Any]:
        """
        Turn dotted-key assignments into top-level updates.

        'verification.success_frequency' replaces one entry of its section;
        the other entries of the section are kept.
        """
        updates: Dict[str, Any] = {}
        for key, value in assignments.items():
            section, _, entry = key.partition('.')
            if section not in self.DEFAULT_CONFIG:
                raise ValueError(f"Unknown configuration key '{key}'")
            if not entry:
                updates[section] = value
                continue
            current = updates.get(section, self.config.get(section))
            if not isinstance(current, dict):
                raise ValueError(f"'{section}' is not a section, cannot set '{key}'")
            updates[section] = {**current, entry: value}
        return updates

    def get_all(self) -> Dict[str, Any]:
        """Get all configuration"""
        return copy.deepcopy(self.config)

    def reset(self) -> bool:
        """Reset configuration to defaults"""
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        return self.save()

    def trials_for(self, algorithm: str) -> int:
        """Default trials per size: baselines get more trials than optimizers"""
        group = 'baseline' if algorithm in BASELINES else 'optimizer'
        return int(self.config['trials_per_size'][group])

    def sizes_for(self, algorithm: str) -> List[int]:
        return list(self.config['default_sizes'].get(algorithm, []))

    def verification(self, key: str) -> Any:
        return self.config['verification'][key]

    def validate(self, config: Optional[Dict[str, Any]] = None) -> List[str]:
        """Collect every problem in the configuration (or a candidate for it); empty when valid"""
        config = config if config is not None else self.config
        errors = []
        if not isinstance(config.get('budget_factor'), (int, float)) or config['budget_factor'] <= 0:
            errors.append(f"budget_factor must be a positive number, got {config.get('budget_factor')!r}")
        if not isinstance(config.get('workers'), int) or config['workers'] < 1:
            errors.append(f"workers must be a positive integer, got {config.get('workers')!r}")
        seed = config.get('base_seed')
        if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            errors.append(f"base_seed must be an unsigned 64-bit integer, got {seed!r}")
        for group, trials in config.get('trials_per_size', {}).items():
            if not isinstance(trials, int) or trials < 1:
                errors.append(f"trials_per_size.{group} must be a positive integer, got {trials!r}")
        for algorithm, sizes in config.get('default_sizes', {}).items():
            if algorithm not in OPTIMIZERS + BASELINES:
                errors.append(f"default_sizes has unknown algorithm '{algorithm}'")
            elif not sizes or any(not isinstance(n, int) or n < 1 for n in sizes):
                errors.append(f"default_sizes.{algorithm} must be a non-empty list of positive integers")
        frequency = config.get('verification', {}).get('success_frequency')
        if not isinstance(frequency, (int, float)) or not 0 < frequency <= 1:
            errors.append(f"verification.success_frequency must lie in (0, 1], got {frequency!r}")
        return errors

    def to_cli_args(self, algorithm: str) -> List[str]:
        """Convert configuration to CLI arguments for a `harness.py run` of one algorithm"""
        args = ['run', '--algorithm', algorithm]

        sizes = self.sizes_for(algorithm)
        if sizes:
            args.extend(['--sizes', ','.join(str(n) for n in sizes)])

        args.extend(['--trials', str(self.trials_for(algorithm))])
        args.extend(['--seed', str(self.config['base_seed'])])
        args.extend(['--budget-factor', str(self.config['budget_factor'])])

        if self.config['workers'] > 1:
            args.extend(['--workers', str(self.config['workers'])])

        # Flags
        if algorithm == 'ranking':
            args.extend(['--mode', 'ranking'])

        return args
