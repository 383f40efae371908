"""
Run configuration: defaults, YAML/JSON files and command-line flags.

Sections mirror the pipeline stages (mesh, solver, profile, hilbert,
verify, energy, checks, output); later sources override earlier ones
key by key.
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import yaml


class ConfigError(ValueError):
    """Raised for invalid or unreadable configuration."""


# string-valued entries of otherwise numeric sections, with their choices
CHOICES = {
    'hilbert.fa_method': ('split', 'hermite'),
}


class RunConfig:
    """Nested settings for solve and verify runs, merged over DEFAULT_CONFIG."""

    DEFAULT_CONFIG = {
        'mesh': {
            'L': 1e4,
            'abs_cap': 0.05,
            'rel_cap': 0.02,
            'refine': 1,
        },
        'solver': {
            'tol': 1e-6,
            'max_steps': 200000,
            'cfl': 0.1,
            'divergence_factor': 10.0,
            'init': 'zero',
            'log_every': 500,
        },
        'profile': {},
        'hilbert': {
            'm_near': 10.0,
            'delta': 1e-6,
            'gauss_order': 8,
            'M1': 1e5,
            'M2': 4.0,
            'fa_method': 'split',
            'chunk': 64,
        },
        'verify': {
            'refine': 1,
            'cell_split': 4,
            'LB_factor': 100.0,
            'copt_p': 36,
            'eps_bar_max': 1e-4,
            'copt_max': 0.999,
            'theta_margin_min': 0.025,
            'omega_margin_min': 0.04,
        },
        'energy': {
            'weights': {},
            'parameters': {},
        },
        'checks': {},
        'output': {
            'dir': 'out',
            'checkpoint': 'out/state.json',
            'history': 'out/history.csv',
            'report': 'out/report.json',
        },
    }

    # flag name -> dot path
    OVERRIDES = {
        'mesh_L': 'mesh.L',
        'tol': 'solver.tol',
        'init': 'solver.init',
        'max_steps': 'solver.max_steps',
        'refine': 'mesh.refine',
        'out': 'output.dir',
    }

    def __init__(self, config_dict: Optional[Dict[str, Any]] = None):
        self.config = self._merge_configs(self._deep_copy(self.DEFAULT_CONFIG), config_dict or {})

    def _deep_copy(self, obj):
        if isinstance(obj, dict):
            return {k: self._deep_copy(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [self._deep_copy(item) for item in obj]
        else:
            return obj

    def _merge_configs(self, base: dict, override: dict) -> dict:
        """Merge override into a copy of base; nested sections merge key by key."""
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    def get(self, path: str, default=None):
        """Value at a dot path such as 'verify.copt_p'; default when absent or None."""
        value = self.config
        for key in path.split('.'):
            if isinstance(value, dict):
                value = value.get(key)
            else:
                return default
            if value is None:
                return default
        return value

    def set(self, path: str, value):
        """Set a value by dot-separated path, creating sections as needed."""
        keys = path.split('.')
        node = self.config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = value

    def with_overrides(self, flags: Dict[str, Any]) -> 'RunConfig':
        """Copy with command-line flags applied; None values are ignored.

        Keys are either flag names from OVERRIDES or dot paths.
        Output paths follow a changed output directory.
        """
        merged = RunConfig(self._deep_copy(self.config))
        for name, value in flags.items():
            if value is None:
                continue
            merged.set(self.OVERRIDES.get(name, name), value)
        out = flags.get('out')
        if out is not None:
            base = Path(out)
            for key, filename in (('checkpoint', 'state.json'), ('history', 'history.csv'),
                                  ('report', 'report.json')):
                merged.set(f'output.{key}', str(base / filename))
        return merged

    def validate(self) -> 'RunConfig':
        """Check the numeric invariants.

        Raises:
            ConfigError: If a numeric field is not positive, tol is outside (0, 1),
                or a string choice is unknown.
        """
        positive = ('mesh.L', 'mesh.abs_cap', 'mesh.rel_cap', 'mesh.refine', 'solver.max_steps',
                    'solver.cfl', 'solver.divergence_factor', 'solver.log_every', 'verify.refine',
                    'verify.cell_split', 'verify.LB_factor', 'verify.copt_p')
        for path in positive:
            value = self.get(path)
            try:
                ok = float(value) > 0.0
            except (TypeError, ValueError):
                raise ConfigError(f"{path} must be a number, got {value!r}")
            if not ok:
                raise ConfigError(f"{path} must be positive, got {value!r}")
        for section in ('profile', 'hilbert', 'energy.weights', 'energy.parameters'):
            for key, value in (self.get(section, {}) or {}).items():
                path = f"{section}.{key}"
                if value is None:
                    continue
                if path in CHOICES:
                    if value not in CHOICES[path]:
                        raise ConfigError(f"{path} must be one of {CHOICES[path]}, got {value!r}")
                    continue
                try:
                    float(value)
                except (TypeError, ValueError):
                    raise ConfigError(f"{path} must be a number, got {value!r}")
        tol = float(self.get('solver.tol'))
        if not 0.0 < tol < 1.0:
            raise ConfigError(f"solver.tol must lie in (0, 1), got {tol!r}")
        init = str(self.get('solver.init', 'zero'))
        if init != 'zero' and init.split(':', 1)[-1] not in ('f1', 'f2', 'f3', 'f4'):
            raise ConfigError(f"solver.init must be 'zero' or 'family:f1'..'family:f4', got {init!r}")
        return self

    def to_dict(self) -> dict:
        return self._deep_copy(self.config)

    @classmethod
    def from_file(cls, path: str) -> 'RunConfig':
        """Load a .yaml, .yml or .json run configuration.

        Raises:
            ConfigError: If the extension is not supported or the file cannot be read
        """
        suffix = Path(path).suffix.lower()
        if suffix not in ('.yaml', '.yml', '.json'):
            raise ConfigError(f"Unsupported config file format: {Path(path).suffix}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f) if suffix == '.json' else yaml.safe_load(f)
        except OSError as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML in {path}: {e}") from e
        if data is not None and not isinstance(data, dict):
            raise ConfigError(f"{path} must hold a mapping of sections")
        return cls(data)
