"""
Configuration system for blowup runs.
"""

from config.loader import ConfigError, RunConfig

__all__ = ['ConfigError', 'RunConfig']
