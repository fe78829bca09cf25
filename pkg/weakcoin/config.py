#!/usr/bin/env python3
"""
Configuration for weakcoin

Defaults live in _default_config(); an explicit settings file given with
--config (YAML or JSON) is merged over them. Command-line flags override
both. There is no implicit lookup, so a command line fully determines a run.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from weakcoin.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class Config:
    """Layered settings: defaults < settings file < flags"""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.config = self._load_config()

    def _default_config(self) -> Dict[str, Any]:
        """Return the default configuration"""
        return {
            "tuner": {
                "restarts": 8,
                "max_evals": 20000,
                "polish_rounds": 12,
                "tol": 1e-10,
                "seed": 0,
            },
            "ascent": {
                "ancilla": 1,
                "iters": 300,
                "seed": 0,
            },
            "simulate": {
                "runs": 100000,
                "seed": 0,
            },
            "certificate": {
                "oracle_max_qubits": 8,
            },
            "output": {
                "format": "csv",
            },
        }

    def _deep_update(self, base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
        """Recursively merge updates into base configuration"""
        for key, value in updates.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                base[key] = self._deep_update(base[key], value)
            else:
                base[key] = value
        return base

    def _load_config(self) -> Dict[str, Any]:
        config = self._default_config()
        if self.path is None:
            return config
        if not self.path.exists():
            raise InvalidArgumentError(f"config file not found: {self.path}")
        try:
            # YAML is a superset of JSON, one loader covers both
            loaded = yaml.safe_load(self.path.read_text())
        except yaml.YAMLError as exc:
            raise InvalidArgumentError(f"cannot parse {self.path}: {exc}") from exc
        if loaded is None:
            return config
        if not isinstance(loaded, dict):
            raise InvalidArgumentError(f"{self.path} must contain a mapping at the top level")
        logger.debug("loaded settings from %s", self.path)
        return self._deep_update(config, loaded)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a value; dotted keys reach into sections ("tuner.restarts")"""
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any):
        """Set a value, creating sections along a dotted key"""
        parts = key.split(".")
        node = self.config
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def resolve(self, key: str, flag: Any) -> Any:
        """Flag value when given, otherwise the configured one"""
        return flag if flag is not None else self.get(key)

    def snapshot(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)
