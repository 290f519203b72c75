"""Access to the ``WINDCORR`` settings block.

The numeric modules only need a handful of constants. They read them through
:func:`get_setting` so that they keep working when imported outside a
configured Django project (plain scripts, notebooks).
"""
from __future__ import annotations

import configparser
import copy
import logging
from typing import Any, Dict, Iterable, Optional

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Any] = {
    "STEP": 600,
    "HIGH_RES_STEP": 10,
    "WINDOW": "12h",
    "STRIDE": "12h",
    "MODE": "reduced",
    "MAX_WIND_SPEED": 30.0,
    "JOBS": 1,
    "MATRIX_DIGITS": 15,
    "ZERO_VARIANCE_RTOL": 1e-12,
    "DEGENERATE_RESULTANT": 1e-9,
    "WAKE_DECAY": 0.05,
    "THRESHOLDS": {
        "dens_min": 0.6,
        "dens_dev_min": 0.1,
        "psi10_max": -1000.0,
        "shutdown_wind_max": 4.0,
        "shutdown_farm_min": 20,
        "dens_window": 12 * 3600,
        "psi_window": 600,
    },
}


def _project_settings() -> Dict[str, Any]:
    try:
        from django.conf import settings
    except ImportError:
        return {}
    if not settings.configured:
        return {}
    return getattr(settings, "WINDCORR", {}) or {}


def get_setting(name: str) -> Any:
    """Return ``settings.WINDCORR[name]`` or the built-in default."""
    overrides = _project_settings()
    if name in overrides:
        value = overrides[name]
        if isinstance(value, dict) and isinstance(DEFAULTS.get(name), dict):
            merged = copy.deepcopy(DEFAULTS[name])
            merged.update(value)
            return merged
        return value
    if name not in DEFAULTS:
        raise KeyError(f"unknown windcorr setting: {name}")
    return copy.deepcopy(DEFAULTS[name])


class ConfigFileError(ValueError):
    """Raised when a key-value configuration file cannot be used."""


def read_ini_section(path, section: str, known: Optional[Iterable[str]] = None) -> Dict[str, str]:
    """Read one ``[section]`` of an INI file into a plain ``{key: text}`` dict.

    Keys are lower-cased by :mod:`configparser`. When ``known`` is given any
    other key is rejected so that typos do not silently fall back to defaults.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        raise ConfigFileError(f"{path}: {exc}") from exc
    if not parser.has_section(section):
        raise ConfigFileError(f"{path}: missing [{section}] section")
    items = dict(parser.items(section))
    if known is not None:
        allowed = {key.lower() for key in known}
        unknown = sorted(set(items) - allowed)
        if unknown:
            raise ConfigFileError(f"{path}: unknown key(s) in [{section}]: {', '.join(unknown)}")
    logger.debug("Loaded [%s] from %s: %s", section, path, sorted(items))
    return items
