# src/core/settings.py

import json
import logging
from pathlib import Path

import psutil

logger = logging.getLogger(__name__)

SETTINGS_FILE = "stretchlat_settings.json"

DEFAULT_SETTINGS = {
    'threads': None,              # None = all logical cores
    'exponent_samples': 10_000,   # quasi-uniform boundary sample size
    'numeric_max_order': 12,      # highest probed order for generic bodies
    'grid_step': 0.05,            # level-0 step in log-space
    'grid_levels': 10,
    'optimizer_budget': 200_000,  # max count evaluations per optimize call
}


def default_threads():
    """Number of worker threads when the user does not choose one"""
    return psutil.cpu_count(logical=True) or 1


def load_settings(path=None):
    """Load defaults, overridden by a JSON settings file when one is readable"""
    settings = dict(DEFAULT_SETTINGS)
    settings_file = Path(path) if path else Path(SETTINGS_FILE)

    try:
        if settings_file.exists():
            with open(settings_file, 'r', encoding='utf-8') as f:
                saved_settings = json.load(f)
            unknown = sorted(set(saved_settings) - set(DEFAULT_SETTINGS))
            if unknown:
                logger.warning("Ignoring unknown settings %s in %s", unknown, settings_file)
            settings.update({k: v for k, v in saved_settings.items() if k in DEFAULT_SETTINGS})
            logger.debug("Loaded settings from %s: %s", settings_file, settings)
    except (OSError, ValueError) as e:
        logger.warning("Could not load settings from %s: %s", settings_file, e)

    if settings['threads'] is None:
        settings['threads'] = default_threads()
    return settings
