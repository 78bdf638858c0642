# src/harness/__init__.py
"""Experiment runner and command line for stretchlat"""

from src.harness.config_file import load_config, parse_config, run_config
from src.harness.experiments import (ExperimentConfig, ExperimentKind, RateFit, RateRow,
                                     fit_slope, gap_experiment, lemma_gap, main_terms,
                                     rate_experiment, remainder_experiment, run_experiment)

__all__ = ['ExperimentConfig', 'ExperimentKind', 'RateFit', 'RateRow', 'fit_slope', 'lemma_gap',
           'main_terms', 'rate_experiment', 'remainder_experiment', 'gap_experiment',
           'run_experiment', 'parse_config', 'load_config', 'run_config']
