# src/harness/config_file.py
"""Experiment config files: `key = value` lines under `[experiment]` headers."""

import logging
from pathlib import Path

from src.core.domain import BodySpec
from src.core.errors import ConfigParseError, ConfigurationError, StretchLatError
from src.core.measure import StretchFactor
from src.core.settings import DEFAULT_SETTINGS
from src.core.stretchopt import OptimizeConfig
from src.harness.experiments import (SUMMARY_HEADER, ExperimentConfig, ExperimentKind,
                                     log_grid, run_experiment, summary_row, write_fit_csv,
                                     write_rows)

logger = logging.getLogger(__name__)

HEADER = "[experiment]"
KEYS = ('name', 'kind', 'body', 't', 't_log', 'strategy', 'levels', 'step', 'box', 'budget',
        'stretch', 'output', 'samples', 'max_slope', 'min_gap', 'window')
SUMMARY_FILE = "summary.csv"


def _floats(text, line, key):
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise ConfigParseError(f"'{key}' needs comma separated numbers, got {text!r}", line, key) from None


def _number(text, line, key, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigParseError(f"'{key}' needs a number, got {text!r}", line, key) from None


def parse_config(text, settings=None, n_jobs=1):
    """Experiment configs in file order"""
    blocks = []
    current = None
    for number, raw in enumerate(str(text).splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.lower() == HEADER:
            current = {'__line__': number}
            blocks.append(current)
            continue
        if line.startswith('['):
            raise ConfigParseError(f"unknown section {line!r}", number)
        if '=' not in line:
            raise ConfigParseError(f"expected 'key = value', got {line!r}", number)
        if current is None:
            raise ConfigParseError(f"'{line}' appears before the first {HEADER} header", number)
        key, value = (part.strip() for part in line.split('=', 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigParseError(f"unknown key '{key}'", number, key)
        if key in current:
            raise ConfigParseError(f"duplicate key '{key}'", number, key)
        current[key] = (value, number)

    if not blocks:
        raise ConfigParseError("config has no experiment blocks")
    return [_experiment(block, settings or DEFAULT_SETTINGS, n_jobs) for block in blocks]


def _experiment(block, settings, n_jobs):
    header_line = block['__line__']
    for key in ('name', 'kind', 'body'):
        if key not in block:
            raise ConfigParseError(f"experiment is missing key '{key}'", header_line, key)
    if ('t' in block) == ('t_log' in block):
        raise ConfigParseError("experiment needs exactly one of 't' or 't_log'", header_line, 't')

    name = block['name'][0]
    kind_text, line = block['kind']
    try:
        kind = ExperimentKind(kind_text.lower())
    except ValueError:
        names = ", ".join(k.value for k in ExperimentKind)
        raise ConfigParseError(f"unknown kind {kind_text!r}, expected one of {names}", line, 'kind') from None

    body_text, line = block['body']
    try:
        body = BodySpec.parse(body_text)
    except StretchLatError as e:
        raise ConfigParseError(str(e), line, 'body') from e

    if 't' in block:
        value, line = block['t']
        t_grid = _floats(value, line, 't')
    else:
        value, line = block['t_log']
        parts = _floats(value, line, 't_log')
        if len(parts) != 3:
            raise ConfigParseError("'t_log' needs lo,hi,n", line, 't_log')
        try:
            t_grid = log_grid(parts[0], parts[1], int(parts[2]))
        except ConfigurationError as e:
            raise ConfigParseError(str(e), line, 't_log') from e

    opt = {'grid_levels': settings['grid_levels'], 'initial_step': settings['grid_step'],
           'budget': settings['optimizer_budget'], 'n_jobs': 1}
    conversions = {'strategy': ('strategy', str), 'levels': ('grid_levels', int),
                   'step': ('initial_step', float), 'box': ('box', float), 'budget': ('budget', int)}
    for key, (field_name, kind_of) in conversions.items():
        if key in block:
            value, line = block[key]
            opt[field_name] = value.lower() if kind_of is str else _number(value, line, key, kind_of)

    extra = {}
    if 'stretch' in block:
        value, line = block['stretch']
        try:
            extra['stretch'] = StretchFactor(tuple(_floats(value, line, 'stretch')))
        except StretchLatError as e:
            raise ConfigParseError(str(e), line, 'stretch') from e
    for key, kind_of in (('samples', int), ('max_slope', float), ('min_gap', float),
                         ('window', int)):
        if key in block:
            value, line = block[key]
            extra[key] = _number(value, line, key, kind_of)
    extra.setdefault('samples', settings['exponent_samples'])

    try:
        return ExperimentConfig(body=body, t_grid=tuple(t_grid), kind=kind, name=name,
                                optimize=OptimizeConfig(**opt),
                                output=block['output'][0] if 'output' in block else f"{name}.csv",
                                n_jobs=n_jobs, **extra)
    except (ConfigurationError, ValueError) as e:
        raise ConfigParseError(str(e), header_line) from e


def load_config(path, settings=None, n_jobs=1):
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from e
    return parse_config(text, settings, n_jobs)


def run_config(path, output_dir="results", settings=None, n_jobs=1):
    """Run every experiment of a config file; 0 when all ran and passed, else 1"""
    experiments = load_config(path, settings, n_jobs)
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    summary = []
    status = 0
    for cfg in experiments:
        logger.info("Running experiment %s (%s, %d dilations)", cfg.name, cfg.kind.value, len(cfg.t_grid))
        try:
            fit = run_experiment(cfg)
        except StretchLatError as e:
            logger.error("Experiment %s failed: %s", cfg.name, e)
            summary.append(summary_row(name=cfg.name, kind=cfg.kind.value, error=e))
            status = 1
            continue
        write_fit_csv(fit, output_dir / cfg.output)
        summary.append(summary_row(fit))
        if not fit.passed:
            logger.warning("Experiment %s did not pass its acceptance check", cfg.name)
            status = 1

    write_rows(output_dir / SUMMARY_FILE, SUMMARY_HEADER, summary)
    return status
