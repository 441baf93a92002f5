"""Piecewise-linear conductivity: forward maps, stability and inversion."""

import json
from pathlib import Path

from ._core import *  # noqa: F401,F403
from ._core import CalderonError, compare_runs, run_config, validate_config

__all__ = ["CalderonError", "run", "validate", "compare"]


def _load(config, base_dir):
    if isinstance(config, (str, Path)):
        path = Path(config)
        return path.read_text(), base_dir or path.parent
    return json.dumps(config), base_dir or Path(".")


def run(config, output_dir, base_dir=None):
    """Run a config (dict or path) and return its summary."""
    text, base = _load(config, base_dir)
    return run_config(text, Path(base), Path(output_dir))


def validate(config, base_dir=None):
    text, base = _load(config, base_dir)
    validate_config(text, Path(base))


def compare(baseline, candidate, tol="0"):
    return compare_runs(Path(baseline), Path(candidate), tol)
