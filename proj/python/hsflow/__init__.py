"""Python access to the hsflow solver."""

import json

import numpy as np

from . import _core
from ._core import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_STABILITY,
    EXIT_VIOLATION,
    calabi_ode_residual,
    calabi_pole,
    canonical_config,
    metric_from_triple,
    q_matrix,
)


def _config_text(config):
    if isinstance(config, dict):
        return "\n".join(f"{k}={str(v).lower() if isinstance(v, bool) else v}" for k, v in config.items())
    return config


def run(config, output_dir=""):
    """Run a key=value config (text or dict). Returns the report as a dict."""
    return json.loads(_core.run_json(_config_text(config), output_dir))


def read_checkpoint(path):
    """Header dict and {name: array of shape (components, n0, n1, n2, n3)}."""
    header, arrays = _core.read_checkpoint(str(path))
    return json.loads(header), {k: np.asarray(v) for k, v in arrays.items()}


def read_records(output_dir):
    """The NDJSON diagnostics of a run as a list of dicts."""
    from pathlib import Path

    with open(Path(output_dir) / "records.ndjson") as f:
        return [json.loads(line) for line in f if line.strip()]


def donaldson_study(w0=1.0, cells=(8, 16), keep=0.5):
    return json.loads(_core.donaldson_json(w0, list(cells), keep))


__all__ = [
    "EXIT_CONFIG",
    "EXIT_OK",
    "EXIT_STABILITY",
    "EXIT_VIOLATION",
    "calabi_ode_residual",
    "calabi_pole",
    "canonical_config",
    "donaldson_study",
    "metric_from_triple",
    "q_matrix",
    "read_checkpoint",
    "read_records",
    "run",
]
