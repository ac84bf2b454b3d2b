"""Lindblad simulation of resonator-coupled electron qubits."""

import json

from ._neoqed import (
    Config,
    ConfigError,
    NeoqedError,
    RunResult,
    __version__,
    oracles,
    preset_names,
    zz_shift_mhz,
)
from ._neoqed import plan_json as _plan_json
from ._neoqed import run as _run

__all__ = [
    "Config",
    "ConfigError",
    "NeoqedError",
    "RunResult",
    "__version__",
    "analysis",
    "oracles",
    "plan",
    "preset_names",
    "run",
    "zz_shift_mhz",
]


def run(config, threads=None):
    """Run a Config (or a path / "preset:<name>" reference) in memory."""
    if not isinstance(config, Config):
        config = Config.resolve(str(config))
    return _run(config, threads)


def plan(config):
    """Dry-run summary: protocol, cell count, resolved amplitudes, spec hash."""
    return json.loads(_plan_json(config))


def analysis(result):
    """Protocol analysis (fits, crossings, ...) of a RunResult as a dict."""
    return json.loads(result.analysis_json)
