"""App-market snapshot analytics: synthetic markets, a snapshot store and
the metric, ranked-list and anomaly reports built on top of it."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import _core
from ._core import (
    Error,
    PowerLawFit,
    SimilarityResult,
    classify_popularity,
    classify_staleness,
    fit_power_law,
    fit_power_law_scan,
    inverse_rank_measure,
    price_dispersion_cov,
    sample_power_law,
    seasonal_trend_decompose,
    yule_q,
)

__all__ = [
    "CliResult",
    "Error",
    "PowerLawFit",
    "SimilarityResult",
    "Store",
    "classify_popularity",
    "classify_staleness",
    "error_code",
    "fit_power_law",
    "fit_power_law_scan",
    "inverse_rank_measure",
    "price_dispersion_cov",
    "run_cli",
    "sample_power_law",
    "seasonal_trend_decompose",
    "simulate",
    "yule_q",
]


def error_code(exc: Error) -> str:
    """The error category, e.g. "ConfigError", from a raised Error."""
    return str(exc).split(":", 1)[0]


@dataclass(frozen=True)
class CliResult:
    code: int
    stdout: str
    stderr: str

    def json(self) -> Any:
        return json.loads(self.stdout)


def run_cli(*args: str | Path) -> CliResult:
    """Runs one `marketpulse` command in-process."""
    code, out, err = _core.run_cli([str(a) for a in args])
    return CliResult(code, out, err)


def simulate(script: dict | str | Path, out_dir: str | Path) -> dict:
    """Writes a synthetic dataset to `out_dir` and returns its ground truth.

    `script` is a script dict, JSON text, or a path to a JSON file.
    """
    if isinstance(script, dict):
        text = json.dumps(script)
    elif isinstance(script, Path) or (isinstance(script, str) and not script.lstrip().startswith("{")):
        text = Path(script).read_text()
    else:
        text = script
    return json.loads(_core.simulate(text, str(out_dir)))


class Store:
    """Thin wrapper over the native snapshot store; records come back as dicts."""

    def __init__(self, path: str | Path):
        self._store = _core.SnapStore(str(path))

    def ingest_dataset(self, data_dir: str | Path) -> dict:
        return json.loads(self._store.ingest_dataset(str(data_dir)))

    def apps(self) -> list[str]:
        return self._store.apps()

    def app_series(self, app: str) -> list[dict]:
        return [json.loads(line) for line in self._store.app_series(app)]

    def list_series(self, list_type: str) -> list[dict]:
        return [json.loads(line) for line in self._store.list_series(list_type)]

    def counts(self) -> dict[str, int]:
        return {
            "snapshots": self._store.snapshot_count(),
            "reviews": self._store.review_count(),
            "topk": self._store.topk_count(),
        }

    def rankings(self, list_type: str) -> Sequence[list[str]]:
        return [obs["ranking"] for obs in self.list_series(list_type)]
