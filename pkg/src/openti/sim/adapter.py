"""Subprocess adapter contract for external simulator backends.

An adapter is any executable invoked as `adapter <scenario_dir> <out_dir>`
that leaves a metrics.json matching the MetricsReport schema in the output
directory. This is the integration seam for microscopic or multi-resolution
simulators; no binding ships here.
"""

from __future__ import annotations

import json
import os
import subprocess
from dataclasses import dataclass

from ..errors import BackendError, SchemaError
from .engine import MetricsReport


@dataclass(frozen=True)
class AdapterConfig:
    executable: str
    scenario_dir: str
    out_dir: str
    timeout_s: float = 300.0


def external_backend(config: AdapterConfig) -> MetricsReport:
    if not config.executable:
        raise BackendError("no adapter executable configured")
    os.makedirs(config.out_dir, exist_ok=True)
    try:
        proc = subprocess.run(
            [config.executable, config.scenario_dir, config.out_dir],
            capture_output=True,
            text=True,
            timeout=config.timeout_s,
        )
    except OSError as exc:
        raise BackendError(f"could not spawn adapter: {exc}")
    except subprocess.TimeoutExpired:
        raise BackendError(f"adapter timed out after {config.timeout_s}s")
    if proc.returncode != 0:
        raise BackendError(
            f"adapter exited {proc.returncode}; stdout: {proc.stdout.strip()!r} "
            f"stderr: {proc.stderr.strip()!r}"
        )
    metrics_path = os.path.join(config.out_dir, "metrics.json")
    if not os.path.exists(metrics_path):
        raise SchemaError(f"adapter produced no metrics.json in {config.out_dir}")
    with open(metrics_path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except ValueError as exc:
            raise SchemaError(f"metrics.json is not valid JSON: {exc}")
    return MetricsReport.from_json(payload)
