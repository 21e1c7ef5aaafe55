"""Run results, canonical JSON, published schemas and atomic output writing."""

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .. import __version__

RESULT_SCHEMA = "mrqsim.run/1"
ERROR_SCHEMA = "mrqsim.error/1"
COMMANDS = ("field", "gate", "purify", "bell", "t1had")


def plain(obj):
    """JSON-ready copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def canonical_json(obj):
    """Sorted-key, fixed-indent JSON; floats use Python's shortest repr."""
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


@dataclass
class RunResult:
    command: str
    input_digest: str
    seed: int
    scenario_name: str
    result: dict
    artifacts: dict = field(default_factory=dict)  # file name -> text

    def document(self):
        return {
            "schema": RESULT_SCHEMA,
            "version": __version__,
            "command": self.command,
            "scenario": self.scenario_name,
            "input_digest": self.input_digest,
            "seed": self.seed,
            "artifacts": sorted(self.artifacts),
            "result": self.result,
        }

    def to_json(self):
        return canonical_json(self.document())

    @property
    def result_name(self):
        return f"{self.command}.json"


def load_schema(name):
    """Published JSON schema ``name`` (``field``, ..., ``error``, ``scenario``)."""
    text = resources.files("mrqsim.cli").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _atomic_write(path, text):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(run, out_dir):
    """Write the result JSON and its artifacts; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {run.result_name: run.to_json(), **run.artifacts}
    paths = []
    for name in sorted(files):
        p = out / name
        _atomic_write(p, files[name])
        paths.append(p)
    return paths


def error_record(exit_code, kind, message, **extra):
    rec = {"schema": ERROR_SCHEMA, "exit_code": exit_code, "kind": kind, "message": message}
    rec.update({k: v for k, v in extra.items() if v is not None})
    return rec
