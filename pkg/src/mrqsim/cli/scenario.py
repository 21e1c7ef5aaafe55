"""Scenario files: one YAML/JSON document drives every subcommand.

Physical quantities are strings with units (``"3.0 T"``, ``"10 mT/m"``,
``"2.5 ms"``, ``"1e-6 pi"``); dimensionless numbers stay plain. Unknown keys
are rejected, and validation errors carry the dotted key path and, where
the file can be located, the line number.
"""

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal

import yaml
from pydantic import (BaseModel, BeforeValidator, ConfigDict, Field, ValidationError,
                      field_validator, model_validator)

from ..errors import ConfigurationError
from .units import parse_quantity

DEFAULT_PROGRAM = "control=|0>; target=|0>; gates=H,CNOT"


def _unit(dimension):
    return BeforeValidator(lambda v: parse_quantity(v, dimension), json_schema_input_type=str)


Tesla = Annotated[float, _unit("field")]
TeslaPerMeter = Annotated[float, _unit("gradient")]
Meter = Annotated[float, _unit("length")]
Second = Annotated[float, _unit("time")]
RadPerSecond = Annotated[float, _unit("angular_frequency")]
Radian = Annotated[float, _unit("angle")]
Gyromagnetic = Annotated[float, _unit("gyromagnetic")]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, validate_default=True)


class LinearGradient(_Section):
    """Straight line through ``(z_ref, offset)``."""

    slope: TeslaPerMeter
    offset: Tesla = "0 T"
    z_ref: Meter = "0 m"


class KnotGradient(_Section):
    """Piecewise-linear map from ``[z, offset]`` knots."""

    points: list[tuple[Meter, Tesla]] = Field(min_length=1)


GradientMap = LinearGradient | KnotGradient


class SiteSection(_Section):
    index: int
    z_center: Meter
    half_width: Meter
    reverse_gradient: GradientMap | None = None


class MagnetSection(_Section):
    b0: Tesla
    gamma: Gyromagnetic | None = None  # proton value when omitted
    main_gradient: GradientMap | None = None
    sites: list[SiteSection] = []
    homogeneity_tol: float = Field(1e-9, ge=0)
    samples_per_site: int = Field(101, ge=2, le=1_000_000)


class EnsembleSection(_Section):
    size: int = Field(100_000, ge=1, le=10_000_000)
    t1: Second = "inf s"
    t2: Second = "inf s"
    spread: RadPerSecond = "0 rad/s"
    distribution: Literal["uniform", "gaussian", "grid"] = "uniform"
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _relaxation(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("t1 and t2 must be positive")
        if self.spread < 0:
            raise ValueError("spread must be >= 0")
        return self


class GateSection(_Section):
    pseudo_pure_epsilon: float = Field(0.3, ge=0, le=1)


class LedgerSection(_Section):
    epsilon0: float = Field(0.0, ge=0, le=1)
    factor: float = Field(1e-6, gt=0, le=1)
    steps: int = Field(3, ge=0, le=64)


class CompensationSection(_Section):
    shifts: list[RadPerSecond] = Field(
        default=["0 rad/s", "10 rad/s", "20 rad/s", "40 rad/s", "80 rad/s"], min_length=2)
    window: Radian = "1 pi"

    @field_validator("window")
    @classmethod
    def _window(cls, w):
        if not 0 < w <= math.pi:
            raise ValueError("window must lie in (0, pi]")
        return w


class PurifySection(_Section):
    t_a: tuple[Second, Second, Second, Second] = ("2 ms", "3 ms", "2 ms", "3 ms")
    window: Radian = "1e-6 pi"
    select_stages: tuple[bool, bool, bool] = (False, True, True)
    refocus_axis: Literal["x", "y"] = "x"
    ledger: LedgerSection = Field(default_factory=LedgerSection)
    compensation: CompensationSection = Field(default_factory=CompensationSection)

    @field_validator("t_a")
    @classmethod
    def _timing(cls, t_a):
        if any(not (math.isfinite(t) and t >= 0) for t in t_a):
            raise ValueError("t_a intervals must be finite and >= 0")
        if not math.isclose(t_a[0], t_a[2], rel_tol=1e-12, abs_tol=0.0):
            raise ValueError(f"timing constraint t_a1 == t_a3 violated "
                             f"(t_a1={t_a[0]!r} s, t_a3={t_a[2]!r} s)")
        return t_a

    @field_validator("window")
    @classmethod
    def _window(cls, w):
        if not 0 < w <= math.pi:
            raise ValueError("window must lie in (0, pi]")
        return w


class BellSection(_Section):
    program: str = DEFAULT_PROGRAM


class T1HadSection(_Section):
    coincidence: float = Field(0.693, gt=0)
    delay: Second | None = None  # fixed interval instead of coincidence * T1
    oracle_steps: int = Field(0, ge=0, le=10_000_000)


class OutputSection(_Section):
    sample_dt: Second | None = None
    trajectory: bool = True


class Scenario(_Section):
    name: str = "scenario"
    magnet: MagnetSection | None = None
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    gate: GateSection = Field(default_factory=GateSection)
    purify: PurifySection = Field(default_factory=PurifySection)
    bell: BellSection = Field(default_factory=BellSection)
    t1had: T1HadSection = Field(default_factory=T1HadSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _sampling(self):
        dt = self.output.sample_dt
        if dt is not None and not dt > 0:
            raise ValueError("output.sample_dt must be > 0")
        return self


def scenario_json_schema():
    return Scenario.model_json_schema(mode="validation")


def _line_of(text, path):
    """1-based line of the node at ``path`` in a YAML/JSON document, if found."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line = None
    for part in path:
        if node is None:
            break
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(part):
                    line = k.start_mark.line + 1
                    nxt = v
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                break
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_scenario(data, text=None):
    """Validate a decoded scenario document; raise ``ConfigurationError``."""
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a mapping at the top level")
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        # drop union-branch tags such as 'LinearGradient' from the path
        path = [p for p in err["loc"] if isinstance(p, int) or not p[:1].isupper()]
        key = ".".join(str(p) for p in path) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        line = _line_of(text, path) if text is not None else None
        where = f"line {line}, " if line else ""
        raise ConfigurationError(f"{where}{key}: {msg}", key=key, line=line) from None


def load_scenario(path):
    """Read and validate a scenario file; returns ``(scenario, document)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc.strerror}",
                                 key="--scenario") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        line = getattr(exc, "lineno", None)
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ConfigurationError(f"cannot parse scenario {path.name}: {exc}",
                                 key="<file>", line=line) from None
    if data is None:
        data = {}
    return parse_scenario(data, text), data


def input_digest(document, seed):
    """SHA-256 over the canonical scenario document and the effective seed."""
    canon = json.dumps({"scenario": document, "seed": seed}, sort_keys=True,
                       separators=(",", ":"), default=str)
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()
