"""Experiment configuration: a YAML document validated by pydantic, unknown keys rejected."""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import ConfigInvalid

KINDS = ("formbound", "mollify", "solve", "simulate")
_VERIFY = re.compile(r"^verify-[a-z0-9-]+$")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FieldSpec(_Strict):
    id: str = "zero"
    params: dict[str, Any] = Field(default_factory=dict)


class MollifySpec(_Strict):
    m: Optional[int] = None
    levels: list[int] = Field(default_factory=lambda: [4, 8, 16])
    gamma0: float = 0.5
    estimate: bool = False


class GridSpec(_Strict):
    half_width: float = 4.0
    intervals: int = 96
    steps: int = 200
    T: float = 0.5
    safety: float = 4.0
    save_every: int = 10


class SimSpec(_Strict):
    h_t: float = 0.005
    T: float = 1.0
    N: int = 10_000
    substep: int = 1
    record_every: int = 1
    workers: int = 1
    x: list[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])


class WeightSpec(_Strict):
    kappa: float = 1.0
    theta: float = 4.0


class InitialSpec(_Strict):
    kind: Literal["gaussian", "one"] = "gaussian"
    var: float = 0.25
    center: Optional[list[float]] = None


class FormboundSpec(_Strict):
    family: Literal["origin", "random", "shell"] = "origin"
    budget: int = 32


class ExperimentConfig(_Strict):
    kind: str
    field: FieldSpec = Field(default_factory=FieldSpec)
    mollify: MollifySpec = Field(default_factory=MollifySpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    sim: SimSpec = Field(default_factory=SimSpec)
    weight: WeightSpec = Field(default_factory=WeightSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    formbound: FormboundSpec = Field(default_factory=FormboundSpec)
    energy_q: Optional[float] = None
    seed: int = 0
    output: Optional[str] = None
    plots: bool = False

    @field_validator("kind")
    @classmethod
    def _kind(cls, v: str) -> str:
        if v not in KINDS and not _VERIFY.match(v):
            raise ValueError(f"kind must be one of {', '.join(KINDS)} or verify-<name>")
        return v

    def materialized(self) -> dict:
        """Every field, defaults included, in JSON-compatible form."""
        return self.model_dump(mode="json")

    def canonical_json(self) -> str:
        return json.dumps(self.materialized(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _line_of(node: yaml.Node | None, loc: tuple) -> int | None:
    """1-based source line of the deepest mapping key along ``loc``."""
    line = None
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    line, nxt = k.start_mark.line + 1, v
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse YAML text; errors carry ``source:line`` and the dotted field path."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigInvalid(f"malformed YAML: {getattr(exc, 'problem', exc)}", where) from None
    if not isinstance(data, dict):
        raise ConfigInvalid("top level must be a mapping", f"{source}:1")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        line = _line_of(node, loc)
        path = ".".join(str(p) for p in loc) or "<root>"
        where = f"{source}:{line} field {path}" if line else f"{source} field {path}"
        raise ConfigInvalid(err["msg"], where) from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config: {exc.strerror}", str(p)) from None
    return parse_config(text, str(p))


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.materialized(), sort_keys=True)


def template(kind: str) -> ExperimentConfig:
    """Default config of a given kind."""
    return ExperimentConfig(kind=kind)
