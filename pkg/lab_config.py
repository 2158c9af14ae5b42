#!/usr/bin/env python3
"""
Run configuration for the lab.

A run is described by one human-editable INI file (`key = value`, optional
`[run]` section). Values are layered: registry defaults < config file <
command-line flags < `--set KEY=VALUE` overrides, and validated by the
pydantic RunConfig before anything is computed.

Machine settings come from the environment (a local .env is honored):
  CALABI_LAB_THREADS  worker threads for batch sweeps (default 1)
  CALABI_LAB_DB       sqlite run registry path (default <out parent>/lab_runs.db)
"""

import configparser
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from lab_errors import UsageError

RESOLUTION_RANGE = {"torus": (8, 1024), "p1": (16, 65536)}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: str
    backend: Literal["torus", "p1"] = "torus"
    resolution: int = 64
    p: float = 2.0
    q: float = 1.0
    p_prime: float = 1.0
    eps_schedule: List[float] = Field(default_factory=list)
    truncation: int = 64
    dt: float = 0.01
    T: float = 8.0
    trials: int = 20
    seed: int = 0
    out: Path = Path("runs")
    extra: Dict[str, str] = Field(default_factory=dict)

    @field_validator("eps_schedule", mode="before")
    @classmethod
    def _split_schedule(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [float(item) for item in value.replace(";", ",").split(",") if item.strip()]
        return value

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        if not (self.q >= 1 and self.p >= self.q) or math.isinf(self.q):
            raise ValueError(f"exponents must satisfy 1 <= q <= p, got p={self.p}, q={self.q}")
        if not self.p_prime >= 1:
            raise ValueError(f"p_prime must be >= 1, got {self.p_prime}")
        low, high = RESOLUTION_RANGE[self.backend]
        if not low <= self.resolution <= high:
            raise ValueError(f"{self.backend} resolution must lie in [{low}, {high}], got {self.resolution}")
        if self.backend == "torus" and self.resolution % 2:
            raise ValueError(f"torus resolution must be even, got {self.resolution}")
        if any(not eps > 0 for eps in self.eps_schedule):
            raise ValueError("eps_schedule entries must be positive")
        if self.truncation < 1 or self.trials < 1:
            raise ValueError("truncation and trials must be >= 1")
        if not self.dt > 0 or not self.T > 0:
            raise ValueError("dt and T must be positive")
        _check_writable(self.out)
        return self

    def get(self, key: str, default: Any) -> Any:
        """Experiment-specific override from `extra`, cast to the type of default."""
        if key not in self.extra:
            return default
        raw = self.extra[key]
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, (list, tuple)):
            cast = type(default[0]) if default else float
            return [cast(item) for item in raw.replace(";", ",").split(",") if item.strip()]
        return type(default)(raw)


def _check_writable(out: Path) -> None:
    target = Path(out).resolve()
    if target.exists() and not target.is_dir():
        raise ValueError(f"output path {out} exists and is not a directory")
    while not target.exists():
        target = target.parent
    if not os.access(target, os.W_OK):
        raise ValueError(f"output directory {out} is not writable")


def read_config_file(path: Path) -> Tuple[str, Dict[str, str]]:
    """Raw text and key/value pairs of an INI run file ([run] section optional)."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    body = text if text.lstrip().startswith("[") else "[run]\n" + text
    try:
        parser.read_string(body)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from exc
    values: Dict[str, str] = {}
    for section in parser.sections():
        values.update(parser[section])
    return text, values


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    out = {}
    for pair in pairs or []:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--set expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def build_run_config(layers: List[Mapping[str, Any]]) -> RunConfig:
    """Merge layers in order (later wins); unknown keys go to `extra`."""
    known = set(RunConfig.model_fields) - {"extra"}
    merged: Dict[str, Any] = {}
    extra: Dict[str, str] = {}
    for layer in layers:
        for key, value in layer.items():
            if value is None:
                continue
            if key == "extra":
                extra.update({k: str(v) for k, v in value.items()})
            elif key in known:
                merged[key] = value
            else:
                extra[key] = str(value)
    try:
        return RunConfig(**merged, extra=extra)
    except ValidationError as exc:
        raise UsageError(_first_error(exc)) from exc


def _first_error(exc: ValidationError) -> str:
    err = exc.errors()[0]
    where = ".".join(str(part) for part in err.get("loc", ())) or "config"
    return f"invalid run configuration ({where}): {err.get('msg')}"


@dataclass
class LabSettings:
    threads: int
    db_path: Optional[Path]


def load_settings() -> LabSettings:
    load_dotenv()
    threads = int(os.getenv("CALABI_LAB_THREADS", "1") or 1)
    db = os.getenv("CALABI_LAB_DB")
    return LabSettings(threads=max(1, threads), db_path=Path(db) if db else None)
