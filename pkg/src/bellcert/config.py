"""Schema for run configuration files (YAML or JSON).

Only types and structure are checked here; numerical domains such as
``alpha <= 1/2`` are enforced by the library so that they surface as domain
errors rather than configuration errors.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bellcert.exceptions import ConfigError

__all__ = ["CoverageSection", "RunConfigFile", "SourceSection", "SweepSection", "load_config"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SweepSection(_Strict):
    t_s_grid: list[float] = Field(default_factory=list)
    t_e: Optional[float] = None
    alphas: Optional[list[float]] = None


class SourceSection(_Strict):
    strategy: str = "iid"
    params: dict[str, Any] = Field(default_factory=dict)
    n: int = 1000
    settings_tau: float = 0.0
    settings_mode: Literal["constant", "alternating", "random"] = "constant"
    herald_range: Optional[tuple[float, float]] = None


class CoverageSection(SourceSection):
    runs: int = 10000
    alphas: list[float] = Field(default_factory=lambda: [0.1, 0.05, 0.01])
    correct_bias: bool = True


class RunConfigFile(_Strict):
    alpha: float = 0.01
    tau: float = 0.0
    convention: Union[int, dict[str, int]] = 0
    window: Optional[tuple[float, float]] = None
    input: Optional[str] = None
    format: Optional[Literal["csv", "jsonl"]] = None
    out: Optional[str] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    sweep: SweepSection = Field(default_factory=SweepSection)
    simulate: SourceSection = Field(default_factory=SourceSection)
    coverage: CoverageSection = Field(default_factory=CoverageSection)

    def echo(self) -> dict[str, Any]:
        # The output path is left out so that identical runs written to
        # different places produce identical documents.
        return self.model_dump(mode="json", exclude={"out"})


def _validate(doc: Any, source: str) -> RunConfigFile:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return RunConfigFile.model_validate(doc)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors())
        raise ConfigError(f"{source}: {problems}") from None


def load_config(path: str | Path | None) -> RunConfigFile:
    """Read and validate a config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfigFile()
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON ({exc})") from None
    return _validate(doc, str(path))


def apply_overrides(config: RunConfigFile, overrides: dict[str, Any]) -> RunConfigFile:
    """Return a copy with dotted-key overrides applied and re-validated."""
    doc = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        target = doc
        *parents, leaf = key.split(".")
        for p in parents:
            target = target[p]
        target[leaf] = value
    return _validate(doc, "command line")
