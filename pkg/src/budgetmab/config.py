"""Experiment-file schema.

An experiment file is YAML (JSON is valid YAML too)::

    schema_version: 1
    output_dir: results            # optional, default "results"
    workers: 1                     # optional
    datasets:                      # only needed for FB-* settings
      facebook:
        path: data/KAG_conversion_data.csv
        delimiter: ","
        group_by: [gender, age]
        columns: {clicks: Clicks, spend: Spent, conversions: Approved_Conversion}
    runs:
      - setting: S-Br-10           # S-Br | S-GBr | S-Bt, optionally suffixed with K
        arms: 10                   # required when the setting carries no K
        budget_multiplier: 150000
        repetitions: 100
        checkpoints: 50
        master_seed: 0
        policies:
          - {kind: omega_ucb, rho: 0.25}
          - {kind: m_ucb}          # alpha defaults to the recommended value
      - setting: FB-Bt
        dataset: facebook
        policies: [{kind: omega_star_ucb, rho: 0.25}]

Unknown keys anywhere are rejected.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .environments import parse_setting_id
from .policies import POLICY_KINDS, PolicyConfig
from .simulator import DatasetSpec, RunConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid experiment file or flag combination."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class PolicyModel(_Strict):
    kind: Literal[POLICY_KINDS]  # type: ignore[valid-type]
    rho: Optional[float] = Field(None, gt=0)
    alpha: Optional[float] = Field(None, gt=0)
    lam: Optional[float] = Field(None, gt=0, alias="lambda")
    eta_min_samples: Optional[int] = Field(None, ge=1)
    fixed_arm_index: Optional[int] = Field(None, ge=0)

    def to_config(self) -> PolicyConfig:
        kwargs = {k: v for k, v in self.model_dump().items() if v is not None}
        return PolicyConfig(**kwargs)


class DatasetModel(_Strict):
    path: str
    delimiter: str = ","
    group_by: List[str] = ["gender", "age"]
    columns: Optional[Dict[str, str]] = None


class RunModel(_Strict):
    setting: str
    arms: Optional[int] = Field(None, ge=2)
    policies: List[PolicyModel] = Field(min_length=1)
    budget_multiplier: float = Field(1.5e5, gt=0)
    repetitions: int = Field(100, ge=1)
    checkpoints: int = Field(50, ge=1)
    master_seed: int = Field(0, ge=0)
    dataset: Optional[str] = None

    @model_validator(mode="after")
    def _check_setting(self):
        try:
            family, k = parse_setting_id(self.setting)
        except ValueError as exc:
            raise ValueError(f"setting: {exc}") from None
        if family.startswith("FB"):
            if self.dataset is None:
                raise ValueError(f"setting {self.setting} requires 'dataset'")
        elif k is None and self.arms is None:
            raise ValueError(f"setting {self.setting} requires 'arms'")
        return self


class ExperimentModel(_Strict):
    schema_version: Literal[1]
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    datasets: Dict[str, DatasetModel] = {}
    runs: List[RunModel] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_datasets(self):
        for i, run in enumerate(self.runs):
            if run.dataset is not None and run.dataset not in self.datasets:
                raise ValueError(f"runs.{i}.dataset: unknown dataset {run.dataset!r}")
        return self


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_experiment(data) -> ExperimentModel:
    try:
        return ExperimentModel.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None


def load_experiment(path) -> ExperimentModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_experiment(data)


def build_run_configs(exp: ExperimentModel, base_dir=None, overrides: Optional[dict] = None,
                      policies: Optional[list] = None) -> List[RunConfig]:
    """Translate validated runs into :class:`RunConfig` objects.

    ``overrides`` keys (``master_seed``, ``repetitions``, ``budget_multiplier``,
    ``checkpoints``) replace the per-run values; ``policies`` replaces every
    run's policy list.  Relative dataset paths resolve against ``base_dir``.
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    configs = []
    for i, run in enumerate(exp.runs):
        dataset = None
        if run.dataset is not None:
            ds = exp.datasets[run.dataset]
            path = Path(ds.path)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            dataset = DatasetSpec(str(path), ds.columns, tuple(ds.group_by), ds.delimiter)
        try:
            pcs = policies if policies is not None else [p.to_config() for p in run.policies]
            fields = dict(
                setting_id=run.setting,
                policies=tuple(pcs),
                n_arms=run.arms,
                budget_multiplier=run.budget_multiplier,
                repetitions=run.repetitions,
                checkpoints=run.checkpoints,
                master_seed=run.master_seed,
                dataset=dataset,
            )
            fields.update(overrides)
            configs.append(RunConfig(**fields))
        except ValueError as exc:
            raise ConfigError(f"runs.{i}: {exc}") from None
    labels = [c.label for c in configs]
    dupes = sorted({l for l in labels if labels.count(l) > 1})
    if dupes:
        raise ConfigError(f"runs: setting(s) {dupes} appear more than once")
    return configs
