"""Pipeline configuration: YAML file, then command-line overrides, then defaults.

Schema (all keys optional)::

    input: trials.csv
    schema: {participant_id: participant, condition: condition, trial_index: trial,
             q1: Q1, ..., act: ACT}
    delimiter: ","                    # sniffed from the header when omitted
    variables: [Q1, Q2, Q3, Q4, Q5, Q6, CIT, CT, ACT]
    exogenous: [Q1]
    sinks: [CIT, CT, ACT]
    sink_to_sink: false               # allow edges between sinks
    conditions: [non, early, sync, late]   # declared order; default first-seen
    exclude_conditions: []
    standardize: true
    regression: adaptive_lasso        # or ols
    ols_threshold: 0.01
    entropy: {k1: 79.047, k2: 7.4129, gamma: 0.37457}
    bootstrap: {count: 5000, prune_threshold: 0.30}
    seed: 0
    output_dir: results
    formats: [json, text, csv]
    plots: true
    describe: {aggregate: false}
    compare: {raw: false, family: factor}
    fit: {baseline: independence, gfi: ml, refit: true}
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .dataset import DEFAULT_SCHEMA
from .errors import ConfigError
from .lingam import EntropyConstants
from .synth import PAPER_EXOGENOUS, PAPER_SINKS, PAPER_VARIABLES

FORMATS = ("json", "text", "csv")


@dataclass
class PipelineConfig:
    input: str | None = None
    schema: dict = field(default_factory=lambda: dict(DEFAULT_SCHEMA))
    delimiter: str | None = None
    variables: list = field(default_factory=lambda: list(PAPER_VARIABLES))
    exogenous: list = field(default_factory=lambda: list(PAPER_EXOGENOUS))
    sinks: list = field(default_factory=lambda: list(PAPER_SINKS))
    sink_to_sink: bool = False
    conditions: list | None = None
    exclude_conditions: list = field(default_factory=list)
    standardize: bool = True
    regression: str = "adaptive_lasso"
    ols_threshold: float = 0.01
    entropy: dict = field(default_factory=lambda: asdict(EntropyConstants()))
    bootstrap_count: int = 5000
    prune_threshold: float = 0.30
    seed: int = 0
    output_dir: str = "results"
    formats: list = field(default_factory=lambda: list(FORMATS))
    plots: bool = True
    aggregate: bool = False
    compare_raw: bool = False
    compare_family: str = "factor"
    fit_baseline: str = "independence"
    fit_gfi: str = "ml"
    fit_refit: bool = True

    def validate(self) -> "PipelineConfig":
        if not self.variables or len(set(self.variables)) != len(self.variables):
            raise ConfigError(f"variables must be a non-empty list of unique labels: {self.variables}")
        for group, labels in (("exogenous", self.exogenous), ("sinks", self.sinks)):
            unknown = [v for v in labels if v not in self.variables]
            if unknown:
                raise ConfigError(f"{group} labels not among variables: {unknown}")
        overlap = set(self.exogenous) & set(self.sinks)
        if overlap:
            raise ConfigError(f"labels both exogenous and sink: {sorted(overlap)}")
        if not 0.0 <= float(self.prune_threshold) <= 1.0:
            raise ConfigError(f"prune_threshold must lie in [0, 1], got {self.prune_threshold}")
        if int(self.bootstrap_count) < 1:
            raise ConfigError(f"bootstrap count must be >= 1, got {self.bootstrap_count}")
        if self.regression not in ("adaptive_lasso", "ols"):
            raise ConfigError(f"regression must be adaptive_lasso or ols, got {self.regression!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown report formats {bad}")
        if self.compare_family not in ("factor", "global"):
            raise ConfigError(f"compare.family must be factor or global, got {self.compare_family!r}")
        if self.fit_baseline not in ("independence", "model"):
            raise ConfigError(f"fit.baseline must be independence or model, got {self.fit_baseline!r}")
        if self.fit_gfi not in ("ml", "baseline"):
            raise ConfigError(f"fit.gfi must be ml or baseline, got {self.fit_gfi!r}")
        try:
            EntropyConstants(**self.entropy)
        except TypeError as exc:
            raise ConfigError(f"bad entropy constants: {exc}") from None
        return self

    @property
    def constants(self) -> EntropyConstants:
        return EntropyConstants(**self.entropy)

    def run_key(self) -> str:
        """Hash of everything that determines artifact contents, including the input bytes."""
        digest = None
        if self.input and Path(self.input).is_file():
            digest = hashlib.sha256(Path(self.input).read_bytes()).hexdigest()
        relevant = asdict(self)
        for k in ("input", "output_dir", "formats", "plots"):
            relevant.pop(k)
        relevant["input_sha256"] = digest
        blob = json.dumps(relevant, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def run_dir(self) -> Path:
        return Path(self.output_dir) / f"run-{self.run_key()}"


_NESTED = {
    "bootstrap": {"count": "bootstrap_count", "prune_threshold": "prune_threshold"},
    "describe": {"aggregate": "aggregate"},
    "compare": {"raw": "compare_raw", "family": "compare_family"},
    "fit": {"baseline": "fit_baseline", "gfi": "fit_gfi", "refit": "fit_refit"},
}


def from_mapping(data: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    flat = {}
    known = {f.name for f in fields(PipelineConfig)}
    for key, value in (data or {}).items():
        if key in _NESTED:
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be a mapping")
            for sub, v in value.items():
                if sub not in _NESTED[key]:
                    raise ConfigError(f"unknown key {key}.{sub}")
                flat[_NESTED[key][sub]] = v
        elif key == "schema":
            merged = dict(DEFAULT_SCHEMA)
            merged.update(value or {})
            flat["schema"] = merged
        elif key == "entropy":
            merged = dict(cfg.entropy)
            merged.update(value or {})
            flat["entropy"] = merged
        elif key in known:
            flat[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return replace(cfg, **flat)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = from_mapping(data)
    if cfg.input and not Path(cfg.input).is_absolute():
        cfg = replace(cfg, input=str(path.parent / cfg.input))
    return cfg
