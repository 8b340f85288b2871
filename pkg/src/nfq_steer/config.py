"""Run configuration: a JSON document with one section per component.

Precedence, lowest first: built-in defaults, profile preset, config file,
``--set section.key=value`` overrides.  Unknown sections or keys are
rejected.

Schema (all keys optional)::

    {
      "env": "physics" | "replay",
      "profile": "sim" | "hardware",
      "seed": 0,
      "out": "out",
      "replay_dataset": null,
      "nfq":     {NfqConfig fields, "rprop": {RpropParams fields}},
      "motor":   {MotorModel fields},
      "regions": {RegionSpec fields},
      "costs":   {CostParams fields},
      "init":    {InitSpec fields},
      "replay":  {"match_action": true, "weights": null}
    }
"""
from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .env import CostParams, RegionSpec
from .errors import ConfigurationError, ParseError
from .net import RpropParams
from .nfq import NfqConfig
from .physics import InitSpec, MotorModel

ENVIRONMENTS = ("physics", "replay")

# (episodes, reset_period, epochs)
PROFILES = {
    "sim": {"episodes": 300, "reset_period": 100, "epochs": 300},
    "hardware": {"episodes": 150, "reset_period": 50, "epochs": 100},
}

_SECTIONS = {"nfq": NfqConfig, "motor": MotorModel, "regions": RegionSpec,
             "costs": CostParams, "init": InitSpec}
_TOP_LEVEL = {"env", "profile", "seed", "out", "replay_dataset", "replay"}
_REPLAY_KEYS = {"match_action", "weights"}


@dataclass(frozen=True)
class ReplayOptions:
    match_action: bool = True
    weights: Optional[tuple] = None


@dataclass(frozen=True)
class RunConfig:
    env: str = "physics"
    profile: str = "sim"
    nfq: NfqConfig = field(default_factory=NfqConfig)
    motor: MotorModel = field(default_factory=MotorModel)
    regions: RegionSpec = field(default_factory=RegionSpec)
    costs: CostParams = field(default_factory=CostParams)
    init: InitSpec = field(default_factory=InitSpec)
    replay: ReplayOptions = field(default_factory=ReplayOptions)
    replay_dataset: Optional[str] = None
    out: str = "out"

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ConfigurationError(f"env must be one of {ENVIRONMENTS}, got {self.env!r}")
        if self.profile not in PROFILES:
            raise ConfigurationError(f"profile must be one of {tuple(PROFILES)}, got {self.profile!r}")
        if self.init.position_range >= self.regions.forbidden_position:
            raise ConfigurationError("initial position range must lie inside the forbidden bound")

    @property
    def seed(self) -> int:
        return self.nfq.seed

    def require_dataset(self) -> Path:
        if not self.replay_dataset:
            raise ConfigurationError("the replay environment needs replay_dataset")
        return Path(self.replay_dataset)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seed"] = d["nfq"].pop("seed")
        d["nfq"]["sizes"] = list(d["nfq"]["sizes"])
        return d


def _deep_merge(base: dict, extra: dict, where="") -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def parse_override(item: str) -> tuple[list[str], Any]:
    """``a.b=value`` -> (["a", "b"], value); the value is JSON if it parses."""
    if "=" not in item:
        raise ConfigurationError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    keys = [k for k in key.strip().split(".") if k]
    if not keys:
        raise ConfigurationError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def _apply_override(doc: dict, keys: list[str], value):
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {'.'.join(keys)}: {k} is not a section")
    node[keys[-1]] = value


def _check_keys(doc: dict):
    for k, v in doc.items():
        if k in _SECTIONS:
            if not isinstance(v, dict):
                raise ConfigurationError(f"section {k!r} must be an object")
            allowed = {f.name for f in dataclasses.fields(_SECTIONS[k])}
            if k == "nfq":
                allowed.discard("seed")
            unknown = set(v) - allowed
            if k == "nfq" and isinstance(v.get("rprop"), dict):
                bad = set(v["rprop"]) - {f.name for f in dataclasses.fields(RpropParams)}
                unknown |= {f"rprop.{b}" for b in bad}
            if unknown:
                raise ConfigurationError(f"unknown key(s) in {k!r}: {sorted(unknown)}")
        elif k == "replay":
            if not isinstance(v, dict) or set(v) - _REPLAY_KEYS:
                raise ConfigurationError(f"'replay' accepts only {sorted(_REPLAY_KEYS)}")
        elif k not in _TOP_LEVEL:
            raise ConfigurationError(f"unknown config key {k!r}")


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ParseError("config document must be a JSON object", path)
    return doc


def build_config(file_doc: dict | None = None, *, profile: str | None = None,
                 env: str | None = None, seed: int | None = None, out: str | None = None,
                 overrides: Iterable[str] = ()) -> RunConfig:
    doc = copy.deepcopy(file_doc or {})
    for item in overrides:
        _apply_override(doc, *parse_override(item))
    for key, value in (("profile", profile), ("env", env), ("seed", seed), ("out", out)):
        if value is not None:
            doc[key] = value
    _check_keys(doc)
    prof = doc.get("profile", "sim")
    if prof not in PROFILES:
        raise ConfigurationError(f"profile must be one of {tuple(PROFILES)}, got {prof!r}")
    nfq_doc = _deep_merge(PROFILES[prof], doc.get("nfq", {}))
    nfq_doc["seed"] = int(doc.get("seed", 0))
    try:
        if isinstance(nfq_doc.get("rprop"), dict):
            nfq_doc["rprop"] = RpropParams(**nfq_doc["rprop"])
        if "sizes" in nfq_doc:
            nfq_doc["sizes"] = tuple(nfq_doc["sizes"])
        replay = dict(doc.get("replay", {}))
        if replay.get("weights") is not None:
            replay["weights"] = tuple(float(w) for w in replay["weights"])
        return RunConfig(
            env=doc.get("env", "physics"), profile=prof,
            nfq=NfqConfig(**nfq_doc),
            motor=MotorModel(**doc.get("motor", {})),
            regions=RegionSpec(**doc.get("regions", {})),
            costs=CostParams(**doc.get("costs", {})),
            init=InitSpec(**doc.get("init", {})),
            replay=ReplayOptions(**replay),
            replay_dataset=doc.get("replay_dataset"),
            out=str(doc.get("out", "out")))
    except TypeError as exc:
        raise ConfigurationError(f"invalid configuration value: {exc}") from exc


def load_config(path=None, **kwargs) -> RunConfig:
    return build_config(read_config_file(path) if path else None, **kwargs)
