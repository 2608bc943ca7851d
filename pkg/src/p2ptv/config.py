"""Experiment configuration with dotted-key file loading.

Config files are TOML restricted to dotted keys, e.g.::

    experiment.trials = 200
    pricing.micro_step = 0.01
    settlement.incentive_rate = 0.1

Money-valued pricing and incentive knobs are fractions of the trial's mean
initial content price; link-cost knobs are absolute. The defaults are the
calibrated values the acceptance suite is pinned to.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


def _key(name: str, default, help: str = ""):
    return field(default=default, metadata={"key": name, "help": help})


@dataclass(frozen=True)
class ExperimentConfig:
    num_users: int = _key("experiment.num_users", 60)
    num_programs: int = _key("experiment.num_programs", 15)
    rounds: int = _key("experiment.rounds", 5)
    trials: int = _key("experiment.trials", 500)
    base_seed: int = _key("experiment.base_seed", 0)
    wtp_mode: str = _key("experiment.wtp_mode", "staircase", "staircase | random")
    workers: int = _key("experiment.workers", 1)

    density: float = _key("topology.density", 2.0)
    region_size: float = _key("topology.region_size", 100.0)
    link_fixed_cost: float = _key("topology.fixed_cost", 1.36)
    link_rate: float = _key("topology.per_distance_rate", 0.007)
    links_only: bool = _key("topology.links_only", False, "peers must share a link to serve")
    unicast_multiplier: float = _key("topology.unicast_multiplier", 3.2)

    d_max_low: float = _key("demand.d_max_low", 0.078, "min max-demand as a fraction of users")
    d_max_high: float = _key("demand.d_max_high", 0.403, "max max-demand as a fraction of users")
    reference_price: float = _key("demand.reference_price", 0.0)

    micro_step: float = _key("pricing.micro_step", 0.02)
    macro_step: float = _key("pricing.macro_step", 0.068)
    price_floor: float = _key("pricing.price_floor", 0.0)
    relative_gap: bool = _key("pricing.relative_gap", False, "scale macro steps by the relative demand gap")
    micro_scope: str = _key("pricing.micro_scope", "changed", "changed | all")

    margin: float = _key("settlement.margin", 0.018, "provider share of network charges")
    incentive_rate: float = _key("settlement.incentive_rate", 0.057)
    server_cost: float = _key("settlement.server_cost", 0.0)
    peer_serving: bool = _key("settlement.peer_serving", True, "false disables peers in both arms")

    def __post_init__(self):
        for name in ("num_users", "num_programs", "rounds", "trials", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.wtp_mode not in ("staircase", "random"):
            raise ValueError(f"wtp_mode must be 'staircase' or 'random', not {self.wtp_mode!r}")
        if self.micro_scope not in ("changed", "all"):
            raise ValueError(f"micro_scope must be 'changed' or 'all', not {self.micro_scope!r}")
        if self.unicast_multiplier < 1:
            raise ValueError("unicast_multiplier must be >= 1")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dotted(self) -> dict:
        return {f.metadata["key"]: getattr(self, f.name) for f in dataclasses.fields(self)}


KEY_TO_FIELD = {f.metadata["key"]: f for f in dataclasses.fields(ExperimentConfig)}


def _flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def coerce(key: str, value):
    """Convert a raw file or CLI value to the field's declared type."""
    try:
        f = KEY_TO_FIELD[key]
    except KeyError:
        raise KeyError(f"unknown config key {key!r}") from None
    kind = type(f.default)
    if kind is bool:
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"{key}: expected a boolean, got {value!r}")
            return lowered in ("true", "1", "yes")
        return bool(value)
    if kind is int and isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{key}: expected an integer, got {value!r}")
    return kind(value)


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (dotted keys) on top."""
    values = {}
    if path is not None:
        with open(Path(path), "rb") as fh:
            values.update(_flatten(tomllib.load(fh)))
    values.update(overrides or {})
    kwargs = {KEY_TO_FIELD[k].name if k in KEY_TO_FIELD else k: coerce(k, v) for k, v in values.items()}
    return ExperimentConfig(**kwargs)
