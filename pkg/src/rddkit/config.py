"""Run configuration: nested dataclasses, JSON parsing with unknown-key
rejection, and serialization that echoes every defaulted field so an
archived config fully reproduces a run.
"""

import dataclasses
import json
from dataclasses import dataclass, field, fields, is_dataclass

from rddkit.exceptions import ConfigError


@dataclass
class ScheduleSection:
    T: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02
    kind: str = "linear"


@dataclass
class NetSection:
    embed_dim: int = 32
    hidden_dims: list = field(default_factory=lambda: [256, 256])
    activation: str = "tanh"


@dataclass
class PretrainSection:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0


@dataclass
class FinetuneSection:
    S: int = 50
    m: int = 256
    alpha: float = 1.0
    gamma: float = 1e-3
    kl_anchor: bool = True
    anchor_kappa: float = 0.01
    batch_size: int = 64
    seed: int = 1


@dataclass
class SvddSection:
    M: int = 5
    alpha: float = 0.2
    n_traj: int = 1000
    seed: int = 2


@dataclass
class RewardSection:
    kind: str = "synthetic"        # synthetic | hull | surrogate | airfoil
    alpha: float = 1.0
    target: list = None            # synthetic: target point; None = benchmark default
    loa: float = 80.0              # hull: overall length in metres
    scale: float = 1e-6            # hull: resistance-to-reward scale
    offset: float = 0.0            # hull: reward offset
    surrogate_path: str = None     # surrogate / airfoil: fitted tree file
    lambda_range: float = 10.0     # airfoil: out-of-range penalty weight
    lambda_intersect: float = 1.0  # airfoil: self-intersection penalty weight


@dataclass
class RunConfig:
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    net: NetSection = field(default_factory=NetSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    finetune: FinetuneSection = field(default_factory=FinetuneSection)
    svdd: SvddSection = field(default_factory=SvddSection)
    reward: RewardSection = field(default_factory=RewardSection)
    dataset: str = None
    outdir: str = "runs"


_REWARD_KINDS = ("synthetic", "hull", "surrogate", "airfoil")

_BOOL_FIELDS = {"kl_anchor"}


def _assign(section, key, value, path):
    cur = getattr(section, key)
    if key in _BOOL_FIELDS and not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if isinstance(cur, bool) and not isinstance(value, bool):
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if isinstance(cur, int) and not isinstance(cur, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if isinstance(cur, float) and not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if isinstance(cur, str) and not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    setattr(section, key, value)


def _merge(section, data, path=""):
    if not isinstance(data, dict):
        raise ConfigError(f"{path.rstrip('.') or 'config'}: expected an object")
    valid = {f.name for f in fields(section)}
    for key, value in data.items():
        here = f"{path}{key}"
        if key not in valid:
            raise ConfigError(f"{here}: unknown key")
        cur = getattr(section, key)
        if is_dataclass(cur):
            _merge(cur, value, path=f"{here}.")
        else:
            _assign(section, key, value, here)
    return section


def validate(cfg):
    """Cross-field checks, reported with the offending key path."""
    s = cfg.schedule
    if s.T < 1:
        raise ConfigError("schedule.T: must be >= 1")
    if not (0.0 < s.beta_start < 1.0) or not (0.0 < s.beta_end < 1.0):
        raise ConfigError("schedule.beta_start/beta_end: must lie in (0, 1)")
    if s.kind != "linear":
        raise ConfigError(f"schedule.kind: unknown schedule '{s.kind}'")
    if cfg.net.embed_dim <= 0 or cfg.net.embed_dim % 2:
        raise ConfigError("net.embed_dim: must be a positive even integer")
    if cfg.net.activation != "tanh":
        raise ConfigError(f"net.activation: unsupported activation '{cfg.net.activation}'")
    if any(h < 1 for h in cfg.net.hidden_dims):
        raise ConfigError("net.hidden_dims: layer widths must be >= 1")
    if cfg.pretrain.epochs < 0:
        raise ConfigError("pretrain.epochs: must be >= 0")
    if cfg.pretrain.batch_size < 1:
        raise ConfigError("pretrain.batch_size: must be >= 1")
    if cfg.pretrain.learning_rate <= 0:
        raise ConfigError("pretrain.learning_rate: must be > 0")
    f = cfg.finetune
    if f.S < 0:
        raise ConfigError("finetune.S: must be >= 0")
    if f.m < 2:
        raise ConfigError("finetune.m: must be >= 2")
    if f.alpha <= 0:
        raise ConfigError("finetune.alpha: must be > 0")
    if f.gamma <= 0:
        raise ConfigError("finetune.gamma: must be > 0")
    if f.batch_size < 1:
        raise ConfigError("finetune.batch_size: must be >= 1")
    v = cfg.svdd
    if v.M < 1:
        raise ConfigError("svdd.M: must be >= 1")
    if v.alpha < 0:
        raise ConfigError("svdd.alpha: must be >= 0")
    if v.n_traj < 1:
        raise ConfigError("svdd.n_traj: must be >= 1")
    r = cfg.reward
    if r.kind not in _REWARD_KINDS:
        raise ConfigError(f"reward.kind: must be one of {_REWARD_KINDS}, got '{r.kind}'")
    if r.alpha <= 0:
        raise ConfigError("reward.alpha: must be > 0")
    if r.target is not None:
        if not isinstance(r.target, (list, tuple)) or not r.target:
            raise ConfigError("reward.target: expected a non-empty list of numbers")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in r.target):
            raise ConfigError("reward.target: expected a non-empty list of numbers")
    if r.kind == "hull" and r.loa <= 0:
        raise ConfigError("reward.loa: must be > 0")
    if r.kind in ("surrogate", "airfoil") and not r.surrogate_path:
        raise ConfigError("reward.surrogate_path: required for surrogate rewards")
    return cfg


def parse_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})")
    cfg = _merge(RunConfig(), raw)
    return validate(cfg)


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def save_config(cfg, path):
    """Archive the fully resolved config, defaults included."""
    with open(path, "w") as fh:
        json.dump(to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
