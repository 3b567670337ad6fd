"""Run configuration: the flat key = value config format and defaults.

Every run of the harness is a pure function of one RunConfig. The same
keys appear in config files, as CLI flags, and as the config echo
columns of metrics.csv.
"""

from dataclasses import asdict, dataclass, fields, replace

from .numeric import ContractError


@dataclass
class RunConfig:
    t1: int = 150
    t2: int = 50
    lr: float = 0.05
    lr_phase2_mult: float = 0.1
    alpha: float = 0.001
    beta: float = 1.0
    gamma: float = 1.0
    steps: int = 1
    scheme: str = "add"
    pseudo_threshold: float = 0.9
    seed: int = 0
    h: int = 16
    w: int = 16
    k: int = 4
    channels: int = 8
    n_scenes: int = 64
    feature_shift: float = 0.0
    feature_scale: float = 1.0
    noise_sd: float = 0.0
    depth_noise_sd: float = 0.0
    out_dir: str = "runs"

    def __post_init__(self):
        if self.t1 < 0 or self.t2 < 0:
            raise ContractError("t1 and t2 must be >= 0")
        if not self.lr > 0:
            raise ContractError(f"lr must be positive, got {self.lr}")
        if not self.lr_phase2_mult > 0:
            raise ContractError("lr_phase2_mult must be positive")
        if not self.alpha > 0:
            raise ContractError(f"alpha must be positive, got {self.alpha}")
        if self.beta < 0:
            raise ContractError(f"beta must be >= 0, got {self.beta}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.steps < 0:
            raise ContractError(f"steps must be >= 0, got {self.steps}")
        if self.scheme not in ("add", "gated"):
            raise ContractError(f"scheme must be add or gated, got {self.scheme!r}")
        if not 0.0 <= self.pseudo_threshold <= 1.0:
            raise ContractError("pseudo_threshold must be in [0, 1]")
        if self.h < 1 or self.w < 1 or self.k < 2 or self.channels < 1:
            raise ContractError("need h, w >= 1, k >= 2, channels >= 1")
        if self.n_scenes < 1:
            raise ContractError("n_scenes must be >= 1")
        if self.feature_scale <= 0:
            raise ContractError("feature_scale must be positive")
        if self.noise_sd < 0 or self.depth_noise_sd < 0:
            raise ContractError("noise levels must be >= 0")


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, text: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind is int or kind == "int":
            return int(text)
        if kind is float or kind == "float":
            return float(text)
        return text
    except ValueError:
        raise ContractError(f"bad value for {key}: {text!r}") from None


def parse_config_text(text: str, base: RunConfig = None) -> RunConfig:
    """Apply flat `key = value` lines on top of a base config.

    Blank lines and lines starting with # are skipped; unknown keys are
    rejected so typos fail loudly.
    """
    updates = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise ContractError(f"line {lineno}: expected key = value, got {body!r}")
        key, _, value = body.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ContractError(f"line {lineno}: unknown config key {key!r}")
        updates[key] = _coerce(key, value.strip())
    if base is None:
        return RunConfig(**updates)
    return replace(base, **updates)


def load_config(path: str, base: RunConfig = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def config_echo(cfg: RunConfig) -> dict:
    """The config as an ordered dict, for CSV echo columns."""
    return asdict(cfg)
