import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Optional, Tuple

from riq.errors import ConfigError

MERSENNE_61 = (1 << 61) - 1
DEFAULT_EPSILON = 0.05
DEFAULT_QUAD_CAP = 1 << 20
DEFAULT_FILTER_SEEDS = (0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F)

MATCH_MODES = ("homomorphic", "isomorphic")
OUTPUT_FORMATS = ("tsv", "json")

# Environment variable -> (config field, parser)
ENV_OVERRIDES = {
    "RIQ_SEED": ("seed", int),
    "RIQ_WORKERS": ("workers", int),
    "RIQ_EPSILON": ("epsilon", float),
}


# ------------------------
# Config Object
# ------------------------
@dataclass(frozen=True)
class RiqConfig:
    """Every tunable of index construction and query answering."""

    epsilon: float = DEFAULT_EPSILON
    lsh_k: int = 5
    lsh_l: int = 3
    lsh_m: int = MERSENNE_61
    lsh_u: int = MERSENNE_61
    seed: int = 0
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)
    strict_parse: bool = False
    default_graph: Optional[str] = None
    keep_pvs: bool = False
    quad_cap: int = DEFAULT_QUAD_CAP
    match_mode: str = "homomorphic"
    output_format: str = "tsv"
    filter_seeds: Tuple[int, int] = DEFAULT_FILTER_SEEDS

    def validate(self) -> "RiqConfig":
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.lsh_k < 1 or self.lsh_l < 1:
            raise ConfigError(f"LSH needs k >= 1 and l >= 1, got k={self.lsh_k} l={self.lsh_l}")
        if self.lsh_m < 2:
            raise ConfigError(f"LSH signature range m must be >= 2, got {self.lsh_m}")
        if self.lsh_u <= 1 << 40:
            raise ConfigError(f"LSH modulus u must exceed 2^40, got {self.lsh_u}")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.quad_cap < 1:
            raise ConfigError(f"quad cap must be >= 1, got {self.quad_cap}")
        if self.match_mode not in MATCH_MODES:
            raise ConfigError(f"unknown match mode {self.match_mode!r}")
        if self.output_format not in OUTPUT_FORMATS:
            raise ConfigError(f"unknown output format {self.output_format!r}")
        return self


# ------------------------
# Config Loader
# ------------------------
def _env_values(environ: Dict[str, str]) -> Dict:
    values = {}
    for name, (attr, parse) in ENV_OVERRIDES.items():
        raw = environ.get(name)
        if raw is None or raw == "":
            continue
        try:
            values[attr] = parse(raw)
        except ValueError:
            raise ConfigError(f"{name}={raw!r} is not a valid {parse.__name__}")
    return values


def get_config(environ: Optional[Dict[str, str]] = None, **overrides) -> RiqConfig:
    """Layer defaults, environment and explicit overrides, then validate.

    Overrides set to None are ignored so argparse namespaces can be passed
    through without filtering unset flags.
    """
    known = {f.name for f in fields(RiqConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

    config = replace(RiqConfig(), **_env_values(os.environ if environ is None else environ))
    explicit = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **explicit).validate()
