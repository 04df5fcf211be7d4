# av_cokriging/config.py
# Run configuration: fit settings plus Monte Carlo and scenario parameters.
#
# A config file is a JSON document whose top-level keys are section names:
#   {
#     "seed": 7,
#     "fit": {"nugget": 1e-8, "n_starts": 10},
#     "monte_carlo": {"n_mc": 100000, "n_y": 64},
#     "lane_change": {"t_d": 0.5, "decel": 3.0},
#     "costs": [1, 10, 100]
#   }
from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from av_cokriging.errors import InvalidArgumentError

SEED_DEFAULT = 0
N_MC_DEFAULT = 100_000
N_MC_IG_DEFAULT = 4_000
N_Y_DEFAULT = 64


@dataclass(frozen=True)
class FitConfig:
    nugget: float = 1e-8
    max_nugget: float = 1e-4
    n_starts: int = 10
    log_theta_bounds: Tuple[float, float] = (math.log(1e-3), math.log(1e4))
    max_iter: int = 200
    seed: int = SEED_DEFAULT
    beta_method: str = "mean"  # "mean" (sample mean) or "gls"
    noise: bool = False  # fit the nugget as a hyperparameter
    log_nugget_bounds: Tuple[float, float] = (math.log(1e-8), math.log(1.0))
    # upper theta per coordinate keeps the closest pair of distinct design
    # values at least this correlated; 0 turns the cap off
    theta_cap_corr: float = 0.01

    def __post_init__(self) -> None:
        if not self.nugget >= 0 or not math.isfinite(self.nugget):
            raise InvalidArgumentError(f"nugget must be finite and >= 0, got {self.nugget}")
        if self.max_nugget < self.nugget:
            raise InvalidArgumentError("max_nugget must be >= nugget")
        if self.n_starts < 1:
            raise InvalidArgumentError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be >= 1, got {self.max_iter}")
        lo, hi = self.log_theta_bounds
        if not lo < hi:
            raise InvalidArgumentError("log_theta_bounds must be an increasing pair")
        lo, hi = self.log_nugget_bounds
        if not lo < hi:
            raise InvalidArgumentError("log_nugget_bounds must be an increasing pair")
        if not 0.0 <= self.theta_cap_corr < 1.0:
            raise InvalidArgumentError(f"theta_cap_corr must be in [0, 1), got {self.theta_cap_corr}")
        if self.beta_method not in ("mean", "gls"):
            raise InvalidArgumentError(f"beta_method must be 'mean' or 'gls', got {self.beta_method!r}")


@dataclass(frozen=True)
class MonteCarloConfig:
    n_mc: int = N_MC_DEFAULT
    n_mc_ig: int = N_MC_IG_DEFAULT
    n_y: int = N_Y_DEFAULT

    def __post_init__(self) -> None:
        for name in ("n_mc", "n_mc_ig", "n_y"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"{name} must be >= 1")


@dataclass(frozen=True)
class LaneChangeConfig:
    t_d: float = 0.5  # reaction delay, s
    decel: float = 3.0  # closing-speed deceleration, m/s^2
    v_bounds: Tuple[float, float] = (5.0, 35.0)
    rdot_bounds: Tuple[float, float] = (0.0, 30.0)
    inv_r_bounds: Tuple[float, float] = (0.1, 1.0)
    n_low: int = 1000
    n_high: int = 500
    noise: float = 0.5
    # fit budget for the 3D study; the 1000-point level dominates runtime
    fit_starts: int = 3
    fit_max_iter: int = 60
    low_fit_starts: int = 2
    low_fit_max_iter: int = 40

    def __post_init__(self) -> None:
        if self.t_d < 0 or self.decel <= 0:
            raise InvalidArgumentError("t_d must be >= 0 and decel > 0")
        if not 1 <= self.n_high <= self.n_low:
            raise InvalidArgumentError("split sizes must satisfy 1 <= n_high <= n_low")
        if self.noise < 0:
            raise InvalidArgumentError("noise amplitude must be >= 0")
        if min(self.fit_starts, self.fit_max_iter, self.low_fit_starts, self.low_fit_max_iter) < 1:
            raise InvalidArgumentError("fit budgets must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = SEED_DEFAULT
    fit: FitConfig = field(default_factory=FitConfig)
    monte_carlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    lane_change: LaneChangeConfig = field(default_factory=LaneChangeConfig)
    costs: Optional[List[float]] = None

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, seed=int(seed), fit=replace(self.fit, seed=int(seed)))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


_SECTIONS = {
    "fit": FitConfig,
    "monte_carlo": MonteCarloConfig,
    "lane_change": LaneChangeConfig,
}


def _build_section(cls, raw: Dict[str, Any], name: str):
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidArgumentError(f"unknown keys in config section {name!r}: {unknown}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return cls(**kwargs)


def config_from_dict(raw: Dict[str, Any]) -> RunConfig:
    known = set(_SECTIONS) | {"seed", "costs"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidArgumentError(f"unknown top-level config keys: {unknown}")

    seed = int(raw.get("seed", SEED_DEFAULT))
    sections = {
        name: _build_section(cls, raw.get(name, {}), name) for name, cls in _SECTIONS.items()
    }
    if "seed" not in raw.get("fit", {}):
        sections["fit"] = replace(sections["fit"], seed=seed)

    costs = raw.get("costs")
    if costs is not None:
        costs = [float(c) for c in costs]
    return RunConfig(seed=seed, costs=costs, **sections)


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise InvalidArgumentError(f"cannot read config {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"config {p} must hold a JSON object")
    return config_from_dict(raw)


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent, reproducible stream for one labelled subcomponent."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(label.encode("utf-8")),))
    return np.random.Generator(np.random.Philox(ss))
