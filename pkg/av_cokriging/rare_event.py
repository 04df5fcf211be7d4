# av_cokriging/rare_event.py
# Probability of a safety-critical event under the environment distribution.
#
# The surrogate estimate averages, over environment samples x ~ f, the
# posterior probability that the fused surface y_T(x) crosses the threshold.
# crude_mc_oracle does the same with the event indicator of a known function
# and is what the surrogate estimate is validated against.
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import ndtr

from av_cokriging.config import derive_rng
from av_cokriging.dataset import Bounds
from av_cokriging.errors import InvalidArgumentError
from av_cokriging.kriging import KrigingModel
from av_cokriging.multifidelity import MultiFidelityModel

logger = logging.getLogger(__name__)

EXCEED = "exceed"
FALL_BELOW = "fall-below"
DIRECTIONS = (EXCEED, FALL_BELOW)


@dataclass(frozen=True)
class EventSpec:
    gamma: float
    direction: str = EXCEED  # exceed: g >= gamma, fall-below: g <= gamma

    def __post_init__(self) -> None:
        gamma = float(self.gamma)
        # +/-inf give the never/always events
        if math.isnan(gamma):
            raise InvalidArgumentError("gamma must not be NaN")
        if self.direction not in DIRECTIONS:
            raise InvalidArgumentError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        object.__setattr__(self, "gamma", gamma)

    def indicator(self, values: np.ndarray) -> np.ndarray:
        if self.direction == EXCEED:
            return (values >= self.gamma).astype(float)
        return (values <= self.gamma).astype(float)


class EnvironmentDistribution:
    """Independent uniform coordinates over the design-space box."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float], description: str = ""):
        self.support = Bounds(np.asarray(lower, dtype=float), np.asarray(upper, dtype=float))
        self.description = description

    @property
    def dim(self) -> int:
        return self.support.dim

    def sample(self, n: int, seed: int, label: str = "mc") -> np.ndarray:
        """n i.i.d. draws; the same (seed, label) always gives the same stream."""
        if n < 1:
            raise InvalidArgumentError(f"sample size must be >= 1, got {n}")
        rng = derive_rng(seed, label)
        return rng.uniform(self.support.lower, self.support.upper, size=(int(n), self.dim))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "description": self.description,
            "coordinates": [
                {"family": "uniform", "low": float(lo), "high": float(hi)}
                for lo, hi in zip(self.support.lower, self.support.upper)
            ],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "EnvironmentDistribution":
        coords = doc.get("coordinates")
        if not isinstance(coords, list) or not coords:
            raise InvalidArgumentError("environment config needs a non-empty 'coordinates' list")
        lower: List[float] = []
        upper: List[float] = []
        for i, c in enumerate(coords, start=1):
            family = c.get("family", "uniform")
            if family != "uniform":
                raise InvalidArgumentError(f"coordinate {i}: unsupported distribution family {family!r}")
            try:
                lower.append(float(c["low"]))
                upper.append(float(c["high"]))
            except (KeyError, TypeError, ValueError) as e:
                raise InvalidArgumentError(f"coordinate {i}: uniform needs numeric 'low' and 'high'") from e
        return cls(lower, upper, str(doc.get("description", "")))


@dataclass(frozen=True)
class ProbabilityEstimate:
    value: float
    n_samples: int
    std_error: float
    seed: int
    gamma: float
    direction: str

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def event_terms(mean: np.ndarray, var: np.ndarray, spec: EventSpec) -> np.ndarray:
    """Per-point posterior event probability; indicator where the variance is zero."""
    sd = np.sqrt(np.maximum(var, 0.0))
    signed = mean - spec.gamma if spec.direction == EXCEED else spec.gamma - mean
    degenerate = sd == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(degenerate, 0.0, signed / np.where(degenerate, 1.0, sd))
    terms = ndtr(z)
    # ties count as events
    terms[degenerate] = (signed[degenerate] >= 0).astype(float)
    return terms


def _summarize(terms: np.ndarray) -> Tuple[float, float]:
    n = len(terms)
    value = float(np.clip(np.mean(terms), 0.0, 1.0))
    se = float(np.std(terms, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return value, se


Surrogate = Union[MultiFidelityModel, KrigingModel]


def surrogate_moments(model: Surrogate, X: np.ndarray, t: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(model, MultiFidelityModel):
        return model.predict(X, t)
    return model.predict(X)


def event_probability(
    model: Surrogate,
    env: EnvironmentDistribution,
    spec: EventSpec,
    n_mc: int,
    seed: int,
    t: Optional[int] = None,
) -> ProbabilityEstimate:
    """Monte Carlo average over f of P(y_t(x) crosses gamma); t defaults to the top level."""
    if n_mc < 1:
        raise InvalidArgumentError(f"n_mc must be >= 1, got {n_mc}")
    X = env.sample(n_mc, seed)
    mean, var = surrogate_moments(model, X, t)
    value, se = _summarize(event_terms(mean, var, spec))
    logger.info("surrogate estimate p=%.6g (se=%.2g, n=%d, seed=%d)", value, se, n_mc, seed)
    return ProbabilityEstimate(value, int(n_mc), se, int(seed), spec.gamma, spec.direction)


def crude_mc_oracle(
    true_fn: Callable[[np.ndarray], np.ndarray],
    env: EnvironmentDistribution,
    spec: EventSpec,
    n: int,
    seed: int,
) -> ProbabilityEstimate:
    """Plain Monte Carlo on a known performance function.

    true_fn maps an (n, d) array of environment samples to n responses.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    X = env.sample(n, seed)
    values = np.asarray(true_fn(X), dtype=float).reshape(-1)
    if len(values) != n:
        raise InvalidArgumentError(f"true_fn returned {len(values)} values for {n} points")
    p = float(np.mean(spec.indicator(values)))
    se = math.sqrt(p * (1.0 - p) / n)
    return ProbabilityEstimate(p, int(n), se, int(seed), spec.gamma, spec.direction)


def combined_std_error(*estimates: ProbabilityEstimate) -> float:
    return math.sqrt(sum(e.std_error ** 2 for e in estimates))
