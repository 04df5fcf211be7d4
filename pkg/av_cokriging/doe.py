# av_cokriging/doe.py
# Next-experiment selection: maximize information gain per unit cost over a
# finite candidate grid of (point, fidelity) pairs.
#
# IG(x, t) is the expected squared change of the event-probability estimate
# after one hypothetical observation y ~ y_t(x). The hypothetical observation
# becomes a layer-t difference observation with hyperparameters held fixed,
# which is a rank-one update of layer t. Every estimate reuses one set of
# environment samples.
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import ndtri

from av_cokriging.dataset import as_point, as_points
from av_cokriging.errors import InvalidArgumentError, NestingViolationError
from av_cokriging.multifidelity import MultiFidelityDataset, MultiFidelityModel, validate_nesting
from av_cokriging.rare_event import EnvironmentDistribution, EventSpec, event_terms

logger = logging.getLogger(__name__)


class CostModel:
    """C(x, t) > 0; a per-level constant table unless a function is given."""

    def __init__(self, table: Sequence[float], fn: Optional[Callable[[np.ndarray, int], float]] = None):
        self.table = tuple(float(c) for c in table)
        if not self.table:
            raise InvalidArgumentError("cost table must list one cost per level")
        if any(not (math.isfinite(c) and c > 0) for c in self.table):
            raise InvalidArgumentError(f"costs must be finite and > 0, got {self.table}")
        self.fn = fn

    @classmethod
    def default(cls, T: int) -> "CostModel":
        """c_t = 10^(t-1)."""
        return cls([10.0 ** (t - 1) for t in range(1, T + 1)])

    def cost(self, x: np.ndarray, t: int) -> float:
        if self.fn is not None:
            c = float(self.fn(x, t))
        else:
            if not 1 <= t <= len(self.table):
                raise InvalidArgumentError(f"no cost for level {t} (table has {len(self.table)} levels)")
            c = self.table[t - 1]
        if not (math.isfinite(c) and c > 0):
            raise InvalidArgumentError(f"cost at level {t} must be > 0, got {c}")
        return c

    def scaled(self, factor: float) -> "CostModel":
        if not factor > 0:
            raise InvalidArgumentError("cost scale factor must be > 0")
        fn = None if self.fn is None else (lambda x, t, f=self.fn: factor * f(x, t))
        return CostModel([factor * c for c in self.table], fn)


@dataclass(frozen=True)
class CandidateSet:
    points: np.ndarray
    levels: Tuple[int, ...]

    def __post_init__(self) -> None:
        pts = as_points(self.points)
        levels = tuple(sorted({int(t) for t in self.levels}))
        if len(pts) < 1 or not levels:
            raise InvalidArgumentError("candidate set needs at least one point and one level")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class DesignChoice:
    x: Tuple[float, ...]
    t: int
    ig: float
    cost: float
    score: float

    def to_dict(self) -> Dict[str, Any]:
        return {"x": list(self.x), "t": self.t, "ig": self.ig, "cost": self.cost, "score": self.score}


def y_quantiles(n_y: int) -> np.ndarray:
    """Midpoint standard-normal quantiles Phi^-1((i - 1/2) / n_y)."""
    if n_y < 1:
        raise InvalidArgumentError(f"n_y must be >= 1, got {n_y}")
    return ndtri((np.arange(1, n_y + 1) - 0.5) / n_y)


class _GainContext:
    """Shared inputs for scoring many candidates against one sample set."""

    def __init__(self, model: MultiFidelityModel, samples: np.ndarray, spec: EventSpec, n_y: int):
        self.model = model
        self.samples = samples
        self.spec = spec
        self.z = y_quantiles(n_y)
        self.mean, self.var = model.predict(samples)
        self.p_n = float(np.mean(event_terms(self.mean, self.var, spec)))

    def gain(self, x: np.ndarray, t: int) -> float:
        layer = self.model.layers[t - 1]
        # an observed point is a point mass at every level up to t
        if layer.contains_point(x):
            return 0.0
        _, v_t = self.model.predict(x, t)
        v_t = float(v_t[0])
        c_sx, c_xx = layer.posterior_cov(self.samples, x)
        if v_t <= 0.0 or c_xx <= 0.0:
            return 0.0
        w = c_sx / c_xx
        new_var = np.maximum(self.var - c_sx * c_sx / c_xx, 0.0)
        shifts = math.sqrt(v_t) * self.z
        new_mean = self.mean[None, :] + shifts[:, None] * w[None, :]
        n_y, m = new_mean.shape
        terms = event_terms(new_mean.ravel(), np.tile(new_var, n_y), self.spec).reshape(n_y, m)
        p_next = terms.mean(axis=1)
        return float(np.mean((self.p_n - p_next) ** 2))


def _check_candidate(model: MultiFidelityModel, x, t: int) -> np.ndarray:
    t = model.check_level(t)
    xp = as_point(x, model.dim)
    if not model.bounds.contains(xp)[0]:
        raise InvalidArgumentError(f"candidate {xp[0].tolist()} lies outside the design space")
    return xp


def information_gain(
    model: MultiFidelityModel,
    env: EnvironmentDistribution,
    spec: EventSpec,
    x,
    t: int,
    n_y: int,
    n_mc: int,
    seed: int,
) -> float:
    """Expected squared change of p-hat from one hypothetical observation at (x, t)."""
    if not model.layers:
        raise InvalidArgumentError("empty model")
    xp = _check_candidate(model, x, t)
    ctx = _GainContext(model, env.sample(n_mc, seed, label="ig"), spec, n_y)
    return ctx.gain(xp, t)


def score_candidates(
    model: MultiFidelityModel,
    env: EnvironmentDistribution,
    spec: EventSpec,
    candidates: CandidateSet,
    cost: CostModel,
    n_y: int,
    n_mc: int,
    seed: int,
) -> pd.DataFrame:
    """IG, cost and IG/cost for every (point, level) pair, levels outermost."""
    for t in candidates.levels:
        model.check_level(t)
    ctx = _GainContext(model, env.sample(n_mc, seed, label="ig"), spec, n_y)
    rows: List[Dict[str, Any]] = []
    for t in candidates.levels:
        for x in candidates.points:
            xp = _check_candidate(model, x, t)
            ig = ctx.gain(xp, t)
            c = cost.cost(xp[0], t)
            row = {f"x{i + 1}": float(v) for i, v in enumerate(xp[0])}
            row.update({"t": t, "ig": ig, "cost": c, "score": ig / c})
            rows.append(row)
    logger.info("scored %d candidates (p_n=%.6g)", len(rows), ctx.p_n)
    return pd.DataFrame(rows)


def best_row(table: pd.DataFrame, dim: int) -> DesignChoice:
    """Highest score; ties go to the lowest level, then the lexicographically first point."""
    cols = [f"x{i + 1}" for i in range(dim)]
    best = table["score"].max()
    tied = table[table["score"] == best]
    row = tied.sort_values(["t", *cols], kind="mergesort").iloc[0]
    return DesignChoice(
        tuple(float(row[c]) for c in cols), int(row["t"]), float(row["ig"]), float(row["cost"]), float(row["score"])
    )


def select_next(
    model: MultiFidelityModel,
    env: EnvironmentDistribution,
    spec: EventSpec,
    candidates: CandidateSet,
    cost: CostModel,
    n_y: int,
    n_mc: int,
    seed: int,
) -> Tuple[DesignChoice, pd.DataFrame]:
    table = score_candidates(model, env, spec, candidates, cost, n_y, n_mc, seed)
    choice = best_row(table, model.dim)
    logger.info("next experiment: x=%s t=%d score=%.4g", choice.x, choice.t, choice.score)
    return choice, table


def augment_dataset(
    data: MultiFidelityDataset,
    choice: DesignChoice,
    responses: Union[Mapping[int, float], Sequence[float]],
) -> MultiFidelityDataset:
    """Append the chosen point to levels 1..t with the supplied responses.

    responses holds one observation per level 1..t (a mapping by level or a
    sequence ordered from level 1).
    """
    t = choice.t
    if not 1 <= t <= data.T:
        raise InvalidArgumentError(f"choice level {t} out of range 1..{data.T}")
    if not isinstance(responses, Mapping):
        responses = {i: v for i, v in enumerate(responses, start=1)}
    extra = sorted(k for k in responses if not 1 <= k <= t)
    if extra:
        raise InvalidArgumentError(f"responses given for levels {extra} above the chosen level {t}")

    x = np.asarray(choice.x, dtype=float)
    out = data
    for level in range(1, t + 1):
        if level not in responses:
            raise NestingViolationError(
                level + 1 if level < t else level,
                data.dataset(level).n,
                x,
                message=f"missing level-{level} response at {x.tolist()}: a level-{t} experiment "
                f"needs observations at levels 1..{t}",
            )
        out = out.replace_dataset(level, out.dataset(level).append(x, float(responses[level])))
    validate_nesting(out)
    return out
