# av_cokriging/scenarios.py
# Built-in benchmark suites.
#
#   exp1  one-dimensional three-fidelity family on [-5, 5]:
#           g(x)   = exp(-(x/2)^2)          (level 3, the performance function)
#           h_2(x) = exp(-(x/3)^2) - 0.1    (level 2)
#           h_1(x) = 0.7 - (x/6)^2          (level 1)
#   exp2  lane-change cut-in: design coordinates (v, Rdot, 1/R), performance
#         function = minimum range between the test AV and the cut-in vehicle.
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from av_cokriging.config import LaneChangeConfig, derive_rng
from av_cokriging.dataset import POINT_TOL, Bounds, Dataset, as_points
from av_cokriging.errors import InvalidArgumentError
from av_cokriging.multifidelity import MultiFidelityDataset
from av_cokriging.rare_event import EnvironmentDistribution

logger = logging.getLogger(__name__)

DOMAIN_1D = (-5.0, 5.0)
LABELS_1D = ("h1", "h2", "g")
EVAL_GRID_SIZE_1D = 201
LANE_CHANGE_LABELS = ("historical", "real")


def h1(x):
    return 0.7 - (np.asarray(x, dtype=float) / 6.0) ** 2


def h2(x):
    return np.exp(-(np.asarray(x, dtype=float) / 3.0) ** 2) - 0.1


def g(x):
    return np.exp(-(np.asarray(x, dtype=float) / 2.0) ** 2)


FUNCTIONS_1D: Dict[int, Callable] = {1: h1, 2: h2, 3: g}


def eval_1d(level: int, x: float) -> float:
    if level not in FUNCTIONS_1D:
        raise InvalidArgumentError(f"1D benchmark levels are 1, 2, 3; got {level}")
    x = float(x)
    if not DOMAIN_1D[0] <= x <= DOMAIN_1D[1]:
        raise InvalidArgumentError(f"x={x} outside the 1D domain {DOMAIN_1D}")
    return float(FUNCTIONS_1D[level](x))


def g_1d(X: np.ndarray) -> np.ndarray:
    """Vectorized performance function on (n, 1) points."""
    return g(as_points(X, 1)[:, 0])


def bounds_1d() -> Bounds:
    return Bounds(np.array([DOMAIN_1D[0]]), np.array([DOMAIN_1D[1]]))


def environment_1d() -> EnvironmentDistribution:
    return EnvironmentDistribution([DOMAIN_1D[0]], [DOMAIN_1D[1]], "x ~ Uniform[-5, 5]")


def design_points_1d() -> Dict[int, np.ndarray]:
    low = np.linspace(-5.0, 5.0, 21)
    return {
        1: low,
        2: np.array([-5.0, -3.5, -2.0, -0.5, 1.0, 2.5, 4.0]),
        3: np.array([-5.0, -2.0, 1.0, 4.0]),
    }


def design_1d() -> MultiFidelityDataset:
    """Level 1 on 21 points, level 2 on 7, level 3 (g) on 4; nested."""
    pts = design_points_1d()
    datasets = [Dataset(pts[t].reshape(-1, 1), FUNCTIONS_1D[t](pts[t])) for t in (1, 2, 3)]
    return MultiFidelityDataset.from_datasets(datasets, LABELS_1D, bounds_1d())


def eval_grid_1d() -> np.ndarray:
    return np.linspace(DOMAIN_1D[0], DOMAIN_1D[1], EVAL_GRID_SIZE_1D).reshape(-1, 1)


@dataclass(frozen=True)
class LaneChangeInput:
    v: float  # frontal-vehicle velocity, m/s
    rdot: float  # closing speed, m/s
    r: float  # range, m

    def validate(self, config: LaneChangeConfig) -> None:
        checks = (
            ("v", self.v, config.v_bounds),
            ("rdot", self.rdot, config.rdot_bounds),
            ("1/r", 1.0 / self.r if self.r > 0 else np.inf, config.inv_r_bounds),
        )
        for name, value, (lo, hi) in checks:
            if not lo - POINT_TOL <= value <= hi + POINT_TOL:
                raise InvalidArgumentError(f"{name}={value} outside [{lo}, {hi}]")

    def design_point(self) -> np.ndarray:
        return np.array([self.v, self.rdot, 1.0 / self.r])


def _min_range(rdot: np.ndarray, r: np.ndarray, config: LaneChangeConfig) -> np.ndarray:
    # closing distance during the reaction delay, then while braking the closure to zero
    closed = rdot * config.t_d + rdot ** 2 / (2.0 * config.decel)
    return np.maximum(0.0, r - closed)


def lane_change_min_range(inp: LaneChangeInput, config: Optional[LaneChangeConfig] = None) -> float:
    """Minimum range (m) reached after the cut-in; 0 means a crash."""
    config = config or LaneChangeConfig()
    inp.validate(config)
    return float(_min_range(np.asarray(inp.rdot), np.asarray(inp.r), config))


def min_range_on_design(X: np.ndarray, config: Optional[LaneChangeConfig] = None) -> np.ndarray:
    """Vectorized minimum range on design coordinates (v, Rdot, 1/R)."""
    config = config or LaneChangeConfig()
    X = as_points(X, 3)
    if not np.all(lane_change_bounds(config).contains(X)):
        raise InvalidArgumentError("lane-change inputs outside the design bounds")
    return _min_range(X[:, 1], 1.0 / X[:, 2], config)


def lane_change_bounds(config: Optional[LaneChangeConfig] = None) -> Bounds:
    config = config or LaneChangeConfig()
    lo = [config.v_bounds[0], config.rdot_bounds[0], config.inv_r_bounds[0]]
    hi = [config.v_bounds[1], config.rdot_bounds[1], config.inv_r_bounds[1]]
    return Bounds(np.array(lo), np.array(hi))


def lane_change_environment(config: Optional[LaneChangeConfig] = None) -> EnvironmentDistribution:
    b = lane_change_bounds(config)
    return EnvironmentDistribution(b.lower, b.upper, "independent uniforms over (v, Rdot, 1/R)")


def mesh_grid_3d() -> np.ndarray:
    """2560 design points (v, Rdot, 1/R): v-major, then Rdot, then 1/R."""
    v = 5.0 + 2.0 * np.arange(16)
    rdot = 2.0 * np.arange(16)
    inv_r = np.arange(1, 11) / 10.0
    V, RD, IR = np.meshgrid(v, rdot, inv_r, indexing="ij")
    return np.column_stack([V.ravel(), RD.ravel(), IR.ravel()])


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    n_low: int = 1000
    n_high: int = 500
    noise: float = 0.5

    def __post_init__(self) -> None:
        if not 1 <= self.n_high <= self.n_low:
            raise InvalidArgumentError("split sizes must satisfy 1 <= n_high <= n_low")
        if self.noise < 0:
            raise InvalidArgumentError("noise amplitude must be >= 0")

    @classmethod
    def from_config(cls, seed: int, config: LaneChangeConfig) -> "SplitSpec":
        return cls(seed, config.n_low, config.n_high, config.noise)


@dataclass(frozen=True)
class LaneChangeSplit:
    data: MultiFidelityDataset  # level 1 noisy D_1, level 2 exact D_2
    test: Dataset  # D_t with exact values


def build_lane_change_split(spec: SplitSpec, config: Optional[LaneChangeConfig] = None) -> LaneChangeSplit:
    config = config or LaneChangeConfig()
    X = mesh_grid_3d()
    y = min_range_on_design(X, config)
    if spec.n_low >= len(X):
        raise InvalidArgumentError(f"n_low={spec.n_low} leaves no test points out of {len(X)}")

    rng = derive_rng(spec.seed, "split")
    perm = rng.permutation(len(X))
    low_idx = np.sort(perm[: spec.n_low])
    test_idx = np.sort(perm[spec.n_low:])
    high_idx = np.sort(rng.choice(low_idx, size=spec.n_high, replace=False))
    noise = derive_rng(spec.seed, "noise").uniform(-spec.noise, spec.noise, size=spec.n_low)

    low = Dataset(X[low_idx], y[low_idx] + noise)
    high = Dataset(X[high_idx], y[high_idx])
    test = Dataset(X[test_idx], y[test_idx])
    data = MultiFidelityDataset.from_datasets([low, high], LANE_CHANGE_LABELS, lane_change_bounds(config))
    logger.info("lane-change split seed=%d: |D1|=%d |D2|=%d |Dt|=%d", spec.seed, low.n, high.n, test.n)
    return LaneChangeSplit(data, test)


def mse_on(predictor: Callable[[np.ndarray], np.ndarray], X: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error of predictor(X) against y."""
    X = as_points(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) == 0 or len(X) != len(y):
        raise InvalidArgumentError("MSE needs a non-empty test set with one value per point")
    pred = np.asarray(predictor(X), dtype=float).reshape(-1)
    return float(np.mean((pred - y) ** 2))


def mse_1d(predictor: Callable[[np.ndarray], np.ndarray]) -> float:
    X = eval_grid_1d()
    return mse_on(predictor, X, g_1d(X))


def builtin_truth(name: str) -> Tuple[Callable[[np.ndarray], np.ndarray], EnvironmentDistribution]:
    """Performance function and environment of a built-in scenario."""
    if name == "exp1":
        return g_1d, environment_1d()
    if name == "exp2":
        return min_range_on_design, lane_change_environment()
    raise InvalidArgumentError(f"unknown scenario {name!r}; expected exp1 or exp2")
