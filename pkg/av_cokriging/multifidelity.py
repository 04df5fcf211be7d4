# av_cokriging/multifidelity.py
# Co-Kriging stack y_t(x) = d_1(x) + ... + d_t(x).
#
# Layer 1 is an ordinary Kriging fit of the lowest-fidelity data. Layer t >= 2
# fits the difference between the observations of adjacent fidelity levels on
# X_t, which is why the designs must be nested (X_T within ... within X_1).
# Above a noise-fitted layer the difference is taken against the fitted stack
# instead of the lower observations.
# Layers are independent fields, so means and variances both add.
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri

from av_cokriging.config import FitConfig
from av_cokriging.dataset import POINT_TOL, Bounds, Dataset, as_point, as_points
from av_cokriging.errors import FittingFailureError, InvalidArgumentError, NestingViolationError
from av_cokriging.kriging import FORMAT_VERSION, KrigingModel, fit_mle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FidelityLevel:
    t: int  # 1 = lowest fidelity
    label: str = ""


@dataclass(frozen=True)
class MultiFidelityDataset:
    """One dataset per fidelity level, lowest first, sharing one design space."""

    levels: Tuple[Tuple[FidelityLevel, Dataset], ...]
    bounds: Optional[Bounds] = None

    def __post_init__(self) -> None:
        levels = tuple((lvl, ds) for lvl, ds in self.levels)
        if not levels:
            raise InvalidArgumentError("a multi-fidelity dataset needs at least one level")
        for i, (lvl, ds) in enumerate(levels, start=1):
            if lvl.t != i:
                raise InvalidArgumentError(f"fidelity levels must be 1..T in order; position {i} has t={lvl.t}")
            if ds.dim != levels[0][1].dim:
                raise InvalidArgumentError(
                    f"level {i} has dimension {ds.dim}, level 1 has {levels[0][1].dim}"
                )
        bounds = self.bounds if self.bounds is not None else Bounds.from_points(levels[0][1].X)
        if bounds.dim != levels[0][1].dim:
            raise InvalidArgumentError("bounds dimension does not match the datasets")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def from_datasets(
        cls, datasets: Sequence[Dataset], labels: Optional[Sequence[str]] = None, bounds: Optional[Bounds] = None
    ) -> "MultiFidelityDataset":
        labels = list(labels) if labels is not None else [f"level{t}" for t in range(1, len(datasets) + 1)]
        if len(labels) != len(datasets):
            raise InvalidArgumentError("one label per dataset is required")
        levels = tuple((FidelityLevel(t, lab), ds) for t, (lab, ds) in enumerate(zip(labels, datasets), start=1))
        return cls(levels, bounds)

    @property
    def T(self) -> int:
        return len(self.levels)

    @property
    def dim(self) -> int:
        return self.levels[0][1].dim

    @property
    def labels(self) -> List[str]:
        return [lvl.label for lvl, _ in self.levels]

    def dataset(self, t: int) -> Dataset:
        if not 1 <= t <= self.T:
            raise InvalidArgumentError(f"level {t} out of range 1..{self.T}")
        return self.levels[t - 1][1]

    def top(self, T: int) -> "MultiFidelityDataset":
        """Only the highest T levels, renumbered from 1."""
        if not 1 <= T <= self.T:
            raise InvalidArgumentError(f"cannot keep {T} of {self.T} levels")
        kept = self.levels[self.T - T:]
        return MultiFidelityDataset.from_datasets([ds for _, ds in kept], [lvl.label for lvl, _ in kept], self.bounds)

    def replace_dataset(self, t: int, ds: Dataset) -> "MultiFidelityDataset":
        levels = list(self.levels)
        levels[t - 1] = (levels[t - 1][0], ds)
        return MultiFidelityDataset(tuple(levels), self.bounds)


@dataclass(frozen=True)
class NestedDesign:
    """A dataset that passed validate_nesting.

    index[t] maps each row of X_t to its row in X_{t-1} (t >= 2).
    """

    data: MultiFidelityDataset
    index: Dict[int, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class DifferenceData:
    level: int
    dataset: Dataset  # (X_t, Y_t - Y_{t-1})


def validate_nesting(data: MultiFidelityDataset, tol: float = POINT_TOL) -> NestedDesign:
    """Check X_t is contained in X_{t-1} for every t, in normalized coordinates."""
    index: Dict[int, np.ndarray] = {}
    for t in range(2, data.T + 1):
        lower = data.bounds.normalize(data.dataset(t - 1).X)
        upper = data.bounds.normalize(data.dataset(t).X)
        dist, idx = cKDTree(lower).query(upper, k=1, p=np.inf)
        bad = np.flatnonzero(dist > tol)
        if bad.size:
            i = int(bad[0])
            raise NestingViolationError(t, i, data.dataset(t).X[i])
        index[t] = np.asarray(idx, dtype=int)
    return NestedDesign(data, index)


def build_difference_data(data: Union[MultiFidelityDataset, NestedDesign], t: int) -> DifferenceData:
    nested = data if isinstance(data, NestedDesign) else validate_nesting(data)
    mfd = nested.data
    if not 2 <= t <= mfd.T:
        raise InvalidArgumentError(f"difference data needs 2 <= t <= {mfd.T}, got {t}")
    upper = mfd.dataset(t)
    lower = mfd.dataset(t - 1)
    diffs = upper.y - lower.y[nested.index[t]]
    return DifferenceData(t, Dataset(upper.X, diffs))


def build_residual_data(
    data: Union[MultiFidelityDataset, NestedDesign], t: int, lower: "MultiFidelityModel"
) -> DifferenceData:
    """(X_t, Y_t - mean of y_{t-1}) with y_{t-1} the fitted stack of layers 1..t-1.

    Equals the observed difference when every lower layer interpolates; with
    a smoothed (noise-fitted) lower layer it is what the layer-t field must add.
    """
    nested = data if isinstance(data, NestedDesign) else validate_nesting(data)
    mfd = nested.data
    if not 2 <= t <= mfd.T:
        raise InvalidArgumentError(f"difference data needs 2 <= t <= {mfd.T}, got {t}")
    if lower.T < t - 1:
        raise InvalidArgumentError(f"residuals at level {t} need {t - 1} lower layers, model has {lower.T}")
    upper = mfd.dataset(t)
    mean, _ = lower.predict(upper.X, t - 1)
    return DifferenceData(t, Dataset(upper.X, upper.y - mean))


class MultiFidelityModel:
    """Ordered stack of independent layer models; immutable after construction."""

    def __init__(self, layers: Sequence[KrigingModel], labels: Optional[Sequence[str]] = None):
        if not layers:
            raise InvalidArgumentError("a multi-fidelity model needs at least one layer")
        dims = {m.dim for m in layers}
        if len(dims) != 1:
            raise InvalidArgumentError(f"layers disagree on dimension: {sorted(dims)}")
        self.layers: Tuple[KrigingModel, ...] = tuple(layers)
        self.labels: Tuple[str, ...] = tuple(labels) if labels is not None else tuple(
            f"level{t}" for t in range(1, len(layers) + 1)
        )
        if len(self.labels) != len(self.layers):
            raise InvalidArgumentError("one label per layer is required")

    @property
    def T(self) -> int:
        return len(self.layers)

    @property
    def dim(self) -> int:
        return self.layers[0].dim

    @property
    def bounds(self) -> Bounds:
        return self.layers[0].bounds

    def check_level(self, t: int) -> int:
        if isinstance(t, bool) or int(t) != t or not 1 <= t <= self.T:
            raise InvalidArgumentError(f"level {t} out of range 1..{self.T}")
        return int(t)

    def layer_predictions(self, X, upto: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Per-layer means and variances, shape (t, m)."""
        t = self.T if upto is None else self.check_level(upto)
        X = as_points(X, self.dim)
        means = np.empty((t, len(X)))
        variances = np.empty((t, len(X)))
        for i in range(t):
            means[i], variances[i] = self.layers[i].predict(X)
        return means, variances

    def predict(self, X, t: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and variance of y_t at each row of X (t defaults to T)."""
        t = self.T if t is None else self.check_level(t)
        X = as_points(X, self.dim)
        mean = np.zeros(len(X))
        var = np.zeros(len(X))
        for layer in self.layers[:t]:
            m, v = layer.predict(X)
            mean += m
            var += v
        return mean, var

    def replace_layer(self, t: int, layer: KrigingModel) -> "MultiFidelityModel":
        t = self.check_level(t)
        layers = list(self.layers)
        layers[t - 1] = layer
        return MultiFidelityModel(layers, self.labels)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "multifidelity",
            "T": self.T,
            "labels": list(self.labels),
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "MultiFidelityModel":
        if doc.get("kind") != "multifidelity":
            raise InvalidArgumentError(f"not a multi-fidelity model document (kind={doc.get('kind')!r})")
        if doc.get("format_version") != FORMAT_VERSION:
            raise InvalidArgumentError(f"unsupported model format_version {doc.get('format_version')!r}")
        layers = [KrigingModel.from_dict(d) for d in doc.get("layers", [])]
        if len(layers) != doc.get("T"):
            raise InvalidArgumentError("model document T does not match its layer count")
        return cls(layers, doc.get("labels"))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MultiFidelityModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise InvalidArgumentError(f"cannot read model {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise InvalidArgumentError(f"model {path} is not valid JSON: {e}") from e
        if isinstance(doc, dict) and doc.get("kind") == "kriging":
            return cls([KrigingModel.from_dict(doc)])
        return cls.from_dict(doc)


def fit_multifidelity(
    data: Union[MultiFidelityDataset, NestedDesign],
    config: Optional[FitConfig] = None,
    level_configs: Optional[Mapping[int, FitConfig]] = None,
) -> MultiFidelityModel:
    """Fit layer 1 on (X_1, Y_1) and layer t on (X_t, D_t), each by its own MLE.

    D_t is the observed difference Y_t - Y_{t-1} while every lower layer
    interpolates. Above a noise-fitted layer it becomes the residual of Y_t
    against the stack fitted so far (see build_residual_data).
    """
    config = config or FitConfig()
    level_configs = level_configs or {}
    nested = data if isinstance(data, NestedDesign) else validate_nesting(data)
    mfd = nested.data

    layers: List[KrigingModel] = []
    smoothed = False
    for t in range(1, mfd.T + 1):
        if t == 1:
            train = mfd.dataset(1)
        elif smoothed:
            partial = MultiFidelityModel(layers, mfd.labels[: t - 1])
            train = build_residual_data(nested, t, partial).dataset
        else:
            train = build_difference_data(nested, t).dataset
        cfg = level_configs.get(t, config)
        try:
            layer = fit_mle(train, cfg, bounds=mfd.bounds)
        except FittingFailureError as e:
            raise FittingFailureError(str(e), diagnostics=e.diagnostics, layer=t) from e
        logger.info(
            "layer %d (%s): n=%d l=%.6g%s", t, mfd.labels[t - 1], train.n,
            layer.fit_info["log_likelihood"], " (residuals)" if t > 1 and smoothed else "",
        )
        layers.append(layer)
        smoothed = smoothed or cfg.noise
    return MultiFidelityModel(layers, mfd.labels)


def mf_mean(model: MultiFidelityModel, x, t: int) -> float:
    t = model.check_level(t)
    return float(model.predict(as_point(x, model.dim), t)[0][0])


def mf_var(model: MultiFidelityModel, x, t: int) -> float:
    t = model.check_level(t)
    return float(model.predict(as_point(x, model.dim), t)[1][0])


def mf_interval(model: MultiFidelityModel, X, t: int, coverage: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
    """Two-sided Gaussian band mean -/+ z*sigma with the given coverage."""
    if not 0 < coverage < 1:
        raise InvalidArgumentError(f"coverage must lie in (0, 1), got {coverage}")
    mean, var = model.predict(X, t)
    half = ndtri(0.5 + coverage / 2.0) * np.sqrt(var)
    return mean - half, mean + half


def iter_layers(model: MultiFidelityModel) -> Iterable[Tuple[int, str, KrigingModel]]:
    for t, (label, layer) in enumerate(zip(model.labels, model.layers), start=1):
        yield t, label, layer
