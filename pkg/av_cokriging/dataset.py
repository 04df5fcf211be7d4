# av_cokriging/dataset.py
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from av_cokriging.errors import DuplicatePointError, InvalidArgumentError

logger = logging.getLogger(__name__)

POINT_TOL = 1e-10

# A design point is a length-d float vector; batches are (n, d) arrays.
DesignPoint = np.ndarray


def as_points(X: Union[Sequence, np.ndarray], dim: Optional[int] = None) -> np.ndarray:
    """Coerce points to a float (n, d) array and check they are finite."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if dim is not None and arr.size == dim else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"points must form an (n, d) array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidArgumentError(f"dimension mismatch: expected {dim}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("design points must have finite coordinates")
    return arr


def as_point(x: Union[float, Sequence[float], np.ndarray], dim: int) -> np.ndarray:
    """Coerce one point to a (1, d) array."""
    arr = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return as_points(arr, dim)


def find_duplicates(X: np.ndarray, tol: float = POINT_TOL) -> Optional[tuple]:
    if len(X) < 2:
        return None
    pairs = cKDTree(X).query_pairs(r=tol)
    if not pairs:
        return None
    return min(tuple(sorted(p)) for p in pairs)


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned design-space box; maps coordinates to [0, 1]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidArgumentError("bounds must be two equal-length vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(hi > lo)):
            raise InvalidArgumentError("bounds must be finite with upper > lower")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @classmethod
    def from_points(cls, X: np.ndarray) -> "Bounds":
        """Bounding box of X; zero-width coordinates get a unit span."""
        lo = X.min(axis=0)
        hi = X.max(axis=0)
        width = np.where(hi > lo, hi - lo, 1.0)
        return cls(lo, lo + width)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.lower) / (self.upper - self.lower)

    def denormalize(self, U: np.ndarray) -> np.ndarray:
        return self.lower + U * (self.upper - self.lower)

    def contains(self, X: np.ndarray, tol: float = POINT_TOL) -> np.ndarray:
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Bounds":
        return cls(np.asarray(d["lower"], dtype=float), np.asarray(d["upper"], dtype=float))


@dataclass(frozen=True)
class Dataset:
    """Design points X (n, d) paired with scalar observations y (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        X = as_points(self.X).copy()
        y = np.array(self.y, dtype=float).reshape(-1)
        if len(X) < 1:
            raise InvalidArgumentError("a dataset needs at least one point")
        if len(y) != len(X):
            raise InvalidArgumentError(f"{len(X)} points but {len(y)} observations")
        if not np.all(np.isfinite(y)):
            raise InvalidArgumentError("observations must be finite")
        dup = find_duplicates(X)
        if dup is not None:
            i, j = dup
            raise DuplicatePointError(f"duplicate design points at rows {i} and {j}", index=j, other=i)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def append(self, x: np.ndarray, y: float) -> "Dataset":
        return Dataset(np.vstack([self.X, as_point(x, self.dim)]), np.append(self.y, float(y)))

    def subset(self, idx: Sequence[int]) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx], self.y[idx])

    def to_frame(self) -> pd.DataFrame:
        cols = {f"x{i + 1}": self.X[:, i] for i in range(self.dim)}
        cols["y"] = self.y
        return pd.DataFrame(cols)


def point_columns(df: pd.DataFrame) -> list:
    cols = [c for c in df.columns if c.startswith("x") and c[1:].isdigit()]
    expected = [f"x{i + 1}" for i in range(len(cols))]
    if not cols or sorted(cols, key=lambda c: int(c[1:])) != expected:
        raise InvalidArgumentError(f"expected columns x1..xd, got {list(df.columns)}")
    return expected


def read_points_csv(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InvalidArgumentError(f"cannot read CSV {path}: {e}") from e


def read_dataset_csv(path: Union[str, Path]) -> Dataset:
    """Read a `x1,...,xd,y` CSV file."""
    df = read_points_csv(path)
    cols = point_columns(df)
    if "y" not in df.columns:
        raise InvalidArgumentError(f"{path}: missing 'y' column")
    try:
        X = df[cols].to_numpy(dtype=float)
        y = df["y"].to_numpy(dtype=float)
    except ValueError as e:
        raise InvalidArgumentError(f"{path}: non-numeric values: {e}") from e
    logger.debug("read %d rows (d=%d) from %s", len(y), len(cols), path)
    return Dataset(X, y)


def write_dataset_csv(dataset: Dataset, path: Union[str, Path]) -> None:
    dataset.to_frame().to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
