# av_cokriging/level_sources.py
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Iterator, Optional, Tuple, Union

from av_cokriging.config import LaneChangeConfig
from av_cokriging.dataset import Bounds, Dataset, read_dataset_csv, write_dataset_csv
from av_cokriging.errors import InvalidArgumentError
from av_cokriging.multifidelity import FidelityLevel, MultiFidelityDataset
from av_cokriging.scenarios import SplitSpec, build_lane_change_split, design_1d

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
BUILTIN_PREFIX = "builtin:"
BUNDLE_FORMAT_VERSION = 1


def _manifest_path(path: Union[str, Path]) -> Path:
    p = Path(path)
    return p / MANIFEST_NAME if p.is_dir() else p


def read_manifest(path: Union[str, Path]) -> Tuple[Path, dict]:
    mpath = _manifest_path(path)
    try:
        doc = json.loads(mpath.read_text(encoding="utf-8"))
    except OSError as e:
        raise InvalidArgumentError(f"cannot read bundle manifest {mpath}: {e}") from e
    except json.JSONDecodeError as e:
        raise InvalidArgumentError(f"bundle manifest {mpath} is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or not isinstance(doc.get("levels"), list) or not doc["levels"]:
        raise InvalidArgumentError(f"{mpath}: manifest needs a non-empty 'levels' list")
    return mpath, doc


def file_source(path: Union[str, Path]) -> Iterator[Tuple[FidelityLevel, Dataset]]:
    """
    Yield fidelity levels, lowest first, from a bundle directory or manifest.
    The manifest lists {"label", "file"} entries in ascending fidelity; CSV
    paths are relative to the manifest.
    """
    mpath, doc = read_manifest(path)
    for t, entry in enumerate(doc["levels"], start=1):
        try:
            csv_path = mpath.parent / entry["file"]
        except (KeyError, TypeError) as e:
            raise InvalidArgumentError(f"{mpath}: level {t} entry needs a 'file'") from e
        ds = read_dataset_csv(csv_path)
        yield FidelityLevel(t, str(entry.get("label", f"level{t}"))), ds


def builtin_dataset(name: str, *, seed: int = 0, config: Optional[LaneChangeConfig] = None) -> MultiFidelityDataset:
    if name == "exp1":
        return design_1d()
    if name == "exp2":
        config = config or LaneChangeConfig()
        return build_lane_change_split(SplitSpec.from_config(seed, config), config).data
    raise InvalidArgumentError(f"unknown built-in bundle {name!r}; expected exp1 or exp2")


def load_bundle(spec: Union[str, Path], *, seed: int = 0, config: Optional[LaneChangeConfig] = None) -> MultiFidelityDataset:
    """A bundle path, or `builtin:<name>`."""
    spec_s = str(spec)
    if spec_s.startswith(BUILTIN_PREFIX):
        return builtin_dataset(spec_s[len(BUILTIN_PREFIX):], seed=seed, config=config)

    levels = tuple(file_source(spec))
    _, doc = read_manifest(spec)
    bounds = Bounds.from_dict(doc["bounds"]) if "bounds" in doc else None
    logger.info("loaded bundle %s: %d levels", spec_s, len(levels))
    return MultiFidelityDataset(levels, bounds)


def write_bundle(data: MultiFidelityDataset, directory: Union[str, Path], extra: Optional[dict] = None) -> Path:
    """Write one CSV per level plus manifest.json; `extra` maps file names to datasets."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for lvl, ds in data.levels:
        fname = f"level{lvl.t}.csv"
        write_dataset_csv(ds, out / fname)
        entries.append({"label": lvl.label, "file": fname})
    for fname, ds in (extra or {}).items():
        write_dataset_csv(ds, out / fname)
    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "bounds": data.bounds.to_dict(),
        "levels": entries,
    }
    mpath = out / MANIFEST_NAME
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return mpath
