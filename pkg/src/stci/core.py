"""Domain types, grid conventions, and the on-disk dataset format.

All arrays follow the [t][i][j] indexing convention: t is the timestep,
i the row, j the column. Datasets are stored as a directory holding
``manifest.json`` plus one raw ``<var>.f32`` file per variable
(little-endian IEEE-754 float32, row-major).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

SCHEMA_VERSION = 1

VARIABLE_NAMES = ("X", "Z", "Y", "X_cf", "Y_cf")


class StciError(Exception):
    """Base class for library errors."""


class ValidationError(StciError):
    """A precondition or invariant was violated by the caller."""


class ConfigError(ValidationError):
    """Inconsistent model or experiment configuration."""


class DivergenceError(StciError):
    """The simulation or training left the finite range."""

    def __init__(self, message, variable=None, step=None):
        super().__init__(message)
        self.variable = variable
        self.step = step


class PersistenceError(StciError):
    """Reading or writing an artifact directory failed."""


class MissingFileError(PersistenceError):
    """A file named by the manifest does not exist."""


class SchemaError(PersistenceError):
    """The manifest does not match the supported schema."""


class TruncationError(PersistenceError):
    """A binary file holds the wrong number of elements."""


@dataclass(frozen=True)
class GridSpec:
    """Spatial and temporal extent of one dataset."""

    n_rows: int
    n_cols: int
    n_steps: int
    lag: int = 1

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1 or self.n_steps < 1:
            raise ValidationError("grid dimensions must be positive")
        if not 1 <= self.lag < self.n_steps:
            raise ValidationError(
                f"lag must be in [1, n_steps); got lag={self.lag}, n_steps={self.n_steps}"
            )

    @property
    def shape(self):
        return (self.n_steps, self.n_rows, self.n_cols)


def region_mask(n_rows, n_cols, row_bounds=(10, 15), col_bounds=(10, 15)):
    """Boolean [N][M] mask, True inside the half-open row/col bounds."""
    r0, r1 = row_bounds
    c0, c1 = col_bounds
    if not (0 <= r0 < r1 <= n_rows and 0 <= c0 < c1 <= n_cols):
        raise ValidationError(
            f"region {r0}:{r1},{c0}:{c1} does not fit a {n_rows}x{n_cols} grid"
        )
    mask = np.zeros((n_rows, n_cols), dtype=bool)
    mask[r0:r1, c0:c1] = True
    return mask


def check_region(mask):
    """Validate that a mask splits the grid into nonempty S and S'."""
    mask = np.asarray(mask)
    if mask.dtype != bool or mask.ndim != 2:
        raise ValidationError("region mask must be a 2D boolean array")
    if not mask.any() or mask.all():
        raise ValidationError("region mask must leave both S and S' nonempty")
    return mask


@dataclass(frozen=True)
class InterventionSpec:
    """Counterfactual world definition: where, how much, from when."""

    region: np.ndarray
    update_factor: float = 0.6
    start_step: int = 0

    def __post_init__(self):
        check_region(self.region)
        if not np.isfinite(self.update_factor):
            raise ValidationError("update_factor must be finite")
        if self.start_step < 0:
            raise ValidationError("start_step must be nonnegative")

    def to_manifest(self):
        return {
            "region": self.region.astype(int).tolist(),
            "update_factor": float(self.update_factor),
            "start_step": int(self.start_step),
        }

    @staticmethod
    def from_manifest(d):
        return InterventionSpec(
            region=np.asarray(d["region"], dtype=bool),
            update_factor=d["update_factor"],
            start_step=d["start_step"],
        )


@dataclass
class CausalDataset:
    """Paired factual/counterfactual trajectories plus generation metadata.

    Fields x, z, y hold the factual treatment, covariate, and outcome;
    x_cf and y_cf the counterfactual world. All are float32 [T][N][M].
    """

    grid: GridSpec
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    x_cf: np.ndarray
    y_cf: np.ndarray
    params: "DiffusionParams" = None
    intervention: InterventionSpec = None
    seed: int = 0

    def fields(self):
        return dict(zip(VARIABLE_NAMES, (self.x, self.z, self.y, self.x_cf, self.y_cf)))

    def validate(self):
        shape = self.grid.shape
        for name, arr in self.fields().items():
            if arr.shape != shape:
                raise ValidationError(
                    f"field {name} has shape {arr.shape}, expected {shape}"
                )
            if not np.isfinite(arr).all():
                raise ValidationError(f"field {name} contains non-finite values")
        if self.intervention is not None:
            s = self.intervention.start_step
            if s > 0:
                if not np.array_equal(self.x_cf[:s], self.x[:s]):
                    raise ValidationError("x_cf differs from x before start_step")
                if not np.array_equal(self.y_cf[:s], self.y[:s]):
                    raise ValidationError("y_cf differs from y before start_step")
            outside = ~self.intervention.region
            if not np.array_equal(self.x_cf[:, outside], self.x[:, outside]):
                raise ValidationError("x_cf differs from x outside the treated region")
        return self


def _grid_to_manifest(grid):
    return {"N": grid.n_rows, "M": grid.n_cols, "T": grid.n_steps, "lag": grid.lag}


def _grid_from_manifest(d):
    return GridSpec(n_rows=d["N"], n_cols=d["M"], n_steps=d["T"], lag=d["lag"])


def write_dataset(dataset, path):
    """Persist a dataset directory: manifest.json plus raw f32 blobs."""
    dataset.validate()
    from .datagen import DiffusionParams  # local import to avoid a cycle

    params = dataset.params or DiffusionParams()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "grid": _grid_to_manifest(dataset.grid),
        "params": params.to_manifest(),
        "intervention": dataset.intervention.to_manifest()
        if dataset.intervention is not None
        else None,
        "seed": int(dataset.seed),
        "interference": bool(params.interference),
        "variables": list(VARIABLE_NAMES),
    }
    try:
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2)
        for name, arr in dataset.fields().items():
            arr.astype("<f4", copy=False).tofile(os.path.join(path, f"{name}.f32"))
    except OSError as exc:
        raise PersistenceError(f"cannot write dataset to {path}: {exc}") from exc


def read_dataset(path):
    """Load a dataset directory written by write_dataset."""
    from .datagen import DiffusionParams

    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise MissingFileError(f"no manifest.json in {path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unreadable manifest in {path}: {exc}") from exc

    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {manifest.get('schema_version')!r}"
        )
    for key in ("grid", "params", "seed", "variables"):
        if key not in manifest:
            raise SchemaError(f"manifest missing key {key!r}")

    grid = _grid_from_manifest(manifest["grid"])
    n_elem = grid.n_steps * grid.n_rows * grid.n_cols
    arrays = {}
    for name in manifest["variables"]:
        blob = os.path.join(path, f"{name}.f32")
        if not os.path.isfile(blob):
            raise MissingFileError(f"variable file missing: {blob}")
        raw = np.fromfile(blob, dtype="<f4")
        if raw.size != n_elem:
            raise TruncationError(
                f"{blob} holds {raw.size} elements, expected {n_elem}"
            )
        arrays[name] = raw.reshape(grid.shape)

    missing = [n for n in VARIABLE_NAMES if n not in arrays]
    if missing:
        raise SchemaError(f"manifest lacks required variables: {missing}")

    return CausalDataset(
        grid=grid,
        x=arrays["X"],
        z=arrays["Z"],
        y=arrays["Y"],
        x_cf=arrays["X_cf"],
        y_cf=arrays["Y_cf"],
        params=DiffusionParams.from_manifest(manifest["params"]),
        intervention=InterventionSpec.from_manifest(manifest["intervention"])
        if manifest.get("intervention") is not None
        else None,
        seed=manifest["seed"],
    )
