"""Dataset container, configuration schema, and CSV interchange format.

One canonical column layout for T=2 panels: id,x1,x2,x3,z1,z2,d1,d2,y1,y2.
Reals are serialized with 17 significant digits so that save/load is an
identity on float64 values.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, fields
from typing import Dict, Tuple

import numpy as np

from .errors import ValidationError

COLUMNS = ("id", "x1", "x2", "x3", "z1", "z2", "d1", "d2", "y1", "y2")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelDataset:
    """Immutable T=2 panel: covariates, instruments, treatments, outcomes.

    x has one row per individual (x1, x2 binary indicators, x3 a real
    score); z, d, y have one column per period.
    """

    x: np.ndarray
    z: np.ndarray
    d: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "z", _frozen(self.z))
        object.__setattr__(self, "d", _frozen(self.d))
        object.__setattr__(self, "y", _frozen(self.y))
        n = self.x.shape[0]
        if self.x.ndim != 2 or self.x.shape[1] != 3:
            raise ValidationError(f"x must be (n, 3), got {self.x.shape}")
        for name in ("z", "d", "y"):
            a = getattr(self, name)
            if a.shape != (n, self.t_max):
                raise ValidationError(
                    f"{name} must be ({n}, {self.t_max}), got {a.shape}"
                )
        for name in ("x", "z"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} contains non-finite values")
        for name in ("d", "y"):
            a = getattr(self, name)
            bad = ~np.isin(a, (0.0, 1.0))
            if bad.any():
                row = int(np.argwhere(bad)[0][0])
                raise ValidationError(f"{name} is not binary at row {row}")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def t_max(self) -> int:
        return 2

    def take(self, indices: np.ndarray) -> "PanelDataset":
        """Row subset/resample (used by the bootstrap)."""
        idx = np.asarray(indices, dtype=np.intp)
        return PanelDataset(self.x[idx], self.z[idx], self.d[idx], self.y[idx])


@dataclass(frozen=True)
class LatentDraws:
    """Simulation-only latents: resistance quantiles, per-sequence errors,
    potential outcomes, and true propensities. Never observed by estimators;
    tests and the no-identification diagnostic read them."""

    v: np.ndarray                         # (n, 2) uniforms
    u: Dict[tuple, np.ndarray]            # sequence -> latent error array
    pi: np.ndarray                        # (n, 2) true propensities
    y1pot: Dict[int, np.ndarray]          # d1 -> Y1(d1)
    y2pot: Dict[tuple, np.ndarray]        # (d1, d2) -> Y2(d1, d2)

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "pi", _frozen(self.pi))
        if np.any(self.v <= 0.0) or np.any(self.v >= 1.0):
            raise ValidationError("v entries must lie in (0, 1)")


@dataclass(frozen=True)
class EstimationConfig:
    """Estimator knobs. Round-trips bit-exactly through JSON."""

    basis_degree: int = 2
    mixing_model: str = "logistic"
    quadrature_nodes: int = 64
    bootstrap_reps: int = 999
    trim: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.basis_degree < 0:
            raise ValidationError("basis_degree must be >= 0")
        if self.mixing_model != "logistic":
            raise ValidationError(f"unknown mixing_model {self.mixing_model!r}")
        if self.quadrature_nodes < 1:
            raise ValidationError("quadrature_nodes must be >= 1")
        if self.bootstrap_reps < 1:
            raise ValidationError("bootstrap_reps must be >= 1")
        if not (0.0 <= self.trim < 0.5):
            raise ValidationError("trim must lie in [0, 0.5)")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)})

    @classmethod
    def from_json(cls, text: str) -> "EstimationConfig":
        raw = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)


def save_panel(data: PanelDataset, path) -> None:
    """Write the canonical CSV. Reals carry 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for i in range(data.n):
            w.writerow(
                [i]
                + [f"{v:.17g}" for v in data.x[i]]
                + [f"{v:.17g}" for v in data.z[i]]
                + [int(data.d[i, 0]), int(data.d[i, 1])]
                + [int(data.y[i, 0]), int(data.y[i, 1])]
            )


def load_panel(path) -> PanelDataset:
    """Read a canonical CSV back into a validated PanelDataset."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        try:
            header = next(r)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        for col in COLUMNS:
            if col not in header:
                raise ValidationError(f"{path}: missing column {col!r}")
        if tuple(header) != COLUMNS:
            raise ValidationError(
                f"{path}: header must be {','.join(COLUMNS)}"
            )
        rows = list(r)
    n = len(rows)
    x = np.empty((n, 3))
    z = np.empty((n, 2))
    d = np.empty((n, 2))
    y = np.empty((n, 2))
    for i, row in enumerate(rows):
        if len(row) != len(COLUMNS):
            raise ValidationError(f"{path}: row {i} has {len(row)} fields")
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError as e:
            raise ValidationError(f"{path}: row {i}: {e}") from None
        x[i] = vals[0:3]
        z[i] = vals[3:5]
        d[i] = vals[5:7]
        y[i] = vals[7:9]
        for name, pair in (("d", d[i]), ("y", y[i])):
            if not np.all(np.isin(pair, (0.0, 1.0))):
                raise ValidationError(f"{path}: non-binary {name} at row {i}")
    return PanelDataset(x, z, d, y)
