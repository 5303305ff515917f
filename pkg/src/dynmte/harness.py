"""Monte Carlo experiment runner.

run_mc simulates many panels, runs an estimator on each, and aggregates
bias, RMSE, and interval coverage against frozen simulation-oracle truths.
run_curve estimates an effect curve over a resistance grid on a single
panel with pointwise bootstrap bands. Replicates are independent named
substreams, so reports are identical for any thread count.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .data import EstimationConfig
from .dgp import DgpSpec, simulate
from .effects import (
    EffectRequest,
    bootstrap_effects,
    check_sequence,
    seq_label,
)
from .errors import HarnessError, NumericalError, ValidationError
from .streams import substream

Seq = Tuple[int, int]

MAX_FAILURE_RATE = 0.02

TABLE_V_POINTS = ((0.5, 0.5), (0.25, 0.75), (0.75, 0.25))
TABLE_CONTRASTS = (
    ((1, 1), (0, 0)),
    ((1, 0), (0, 0)),
    ((0, 1), (0, 0)),
    ((1, 0), (0, 1)),
)


@dataclass(frozen=True)
class McTarget:
    """One quantity tracked across replications."""

    contrast: Tuple[Seq, Seq]
    kind: str  # "ate" (marginal over X) or "mte" (at the spec's covariate mean)
    v: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        object.__setattr__(
            self,
            "contrast",
            (check_sequence(self.contrast[0]), check_sequence(self.contrast[1])),
        )
        if self.kind not in ("ate", "mte"):
            raise ValidationError(f"target kind must be 'ate' or 'mte', got {self.kind!r}")
        if self.kind == "mte":
            if self.v is None:
                raise ValidationError("mte target needs a resistance point v")
            object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))
        elif self.v is not None:
            raise ValidationError("ate target takes no resistance point")

    def key(self) -> str:
        a, b = self.contrast
        label = f"{seq_label(a)}-{seq_label(b)}"
        if self.kind == "ate":
            return f"ate:{label}"
        return f"mte:{label}:{self.v[0]:g},{self.v[1]:g}"

    def request(self, x: np.ndarray) -> EffectRequest:
        if self.kind == "ate":
            return EffectRequest(contrast=self.contrast, kind="ate_marginal")
        return EffectRequest(contrast=self.contrast, kind="mte", x=tuple(x), v=self.v)


def standard_targets() -> List[McTarget]:
    """The canonical report set: four contrast ATEs and twelve MTE cells."""
    targets = [McTarget(contrast=c, kind="ate") for c in TABLE_CONTRASTS]
    for contrast in TABLE_CONTRASTS:
        for v in TABLE_V_POINTS:
            targets.append(McTarget(contrast=contrast, kind="mte", v=v))
    return targets


@dataclass(frozen=True)
class McRow:
    target: str
    avg_bias: float
    med_bias: float
    rmse: float
    coverage: float
    ci_length: float


@dataclass(frozen=True)
class McReport:
    rows: Tuple[McRow, ...]
    reps: int
    n_failed: int
    truths: Dict[str, Tuple[float, float]]  # key -> (value, se)
    seed: int

    @property
    def failure_rate(self) -> float:
        return self.n_failed / self.reps

    def to_csv(self) -> str:
        lines = ["target,avg_bias,med_bias,rmse,coverage,ci_length"]
        for row in self.rows:
            cells = [
                row.target,
                f"{row.avg_bias:.17g}",
                f"{row.med_bias:.17g}",
                f"{row.rmse:.17g}",
                f"{row.coverage:.17g}",
                f"{row.ci_length:.17g}",
            ]
            if "," in row.target:
                cells[0] = f'"{row.target}"'
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "reps": self.reps,
            "n_failed": self.n_failed,
            "failure_rate": self.failure_rate,
            "seed": self.seed,
            "truths": {k: {"value": v, "se": s} for k, (v, s) in self.truths.items()},
        }


Estimator = Callable[..., List[Tuple[float, Tuple[float, float]]]]


def default_estimator(data, requests, config, dataset_index) -> List[Tuple[float, Tuple[float, float]]]:
    """The full pipeline with shared bootstrap replicates across targets."""
    estimates = bootstrap_effects(data, requests, config, dataset_index=dataset_index)
    return [(e.point, e.ci) for e in estimates]


def _normalize_truths(
    truths: Dict[str, Union[float, dict, Tuple[float, float]]],
) -> Dict[str, Tuple[float, float]]:
    out = {}
    for key, val in truths.items():
        if isinstance(val, dict):
            out[key] = (float(val["value"]), float(val.get("se", 0.0)))
        elif isinstance(val, (tuple, list)):
            out[key] = (float(val[0]), float(val[1]))
        else:
            out[key] = (float(val), 0.0)
    return out


def parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    """Apply fn to items, optionally on a thread pool; order preserved."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_mc(
    spec: DgpSpec,
    targets: Sequence[McTarget],
    reps: int,
    config: EstimationConfig,
    truths: Dict[str, Union[float, dict, Tuple[float, float]]],
    estimator: Optional[Estimator] = None,
    threads: int = 1,
) -> McReport:
    """Replicate the estimator over fresh panels and aggregate against truth.

    Replicate r simulates its panel on substream r of config.seed and hands
    the estimator dataset_index r, which namespaces any bootstrap streams.
    Failed replicates are excluded from aggregation and counted; a failure
    rate above MAX_FAILURE_RATE aborts. Redrawing failures here would bias
    the aggregates toward easy samples, so exclusion is deliberate.
    """
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    if not targets:
        raise ValidationError("no targets given")
    truth_map = _normalize_truths(truths)
    missing = [t.key() for t in targets if t.key() not in truth_map]
    if missing:
        raise ValidationError(f"no frozen truth for targets: {missing}")
    estimator = estimator or default_estimator
    x = spec.x_mean
    requests = [t.request(x) for t in targets]

    def one_replicate(r: int):
        data = simulate(spec, substream(config.seed, r))
        try:
            return estimator(data, requests, config, r)
        except NumericalError:
            return None

    results = parallel_map(one_replicate, range(reps), threads)
    kept = [res for res in results if res is not None]
    n_failed = reps - len(kept)
    if n_failed / reps > MAX_FAILURE_RATE:
        raise HarnessError(
            f"{n_failed} of {reps} replicates failed "
            f"(rate {n_failed / reps:.3f} > {MAX_FAILURE_RATE})"
        )
    if not kept:
        raise HarnessError("all replicates failed")

    rows = []
    for j, target in enumerate(targets):
        truth, _ = truth_map[target.key()]
        points = np.array([rep[j][0] for rep in kept])
        lo = np.array([rep[j][1][0] for rep in kept])
        hi = np.array([rep[j][1][1] for rep in kept])
        err = points - truth
        rows.append(
            McRow(
                target=target.key(),
                avg_bias=float(err.mean()),
                med_bias=float(np.median(err)),
                rmse=float(np.sqrt(np.mean(err**2))),
                coverage=float(np.mean((lo <= truth) & (truth <= hi))),
                ci_length=float(np.mean(hi - lo)),
            )
        )
    return McReport(
        rows=tuple(rows),
        reps=reps,
        n_failed=n_failed,
        truths={t.key(): truth_map[t.key()] for t in targets},
        seed=config.seed,
    )


@dataclass(frozen=True)
class CurvePoint:
    v: float
    estimate: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class CurveGrid:
    contrast: Tuple[Seq, Seq]
    axis: int
    fixed_v: float
    points: Tuple[CurvePoint, ...]

    def to_csv(self) -> str:
        lines = ["v,estimate,ci_lo,ci_hi"]
        for p in self.points:
            lines.append(
                f"{p.v:.17g},{p.estimate:.17g},{p.ci_lo:.17g},{p.ci_hi:.17g}"
            )
        return "\n".join(lines) + "\n"


def run_curve(
    spec: DgpSpec,
    contrast: Tuple[Sequence[int], Sequence[int]],
    axis: int,
    fixed_v: float,
    grid: int,
    config: EstimationConfig,
) -> CurveGrid:
    """Estimate an effect curve on one simulated panel.

    The swept resistance runs over an equally spaced grid on [0.05, 0.95];
    the other resistance is held at fixed_v. All grid points share the same
    bootstrap replicates, so the band is a family of pointwise intervals
    from one resampling plan.
    """
    contrast = (check_sequence(contrast[0]), check_sequence(contrast[1]))
    if axis not in (1, 2):
        raise ValidationError(f"axis must be 1 or 2, got {axis}")
    if not 0.0 < fixed_v < 1.0:
        raise ValidationError(f"fixed_v must lie in (0, 1), got {fixed_v}")
    if grid < 2:
        raise ValidationError(f"grid must be >= 2, got {grid}")

    data = simulate(spec, substream(config.seed, 0))
    x = tuple(spec.x_mean)
    sweep = np.linspace(0.05, 0.95, grid)
    requests = [
        EffectRequest(
            contrast=contrast,
            kind="mte",
            x=x,
            v=(t, fixed_v) if axis == 1 else (fixed_v, t),
        )
        for t in sweep
    ]
    estimates = bootstrap_effects(data, requests, config, dataset_index=0)
    points = tuple(
        CurvePoint(v=float(t), estimate=e.point, ci_lo=e.ci[0], ci_hi=e.ci[1])
        for t, e in zip(sweep, estimates)
    )
    for p in points:
        if p.ci_lo > p.ci_hi:
            raise NumericalError(f"inverted interval at v={p.v}")
    return CurveGrid(contrast=contrast, axis=axis, fixed_v=fixed_v, points=points)
