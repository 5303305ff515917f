"""Synthetic two-period data generator and simulation oracles.

The generator produces panels from a known structural model with sequential
selection on unobservables: each period's treatment is taken when a logistic
propensity index crosses that period's uniform latent resistance, and the
latent resistances load on the outcome errors, so treatment is endogenous
unless `randomized` is set. The oracles compute potential-outcome means for
any treatment sequence by simulating the structural equations directly; they
are the ground truth the estimators are judged against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .data import LatentDraws, PanelDataset
from .errors import ValidationError
from .numkit import sigmoid
from .streams import RandomStream

Seq = Tuple[int, int]

_ORACLE_CHUNK = 1_000_000


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of the synthetic two-period model.

    alpha enters the propensity indexes through covariates centered at their
    means, so the reference individual (x at its mean, instruments at zero,
    no history) sits at propensity one half. beta and theta drive the outcome
    indexes. slope1/slope2 are the (untreated, treated) loadings of the
    centered resistances on the period outcome errors; setting them to zero
    removes selection on unobservables without touching anything else.
    randomized=True assigns both treatments by fair coin flips instead of the
    propensity crossings, which breaks the tie between resistances and
    treatment while keeping the outcome equations as they are.
    """

    n: int = 891
    alpha: Tuple[float, float, float] = (-0.25, -0.15, 0.4)
    beta: Tuple[float, float, float] = (-1.2, -1.5, 0.4)
    theta: float = 0.1
    x3_mean: float = 5.0
    x3_var: float = 1.2
    p_x1: float = 0.5
    p_x2: float = 0.6
    slope1: Tuple[float, float] = (2.0, 1.0)
    slope2: Tuple[float, float] = (1.0, 2.0)
    randomized: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        for name in ("alpha", "beta"):
            vec = getattr(self, name)
            if len(vec) != 3:
                raise ValidationError(f"{name} must have 3 entries, got {len(vec)}")
        for name in ("p_x1", "p_x2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")
        if self.x3_var <= 0.0:
            raise ValidationError(f"x3_var must be positive, got {self.x3_var}")
        for name in ("slope1", "slope2"):
            if len(getattr(self, name)) != 2:
                raise ValidationError(f"{name} must have 2 entries")

    @property
    def x_mean(self) -> np.ndarray:
        """Population mean of the covariate row (also the centering point)."""
        return np.array([self.p_x1, self.p_x2, self.x3_mean])

    def to_json(self) -> str:
        d = {
            "n": self.n,
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "theta": self.theta,
            "x3_mean": self.x3_mean,
            "x3_var": self.x3_var,
            "p_x1": self.p_x1,
            "p_x2": self.p_x2,
            "slope1": list(self.slope1),
            "slope2": list(self.slope2),
            "randomized": self.randomized,
        }
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DgpSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ValidationError("expected a JSON object")
        known = {
            "n", "alpha", "beta", "theta", "x3_mean", "x3_var",
            "p_x1", "p_x2", "slope1", "slope2", "randomized",
        }
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown fields: {sorted(unknown)}")
        for key in ("alpha", "beta", "slope1", "slope2"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


def propensity1(spec: DgpSpec, x: np.ndarray, z1) -> np.ndarray:
    """True first-period propensity at covariates x and instrument z1."""
    x = np.asarray(x, dtype=np.float64)
    ax = (x - spec.x_mean) @ np.asarray(spec.alpha)
    return sigmoid(np.asarray(z1, dtype=np.float64) + ax)


def propensity2(spec: DgpSpec, x: np.ndarray, z1, z2, d1, y1) -> np.ndarray:
    """True second-period propensity given the realized history (d1, y1)."""
    x = np.asarray(x, dtype=np.float64)
    ax = (x - spec.x_mean) @ np.asarray(spec.alpha)
    idx = (
        np.asarray(z1, dtype=np.float64)
        + np.asarray(z2, dtype=np.float64)
        + ax
        + np.asarray(d1, dtype=np.float64)
        - np.asarray(y1, dtype=np.float64)
    )
    return sigmoid(idx)


def _draw_covariates(spec: DgpSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    x1 = (rng.random(n) < spec.p_x1).astype(np.float64)
    x2 = (rng.random(n) < spec.p_x2).astype(np.float64)
    x3 = spec.x3_mean + np.sqrt(spec.x3_var) * rng.standard_normal(n)
    return np.column_stack([x1, x2, x3])


def simulate_latent(spec: DgpSpec, stream: RandomStream) -> Tuple[PanelDataset, LatentDraws]:
    """Simulate a panel and return it together with its latent draws.

    The latent record keeps the resistances, the per-arm outcome errors, the
    true propensities actually used for assignment, and every potential
    outcome, so tests can check the observed columns against the latent truth
    row by row.
    """
    rng = stream.generator()
    n = spec.n
    beta = np.asarray(spec.beta)

    x = _draw_covariates(spec, rng, n)
    bx = x @ beta
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    v1 = rng.random(n)
    v2 = rng.random(n)

    pi1 = propensity1(spec, x, z1)
    if spec.randomized:
        assign1 = np.full(n, 0.5)
        d1 = (rng.random(n) < 0.5).astype(np.float64)
    else:
        assign1 = pi1
        d1 = (pi1 >= v1).astype(np.float64)

    eps1 = {arm: rng.standard_normal(n) for arm in (0, 1)}
    y1pot = {arm: (bx >= eps1[arm]).astype(np.float64) for arm in (0, 1)}
    y1 = np.where(d1 == 1.0, y1pot[1], y1pot[0])

    pi2 = propensity2(spec, x, z1, z2, d1, y1)
    if spec.randomized:
        assign2 = np.full(n, 0.5)
        d2 = (rng.random(n) < 0.5).astype(np.float64)
    else:
        assign2 = pi2
        d2 = (pi2 >= v2).astype(np.float64)

    u1 = {
        arm: spec.slope1[arm] * (v1 - 0.5) + rng.standard_normal(n)
        for arm in (0, 1)
    }
    u2: Dict[Seq, np.ndarray] = {}
    y2pot: Dict[Seq, np.ndarray] = {}
    for arm1 in (0, 1):
        for arm2 in (0, 1):
            shock = spec.slope2[arm2] * (v2 - 0.5) + u1[arm1] + rng.standard_normal(n)
            u2[(arm1, arm2)] = shock
            y2pot[(arm1, arm2)] = (bx + spec.theta * y1pot[arm1] >= shock).astype(np.float64)

    y2 = np.select(
        [(d1 == a) & (d2 == b) for a in (0, 1) for b in (0, 1)],
        [y2pot[(a, b)] for a in (0, 1) for b in (0, 1)],
    )

    data = PanelDataset(
        x=x,
        z=np.column_stack([z1, z2]),
        d=np.column_stack([d1, d2]),
        y=np.column_stack([y1, y2]),
    )
    latents = LatentDraws(
        v=np.column_stack([v1, v2]),
        u=u2,
        pi=np.column_stack([assign1, assign2]),
        y1pot=y1pot,
        y2pot=y2pot,
    )
    return data, latents


def simulate(spec: DgpSpec, stream: RandomStream) -> PanelDataset:
    """Simulate a panel; identical draws to simulate_latent on the same stream."""
    data, _ = simulate_latent(spec, stream)
    return data


class OracleEstimate(NamedTuple):
    value: float
    se: float


def _check_point(v: Sequence[float]) -> Tuple[float, float]:
    v1, v2 = float(v[0]), float(v[1])
    if not (0.0 < v1 < 1.0 and 0.0 < v2 < 1.0):
        raise ValidationError(f"v must lie in the open unit square, got {(v1, v2)}")
    return v1, v2


def _check_seq(seq: Sequence[int]) -> Seq:
    s = tuple(int(b) for b in seq)
    if len(s) != 2 or any(b not in (0, 1) for b in s):
        raise ValidationError(f"sequence must be a pair of 0/1, got {seq}")
    return s  # type: ignore[return-value]


def _y2_given(
    spec: DgpSpec,
    seq: Seq,
    bx: np.ndarray,
    y1: np.ndarray,
    v1: np.ndarray,
    v2: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Second-period potential outcome under seq with supplied first outcome."""
    d1, d2 = seq
    n = bx.shape[0]
    u1 = spec.slope1[d1] * (v1 - 0.5) + rng.standard_normal(n)
    u2 = spec.slope2[d2] * (v2 - 0.5) + u1 + rng.standard_normal(n)
    return (bx + spec.theta * y1 >= u2).astype(np.float64)


def _mean_se(values_sum: float, squares_sum: float, count: int) -> OracleEstimate:
    mean = values_sum / count
    var = max(squares_sum / count - mean * mean, 0.0)
    return OracleEstimate(value=mean, se=float(np.sqrt(var / count)))


def oracle_mtr(
    spec: DgpSpec,
    seq: Sequence[int],
    x: Sequence[float],
    v: Sequence[float],
    draws: int = 200_000,
    stream: Optional[RandomStream] = None,
) -> OracleEstimate:
    """Simulate E[Y2(seq) | X=x, V=v] with its Monte Carlo standard error."""
    seq = _check_seq(seq)
    v1, v2 = _check_point(v)
    if draws < 100_000:
        raise ValidationError(f"draws must be >= 100000, got {draws}")
    if stream is None:
        stream = RandomStream(0)
    rng = stream.generator()
    bx = float(np.asarray(x, dtype=np.float64) @ np.asarray(spec.beta))

    total = sq = 0.0
    left = draws
    while left > 0:
        m = min(left, _ORACLE_CHUNK)
        bxv = np.full(m, bx)
        y1 = (bxv >= rng.standard_normal(m)).astype(np.float64)
        y2 = _y2_given(spec, seq, bxv, y1, np.full(m, v1), np.full(m, v2), rng)
        total += float(y2.sum())
        sq += float((y2 * y2).sum())
        left -= m
    return _mean_se(total, sq, draws)


def oracle_mtr_given_y1(
    spec: DgpSpec,
    seq: Sequence[int],
    x: Sequence[float],
    v: Sequence[float],
    y1: int,
    draws: int = 200_000,
    stream: Optional[RandomStream] = None,
) -> OracleEstimate:
    """Same as oracle_mtr but holding the first-period outcome fixed at y1."""
    seq = _check_seq(seq)
    v1, v2 = _check_point(v)
    if y1 not in (0, 1):
        raise ValidationError(f"y1 must be 0 or 1, got {y1}")
    if draws < 100_000:
        raise ValidationError(f"draws must be >= 100000, got {draws}")
    if stream is None:
        stream = RandomStream(0)
    rng = stream.generator()
    bx = float(np.asarray(x, dtype=np.float64) @ np.asarray(spec.beta))

    total = sq = 0.0
    left = draws
    while left > 0:
        m = min(left, _ORACLE_CHUNK)
        bxv = np.full(m, bx)
        y1v = np.full(m, float(y1))
        y2 = _y2_given(spec, seq, bxv, y1v, np.full(m, v1), np.full(m, v2), rng)
        total += float(y2.sum())
        sq += float((y2 * y2).sum())
        left -= m
    return _mean_se(total, sq, draws)


def oracle_ate(
    spec: DgpSpec,
    seq_a: Sequence[int],
    seq_b: Sequence[int],
    draws: int = 1_000_000,
    stream: Optional[RandomStream] = None,
) -> OracleEstimate:
    """Simulate E[Y2(seq_a) - Y2(seq_b)] marginally over covariates and resistances.

    Common covariate, resistance, and first-period error draws are shared
    between the two arms, so the contrast's Monte Carlo error reflects only
    the second-period shocks.
    """
    seq_a = _check_seq(seq_a)
    seq_b = _check_seq(seq_b)
    if draws < 1_000_000:
        raise ValidationError(f"draws must be >= 1000000, got {draws}")
    if seq_a == seq_b:
        return OracleEstimate(value=0.0, se=0.0)
    if stream is None:
        stream = RandomStream(0)
    rng = stream.generator()
    beta = np.asarray(spec.beta)

    total = sq = 0.0
    left = draws
    while left > 0:
        m = min(left, _ORACLE_CHUNK)
        x = _draw_covariates(spec, rng, m)
        bx = x @ beta
        v1 = rng.random(m)
        v2 = rng.random(m)
        eps1 = {arm: rng.standard_normal(m) for arm in (0, 1)}
        y1pot = {arm: (bx >= eps1[arm]).astype(np.float64) for arm in (0, 1)}
        nu1 = {arm: rng.standard_normal(m) for arm in (0, 1)}
        u1 = {
            arm: spec.slope1[arm] * (v1 - 0.5) + nu1[arm]
            for arm in (0, 1)
        }
        vals = {}
        for seq in (seq_a, seq_b):
            d1, d2 = seq
            u2 = spec.slope2[d2] * (v2 - 0.5) + u1[d1] + rng.standard_normal(m)
            vals[seq] = (bx + spec.theta * y1pot[d1] >= u2).astype(np.float64)
        diff = vals[seq_a] - vals[seq_b]
        total += float(diff.sum())
        sq += float((diff * diff).sum())
        left -= m
    return _mean_se(total, sq, draws)


def degenerate(spec: DgpSpec) -> DgpSpec:
    """Copy of spec with the resistance loadings zeroed (no selection on V)."""
    return replace(spec, slope1=(0.0, 0.0), slope2=(0.0, 0.0))
