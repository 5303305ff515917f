"""Sequence-specific treatment-effect estimation.

The estimator works arm by arm. For a sequence seq it regresses the row
product 1{D = seq} * Y2 on a design whose columns are the covariates and the
lagged outcome scaled by the assignment probability q_seq, plus the directed
double antiderivative of a polynomial basis in the two fitted propensities.
Because the columns are built as antiderivatives, the mixed second derivative
of the fitted regression function in (pi1, pi2) is available in closed form,
and the odd/even sign flip from untreated-arm integration limits is absorbed
by the direction of each antiderivative. The read-off

    m_hat(x, y1, v) = beta_x' x + theta * y1 + phi(v)' gamma

then estimates the conditional mean of Y2(seq) at resistance v, and
marginalizing y1 over the fitted first-outcome law gives the unconditional
surface. Effects are differences (at a point) or unit-square integrals
(closed form in the basis) of those surfaces.

The second-period propensity entering an arm's design is always evaluated at
that arm's first treatment with the row's realized first outcome. Using the
realized first treatment instead would let the arm indicator leak into the
propensity argument and tilt the resistance distribution the antiderivative
columns are integrating over.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .data import EstimationConfig, PanelDataset
from .errors import (
    BootstrapFailureError,
    InsufficientSupportError,
    NumericalError,
    ValidationError,
)
from .firststage import MixingModel, PropensityModel, fit_mixing, fit_propensity
from .numkit import PolyBasis, gauss_legendre, sigmoid, solve_least_squares
from .streams import substream

Seq = Tuple[int, int]

SEQUENCES: Tuple[Seq, ...] = ((0, 0), (0, 1), (1, 0), (1, 1))

MIN_EXTRA_ROWS = 20  # arm rows required beyond the design dimension

_BOOT_BLOCK = 1 << 20  # stream-id block per dataset; bootstrap ids live above it
_MAX_ATTEMPT_ROUNDS = 5


def check_sequence(seq: Sequence[int]) -> Seq:
    s = tuple(int(b) for b in seq)
    if len(s) != 2 or any(b not in (0, 1) for b in s):
        raise ValidationError(f"treatment sequence must be a pair of 0/1, got {seq}")
    return s  # type: ignore[return-value]


def sequence_sign(seq: Sequence[int]) -> int:
    """(-1) to the number of untreated periods."""
    seq = check_sequence(seq)
    return -1 if sum(1 for b in seq if b == 0) % 2 else 1


def seq_label(seq: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in seq)


def arm_design(
    data: PanelDataset,
    seq: Seq,
    pi1: np.ndarray,
    pi2: np.ndarray,
    basis: PolyBasis,
) -> Tuple[np.ndarray, np.ndarray]:
    """Design matrix and response for one arm's integrated-basis regression.

    Columns: q*x1, q*x2, q*x3, q*y1, then the antiderivative block. No
    intercept: the constant basis term's antiderivative already spans the
    q-direction a constant column would need.
    """
    q1 = pi1 if seq[0] == 1 else 1.0 - pi1
    q2 = pi2 if seq[1] == 1 else 1.0 - pi2
    q = q1 * q2
    phi_int = basis.antiderivative(pi1, pi2, seq)
    design = np.column_stack([q[:, None] * data.x, q * data.y[:, 0], phi_int])
    in_arm = (data.d[:, 0] == seq[0]) & (data.d[:, 1] == seq[1])
    response = in_arm.astype(np.float64) * data.y[:, 1]
    return design, response


@dataclass(frozen=True)
class ConditionalMtrFit:
    """Fitted arm regression, read off as a surface in (x, y1, v)."""

    seq: Seq
    basis: PolyBasis
    gamma: np.ndarray
    beta_x: np.ndarray
    theta_y1: float
    sign: int
    n_arm: int
    rank_deficient: bool
    x_sample: np.ndarray

    def conditional_surface(self, x, y1, v1, v2, clip: bool = True):
        """m_hat(x, y1, v); clipped to [0,1] unless raw values are requested."""
        x = np.asarray(x, dtype=np.float64)
        raw = (
            x @ self.beta_x
            + self.theta_y1 * np.asarray(y1, dtype=np.float64)
            + self.basis.eval(v1, v2) @ self.gamma
        )
        return np.clip(raw, 0.0, 1.0) if clip else raw


def fit_conditional_mtr(
    data: PanelDataset,
    seq: Sequence[int],
    p1: PropensityModel,
    p2: PropensityModel,
    config: EstimationConfig,
) -> ConditionalMtrFit:
    """Fit one arm's conditional surface from the integrated-basis regression."""
    seq = check_sequence(seq)
    basis = PolyBasis(config.basis_degree)
    pi1 = p1.predict(data)
    pi2 = p2.predict(data, d1=seq[0])
    design, response = arm_design(data, seq, pi1, pi2, basis)

    n_arm = int(((data.d[:, 0] == seq[0]) & (data.d[:, 1] == seq[1])).sum())
    n_required = design.shape[1] + MIN_EXTRA_ROWS
    if n_arm < n_required:
        raise InsufficientSupportError(seq, n_arm, n_required)

    fit = solve_least_squares(design, response)
    if fit.rank_deficient:
        warnings.warn(
            f"arm {seq_label(seq)}: rank-deficient design (rank {fit.rank} of {design.shape[1]})",
            RuntimeWarning,
            stacklevel=2,
        )
    coef = fit.coef
    return ConditionalMtrFit(
        seq=seq,
        basis=basis,
        gamma=coef[4:].copy(),
        beta_x=coef[:3].copy(),
        theta_y1=float(coef[3]),
        sign=sequence_sign(seq),
        n_arm=n_arm,
        rank_deficient=fit.rank_deficient,
        x_sample=data.x,
    )


def regression_cross_partial(fit: ConditionalMtrFit, x, y1, v1, v2):
    """Analytic mixed derivative of the fitted arm regression in (pi1, pi2).

    The q-scaled block contributes sign*(beta_x'x + theta*y1) because each
    untreated factor of q differentiates to -1; the antiderivative block
    contributes its exact term-wise mixed derivative. Multiplying the result
    by fit.sign recovers the surface read-off identically.
    """
    x = np.asarray(x, dtype=np.float64)
    head = fit.sign * (x @ fit.beta_x + fit.theta_y1 * float(y1))
    tail = fit.basis.antideriv_cross_partial(v1, v2, fit.seq) @ fit.gamma
    return head + tail


@dataclass(frozen=True)
class MtrSurface:
    """Arm surface with the first outcome marginalized over its fitted law."""

    fit: ConditionalMtrFit
    mix: MixingModel

    @property
    def seq(self) -> Seq:
        return self.fit.seq

    @property
    def basis(self) -> PolyBasis:
        return self.fit.basis

    def weight1(self, v1, x):
        return self.mix.weight1(self.fit.seq[0], v1, x)

    def eval(self, x, v1, v2, clip: bool = True):
        """m_hat(x, v). The y1 branches are affine in y1, so mixing reduces
        to substituting the branch-1 weight for y1. Clipping is for reported
        values only; integration uses the raw polynomial."""
        x = np.asarray(x, dtype=np.float64)
        w1 = self.weight1(v1, x)
        raw = (
            x @ self.fit.beta_x
            + self.fit.theta_y1 * w1
            + self.basis.eval(v1, v2) @ self.fit.gamma
        )
        return np.clip(raw, 0.0, 1.0) if clip else raw


def mix_out_y1(fit: ConditionalMtrFit, mix: MixingModel) -> MtrSurface:
    """Marginalize the conditional surface over the fitted first-outcome law."""
    return MtrSurface(fit=fit, mix=mix)


def mte(surf_a: MtrSurface, surf_b: MtrSurface, x, v) -> float:
    """Treatment-effect surface difference at one (x, v) point."""
    if len(surf_a.seq) != len(surf_b.seq):
        raise ValidationError("surfaces cover different numbers of periods")
    v1, v2 = float(v[0]), float(v[1])
    if not (0.0 <= v1 <= 1.0 and 0.0 <= v2 <= 1.0):
        raise ValidationError(f"v must lie in the unit square, got {(v1, v2)}")
    return float(surf_a.eval(x, v1, v2) - surf_b.eval(x, v1, v2))


def _surface_integral(surf: MtrSurface, xs: np.ndarray, config: EstimationConfig) -> Tuple[float, float]:
    """Unit-square integral of the raw surface, averaged over rows of xs.

    Returns the closed-form value and a quadrature evaluation of the same
    integral for the cross-check. The polynomial block integrates term by
    term; the mixing weight's v1-dependence is integrated by Gauss-Legendre.
    """
    fit = surf.fit
    poly_closed = float(fit.gamma @ fit.basis.box_integral())

    nodes, wts = gauss_legendre(config.quadrature_nodes, 0.0, 1.0)
    beta_part = float(np.mean(xs @ fit.beta_x))
    c = surf.mix.fit.coef
    xpart = c[0] + c[1] * fit.seq[0] + xs @ c[3:]
    w1_grid = sigmoid(xpart[:, None] + c[2] * nodes[None, :])
    theta_part = float(fit.theta_y1 * np.mean(w1_grid @ wts))

    phi_grid = fit.basis.eval(nodes[:, None], nodes[None, :]) @ fit.gamma
    poly_quad = float(wts @ phi_grid @ wts)

    closed = beta_part + theta_part + poly_closed
    quad = beta_part + theta_part + poly_quad
    return closed, quad


def ate(
    surf_a: MtrSurface,
    surf_b: MtrSurface,
    x: Union[np.ndarray, Sequence[float], str],
    config: EstimationConfig,
) -> float:
    """Effect integrated over the unit square of resistances.

    x is either a covariate row or "marginal", which averages over the
    empirical covariate sample the surfaces were fitted on. The closed-form
    integral is cross-checked against tensor-product quadrature; the reported
    contrast is clamped to [-1, 1].
    """
    if surf_a.basis.degree != surf_b.basis.degree:
        raise ValidationError("surfaces use different basis degrees")
    if isinstance(x, str):
        if x != "marginal":
            raise ValidationError(f"x must be a covariate row or 'marginal', got {x!r}")
        xs_a, xs_b = surf_a.fit.x_sample, surf_b.fit.x_sample
    else:
        row = np.asarray(x, dtype=np.float64).reshape(1, 3)
        xs_a = xs_b = row

    closed_a, quad_a = _surface_integral(surf_a, xs_a, config)
    closed_b, quad_b = _surface_integral(surf_b, xs_b, config)
    closed = closed_a - closed_b
    quad = quad_a - quad_b

    v_free = surf_a.fit.theta_y1 == 0.0 and surf_b.fit.theta_y1 == 0.0
    v_free = v_free or (surf_a.mix.fit.coef[2] == 0.0 and surf_b.mix.fit.coef[2] == 0.0)
    tol = 1e-10 if v_free else 1e-6
    if abs(closed - quad) > tol:
        raise NumericalError(
            f"closed-form and quadrature integrals disagree: {closed} vs {quad}"
        )
    return float(np.clip(closed, -1.0, 1.0))


class EffectRequest(NamedTuple):
    """One effect to estimate: contrast of two sequences, at a point or marginal."""

    contrast: Tuple[Seq, Seq]
    kind: str  # "mte" | "ate" | "ate_marginal"
    x: Optional[Tuple[float, ...]] = None
    v: Optional[Tuple[float, float]] = None


def check_request(req: EffectRequest) -> EffectRequest:
    seq_a = check_sequence(req.contrast[0])
    seq_b = check_sequence(req.contrast[1])
    if req.kind not in ("mte", "ate", "ate_marginal"):
        raise ValidationError(f"unknown effect kind {req.kind!r}")
    x = req.x
    if req.kind in ("mte", "ate"):
        if x is None:
            raise ValidationError(f"kind {req.kind!r} needs a covariate row")
        x = tuple(float(c) for c in x)
        if len(x) != 3:
            raise ValidationError(f"covariate row must have 3 entries, got {len(x)}")
    v = req.v
    if req.kind == "mte":
        if v is None:
            raise ValidationError("kind 'mte' needs a resistance point v")
        v = (float(v[0]), float(v[1]))
    return EffectRequest(contrast=(seq_a, seq_b), kind=req.kind, x=x, v=v)


class Pipeline:
    """All fitted stages for one dataset, with arm fits built on demand."""

    def __init__(self, data: PanelDataset, config: EstimationConfig):
        self.data = data
        self.config = config
        self.p1 = fit_propensity(data, 1, config)
        self.p2 = fit_propensity(data, 2, config)
        self.mix = fit_mixing(data, self.p1, config)
        self._fits: Dict[Seq, ConditionalMtrFit] = {}
        self._surfaces: Dict[Seq, MtrSurface] = {}

    def conditional_fit(self, seq: Sequence[int]) -> ConditionalMtrFit:
        seq = check_sequence(seq)
        if seq not in self._fits:
            self._fits[seq] = fit_conditional_mtr(self.data, seq, self.p1, self.p2, self.config)
        return self._fits[seq]

    def surface(self, seq: Sequence[int]) -> MtrSurface:
        seq = check_sequence(seq)
        if seq not in self._surfaces:
            self._surfaces[seq] = mix_out_y1(self.conditional_fit(seq), self.mix)
        return self._surfaces[seq]

    def effect(self, req: EffectRequest) -> float:
        req = check_request(req)
        surf_a = self.surface(req.contrast[0])
        surf_b = self.surface(req.contrast[1])
        if req.kind == "mte":
            return mte(surf_a, surf_b, np.asarray(req.x), req.v)
        if req.kind == "ate":
            return ate(surf_a, surf_b, np.asarray(req.x), self.config)
        return ate(surf_a, surf_b, "marginal", self.config)


def fit_pipeline(data: PanelDataset, config: EstimationConfig) -> Pipeline:
    return Pipeline(data, config)


@dataclass(frozen=True)
class EffectEstimate:
    """Point estimate with percentile bootstrap interval."""

    contrast: Tuple[Seq, Seq]
    kind: str
    x: Optional[Tuple[float, ...]]
    v: Optional[Tuple[float, float]]
    point: float
    boot: np.ndarray
    ci: Tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "contrast": [list(self.contrast[0]), list(self.contrast[1])],
            "kind": self.kind,
            "x": None if self.x is None else list(self.x),
            "v": None if self.v is None else list(self.v),
            "point": self.point,
            "ci_lo": self.ci[0],
            "ci_hi": self.ci[1],
            "n_boot": int(self.boot.shape[0]),
        }


def percentile_ci(boot: np.ndarray) -> Tuple[float, float]:
    """95% interval from the order statistics at ranks ceil(.025(B+1)) and
    floor(.975(B+1)), clamped to the available range."""
    b = boot.shape[0]
    lo_rank = min(max(math.ceil(0.025 * (b + 1)), 1), b)
    hi_rank = min(max(math.floor(0.975 * (b + 1)), 1), b)
    ordered = np.sort(boot)
    return float(ordered[lo_rank - 1]), float(ordered[hi_rank - 1])


def bootstrap_effects(
    data: PanelDataset,
    requests: Sequence[EffectRequest],
    config: EstimationConfig,
    dataset_index: int = 0,
) -> List[EffectEstimate]:
    """Estimate several effects with one shared set of bootstrap replicates.

    Replicate b, redraw attempt a of dataset r draws its resample indexes
    from substream id (1+r)*2^20 + a*B + b, so every redraw is a fixed,
    schedule-independent stream: results are identical however replicates
    are ordered or parallelized, and a redraw for one replicate never shifts
    the draws of another.
    """
    requests = [check_request(r) for r in requests]
    if config.bootstrap_reps < 1:
        raise ValidationError("bootstrap_reps must be >= 1")
    b_reps = config.bootstrap_reps
    if _MAX_ATTEMPT_ROUNDS * b_reps > _BOOT_BLOCK:
        raise ValidationError(f"bootstrap_reps too large for the stream layout: {b_reps}")

    pipeline = fit_pipeline(data, config)
    points = [pipeline.effect(r) for r in requests]

    boot = np.empty((b_reps, len(requests)))
    n = data.n
    failures = 0
    attempts = 0
    budget = _MAX_ATTEMPT_ROUNDS * b_reps
    base = (1 + dataset_index) * _BOOT_BLOCK
    for b in range(b_reps):
        done = False
        for a in range(_MAX_ATTEMPT_ROUNDS):
            attempts += 1
            rng = substream(config.seed, base + a * b_reps + b).generator()
            idx = rng.integers(0, n, size=n)
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    rep = fit_pipeline(data.take(idx), config)
                    boot[b] = [rep.effect(r) for r in requests]
            except NumericalError:
                failures += 1
                continue
            done = True
            break
        if not done:
            raise BootstrapFailureError(failures, attempts, budget)

    out = []
    for j, (req, point) in enumerate(zip(requests, points)):
        col = boot[:, j].copy()
        out.append(
            EffectEstimate(
                contrast=req.contrast,
                kind=req.kind,
                x=req.x,
                v=req.v,
                point=point,
                boot=col,
                ci=percentile_ci(col),
            )
        )
    return out


def bootstrap_effect(
    data: PanelDataset,
    contrast: Tuple[Sequence[int], Sequence[int]],
    kind: str,
    config: EstimationConfig,
    x=None,
    v=None,
    dataset_index: int = 0,
) -> EffectEstimate:
    """Single-effect convenience wrapper around bootstrap_effects."""
    req = EffectRequest(
        contrast=(check_sequence(contrast[0]), check_sequence(contrast[1])),
        kind=kind,
        x=None if x is None else tuple(float(c) for c in x),
        v=None if v is None else (float(v[0]), float(v[1])),
    )
    return bootstrap_effects(data, [req], config, dataset_index=dataset_index)[0]
