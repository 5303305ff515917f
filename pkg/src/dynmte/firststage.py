"""First-stage fits: period propensity scores and the first-outcome mixing law.

Both stages are logistic regressions on the index structure the generator
actually uses (period 1: instrument and covariates; period 2: both
instruments, covariates, and the realized history). The mixing model learns
P(Y1 = 1 | d1, pi1, x) and supplies the weights that later marginalize
conditional surfaces over the first outcome.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data import EstimationConfig, PanelDataset
from .errors import SeparationError, ValidationError
from .numkit import LogisticFit, fit_logistic, sigmoid

PERIOD1_DESIGN = ("intercept", "z1", "x1", "x2", "x3")
PERIOD2_DESIGN = ("intercept", "z1", "z2", "x1", "x2", "x3", "d1", "y1")
MIXING_DESIGN = ("intercept", "d1", "pi1", "x1", "x2", "x3")


def _design_matrix(data: PanelDataset, period: int, d1_override: Optional[float] = None) -> np.ndarray:
    one = np.ones(data.n)
    if period == 1:
        return np.column_stack([one, data.z[:, 0], data.x])
    d1 = data.d[:, 0] if d1_override is None else np.full(data.n, float(d1_override))
    return np.column_stack([one, data.z[:, 0], data.z[:, 1], data.x, d1, data.y[:, 0]])


def _fit_dropping_degenerate(design: np.ndarray, response: np.ndarray, label: str) -> tuple:
    """Fit a logistic model, excluding degenerate predictor columns.

    Non-intercept columns that are constant within the sample (including
    all-zero ones) carry no information beyond the intercept and would make
    the weighted normal equations singular, so they are dropped before the
    fit and reported with coefficient zero. The intercept is always kept.
    """
    keep = [0]
    for j in range(1, design.shape[1]):
        col = design[:, j]
        if col.min() != col.max():
            keep.append(j)
    try:
        fit = fit_logistic(design[:, keep], response)
    except SeparationError as exc:
        raise SeparationError(f"{label}: {exc}") from None
    coef = np.zeros(design.shape[1])
    coef[keep] = fit.coef
    full = LogisticFit(
        coef=coef, converged=fit.converged, iterations=fit.iterations, loglik=fit.loglik
    )
    return full, tuple(keep)


@dataclass(frozen=True)
class PropensityModel:
    """Fitted treatment-probability model for one period."""

    period: int
    fit: LogisticFit
    design_spec: Tuple[str, ...]
    trim: float

    def predict(self, data: PanelDataset, d1: Optional[float] = None) -> np.ndarray:
        """Per-row treatment probabilities, clamped to [trim, 1 - trim].

        For the period-2 model, d1 substitutes a counterfactual first
        treatment into the design while keeping each row's realized first
        outcome, which is the conditioning the sequence-specific second-stage
        designs need.
        """
        if d1 is not None and self.period == 1:
            raise ValidationError("d1 override only applies to the period-2 model")
        design = _design_matrix(data, self.period, d1_override=d1)
        return np.clip(self.fit.predict(design), self.trim, 1.0 - self.trim)

    def to_json(self) -> str:
        return json.dumps(
            {
                "period": self.period,
                "design": list(self.design_spec),
                "coef": [float(c) for c in self.fit.coef],
                "converged": self.fit.converged,
            },
            indent=2,
        )


def fit_propensity(data: PanelDataset, period: int, config: EstimationConfig) -> PropensityModel:
    """Fit the period-1 or period-2 propensity model."""
    if period not in (1, 2):
        raise ValidationError(f"period must be 1 or 2, got {period}")
    design = _design_matrix(data, period)
    response = data.d[:, period - 1]
    fit, _ = _fit_dropping_degenerate(design, response, f"period {period}")
    spec = PERIOD1_DESIGN if period == 1 else PERIOD2_DESIGN
    return PropensityModel(period=period, fit=fit, design_spec=spec, trim=config.trim)


@dataclass(frozen=True)
class MixingModel:
    """Fitted law of the first outcome given (d1, pi1, x)."""

    fit: LogisticFit

    def weight1(self, d1, v1, x) -> np.ndarray:
        """P(Y1 = 1 | d1, pi1 = v1, x); broadcasts over v1 and rows of x."""
        x = np.asarray(x, dtype=np.float64)
        c = self.fit.coef
        idx = c[0] + c[1] * np.asarray(d1, float) + c[2] * np.asarray(v1, float) + x @ c[3:]
        return sigmoid(idx)

    def to_json(self) -> str:
        return json.dumps(
            {
                "design": list(MIXING_DESIGN),
                "coef": [float(c) for c in self.fit.coef],
                "converged": self.fit.converged,
            },
            indent=2,
        )


def fit_mixing(data: PanelDataset, p1: PropensityModel, config: EstimationConfig) -> MixingModel:
    """Fit the first-outcome law used by the marginalization step."""
    pi1 = p1.predict(data)
    design = np.column_stack([np.ones(data.n), data.d[:, 0], pi1, data.x])
    fit, _ = _fit_dropping_degenerate(design, data.y[:, 0], "mixing model")
    return MixingModel(fit=fit)


def mixture_weights(model: MixingModel, d1: int, v1: float, x) -> Tuple[float, float]:
    """Weights (w0, w1) on the two first-outcome branches; sums to 1 exactly."""
    if not 0.0 < v1 < 1.0:
        raise ValidationError(f"v1 must lie in (0, 1), got {v1}")
    w1 = float(model.weight1(d1, v1, x))
    return 1.0 - w1, w1
