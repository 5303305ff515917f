"""Numerical kernels: IRLS logistic regression, least squares, Gauss-Legendre
quadrature, and tensor-product polynomial bases with exact derivatives and
directed antiderivatives.

All kernels are pure and allocate their own outputs; nothing here touches
global state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence, Tuple

import numpy as np

from .errors import SeparationError, SingularDesignError, ValidationError

SEPARATION_BOUND = 30.0  # |coef * column scale| beyond this is treated as divergence


def sigmoid(t: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t, dtype=np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


@dataclass(frozen=True)
class LogisticFit:
    coef: np.ndarray
    converged: bool
    iterations: int
    loglik: float

    def predict(self, design: np.ndarray) -> np.ndarray:
        return sigmoid(np.asarray(design) @ self.coef)


def _loglik(eta: np.ndarray, y: np.ndarray) -> float:
    # sum log p(y|eta) = -sum log(1 + exp(-(2y-1) eta)), stable via logaddexp
    s = np.where(y > 0.5, -eta, eta)
    return float(-np.sum(np.logaddexp(0.0, s)))


def fit_logistic(
    design: np.ndarray,
    response: np.ndarray,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LogisticFit:
    """Logistic regression by iteratively reweighted least squares.

    Newton steps with step-halving whenever a step would lower the
    log-likelihood; stops when the score's max-norm drops to tol. Divergence
    (constant 0/1 response, or any standardized coefficient beyond
    SEPARATION_BOUND) raises SeparationError; a singular weighted normal
    system raises SingularDesignError.
    """
    X = np.asarray(design, dtype=np.float64)
    y = np.asarray(response, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError(
            f"design is {X.shape}, response has length {y.shape[0]}"
        )
    if np.all(y == 0.0) or np.all(y == 1.0):
        # the likelihood has no interior maximum; IRLS would walk off to +-inf
        raise SeparationError("response is constant; coefficients diverge")
    scale = np.max(np.abs(X), axis=0)
    if np.any(scale == 0.0):
        col = int(np.argmax(scale == 0.0))
        raise ValidationError(f"design column {col} is identically zero")

    coef = np.zeros(X.shape[1])
    eta = X @ coef
    ll = _loglik(eta, y)
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        p = sigmoid(eta)
        grad = X.T @ (y - p)
        if np.max(np.abs(grad)) <= tol:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        try:
            step = np.linalg.solve((X * w[:, None]).T @ X, grad)
        except np.linalg.LinAlgError:
            raise SingularDesignError(
                "weighted normal equations are singular"
            ) from None
        new_coef = coef + step
        new_eta = X @ new_coef
        new_ll = _loglik(new_eta, y)
        # near the optimum a genuine Newton step may "lower" the
        # log-likelihood by less than its float summation noise; such steps
        # must be accepted or the gradient stalls above tol
        ll_slack = 64.0 * np.finfo(np.float64).eps * (1.0 + abs(ll))
        halvings = 0
        while new_ll < ll - ll_slack and halvings < 30:
            step *= 0.5
            new_coef = coef + step
            new_eta = X @ new_coef
            new_ll = _loglik(new_eta, y)
            halvings += 1
        if new_ll < ll - ll_slack:
            break  # no usable ascent direction left
        coef, eta, ll = new_coef, new_eta, new_ll
        if np.max(np.abs(coef) * scale) > SEPARATION_BOUND:
            raise SeparationError(
                "coefficients diverged; response is (near-)separated"
            )
    else:
        it = max_iter
    if not converged:
        p = sigmoid(eta)
        converged = bool(np.max(np.abs(X.T @ (y - p))) <= tol)
    return LogisticFit(coef=coef, converged=converged, iterations=it, loglik=ll)


class LeastSquaresFit(NamedTuple):
    coef: np.ndarray
    rank: int
    rank_deficient: bool


def solve_least_squares(design: np.ndarray, response: np.ndarray) -> LeastSquaresFit:
    """Minimum-norm least squares via SVD, with a rank-deficiency flag."""
    A = np.asarray(design, dtype=np.float64)
    b = np.asarray(response, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValidationError(f"need rows >= columns, got {A.shape}")
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    return LeastSquaresFit(coef=coef, rank=int(rank), rank_deficient=int(rank) < A.shape[1])


def gauss_legendre(n_nodes: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]; exact to degree 2n-1."""
    if n_nodes < 1:
        raise ValidationError("n_nodes must be >= 1")
    if not a < b:
        raise ValidationError(f"need a < b, got [{a}, {b}]")
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class PolyBasis:
    """Full tensor-product monomial basis on [0,1]^2.

    Terms are exponent pairs (a, b), a-major, so term count is (degree+1)^2.
    Every operation below is closed-form per term: evaluation, axis partials,
    the cross partial, box integrals, and the double antiderivative directed
    by a treatment sequence (treated axis integrates 0 -> p, untreated
    integrates p -> 1).
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValidationError("degree must be >= 0")
        self.degree = int(degree)
        self.dims = 2
        self.terms: Tuple[Tuple[int, int], ...] = tuple(
            (a, b) for a in range(degree + 1) for b in range(degree + 1)
        )

    @property
    def size(self) -> int:
        return len(self.terms)

    def _powers(self, v: np.ndarray) -> np.ndarray:
        # stack v**0 .. v**degree along the last axis
        v = np.asarray(v, dtype=np.float64)
        return np.stack([v**k for k in range(self.degree + 1)], axis=-1)

    def eval(self, v1, v2) -> np.ndarray:
        """Per-term values v1^a v2^b; output shape broadcast(v1,v2) + (size,)."""
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        p1, p2 = self._powers(v1), self._powers(v2)
        return np.stack([p1[..., a] * p2[..., b] for a, b in self.terms], axis=-1)

    def partial(self, v1, v2, axis: int) -> np.ndarray:
        """First partial along axis 1 or 2 of every term."""
        if axis not in (1, 2):
            raise ValidationError("axis must be 1 or 2")
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        p1, p2 = self._powers(v1), self._powers(v2)
        cols = []
        for a, b in self.terms:
            if axis == 1:
                cols.append(a * p1[..., a - 1] * p2[..., b] if a > 0 else np.zeros_like(v1))
            else:
                cols.append(b * p1[..., a] * p2[..., b - 1] if b > 0 else np.zeros_like(v1))
        return np.stack(cols, axis=-1)

    def cross_partial(self, v1, v2) -> np.ndarray:
        """d^2/dv1 dv2 of every term."""
        v1, v2 = np.broadcast_arrays(np.asarray(v1, float), np.asarray(v2, float))
        p1, p2 = self._powers(v1), self._powers(v2)
        cols = []
        for a, b in self.terms:
            if a > 0 and b > 0:
                cols.append(a * b * p1[..., a - 1] * p2[..., b - 1])
            else:
                cols.append(np.zeros_like(v1))
        return np.stack(cols, axis=-1)

    @staticmethod
    def _axis_anti(p: np.ndarray, exponent: int, treated: bool) -> np.ndarray:
        # treated: int_0^p t^k dt; untreated: int_p^1 t^k dt
        k = exponent + 1
        return (p**k) / k if treated else (1.0 - p**k) / k

    @staticmethod
    def _axis_anti_partial(p: np.ndarray, exponent: int, treated: bool) -> np.ndarray:
        # d/dp of the directed antiderivative above
        return p**exponent if treated else -(p**exponent)

    def antiderivative(self, p1, p2, seq: Sequence[int]) -> np.ndarray:
        """Directed double antiderivative of every term at (p1, p2)."""
        d1, d2 = (int(s) for s in seq)
        p1, p2 = np.broadcast_arrays(np.asarray(p1, float), np.asarray(p2, float))
        return np.stack(
            [
                self._axis_anti(p1, a, d1 == 1) * self._axis_anti(p2, b, d2 == 1)
                for a, b in self.terms
            ],
            axis=-1,
        )

    def antideriv_cross_partial(self, p1, p2, seq: Sequence[int]) -> np.ndarray:
        """Analytic d^2/dp1 dp2 of the directed double antiderivative.

        Equals (-1)^(number of untreated periods) times eval(p1, p2), which is
        the algebraic identity behind the sign rule.
        """
        d1, d2 = (int(s) for s in seq)
        p1, p2 = np.broadcast_arrays(np.asarray(p1, float), np.asarray(p2, float))
        return np.stack(
            [
                self._axis_anti_partial(p1, a, d1 == 1)
                * self._axis_anti_partial(p2, b, d2 == 1)
                for a, b in self.terms
            ],
            axis=-1,
        )

    def box_integral(self) -> np.ndarray:
        """Integral of every term over the unit square: 1/((a+1)(b+1))."""
        return np.array([1.0 / ((a + 1) * (b + 1)) for a, b in self.terms])
