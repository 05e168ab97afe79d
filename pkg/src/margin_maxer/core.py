"""Exponential-loss evaluation carried in log space, plus margin geometry.

The mean exponential loss underflows once the iterate norm passes a few
hundred, so nothing here ever materializes the raw loss: evaluation returns
its natural log together with the softmax sample weights, and the gradient is
always the loss-normalized ratio, which is softmax-representable at any norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateDirectionError,
    DimensionMismatchError,
    NonUnitVectorError,
    ZeroVectorError,
)

#: allowed deviation of a reference direction from unit length
UNIT_TOLERANCE = 1e-10

#: below this orthogonal-component norm the centripetal direction is undefined
PERP_DEGENERACY = 1e-14


def _as_weight(w, d: int) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (d,):
        raise DimensionMismatchError(f"weight shape {w.shape} does not match dimension {d}")
    if not np.all(np.isfinite(w)):
        raise DimensionMismatchError("weight contains non-finite entries")
    return w


def _as_unit(w_star, d: int) -> np.ndarray:
    w_star = _as_weight(w_star, d)
    norm = math.sqrt(float(w_star @ w_star))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise NonUnitVectorError(f"reference direction has norm {norm!r}, expected 1")
    return w_star


@dataclass(frozen=True)
class LossEval:
    """Loss state at one weight: log loss, softmax weights, gradient/loss ratio.

    ``soft_weights`` sums to 1 and weights each sample by exp(-signed margin);
    ``normalized_gradient`` equals the gradient divided by the loss, i.e. the
    negated soft-weighted mean of the label-signed points.
    """

    log_loss: float
    soft_weights: np.ndarray
    normalized_gradient: np.ndarray


def _loss_state(z: np.ndarray, w: np.ndarray, log_n: float):
    neg = -(z @ w)
    peak = neg.max()
    e = np.exp(neg - peak)
    total = float(e.sum())
    p = e / total
    log_loss = float(peak) + math.log(total) - log_n
    return neg, log_loss, p, -(p @ z)


def evaluate_loss(w, ds: Dataset) -> LossEval:
    """Evaluate the loss state at ``w``; stable for arbitrarily large norms."""
    w = _as_weight(w, ds.d)
    _, log_loss, p, grad = _loss_state(ds.signed_points, w, math.log(ds.n))
    return LossEval(log_loss, p, grad)


def log_loss(w, ds: Dataset) -> float:
    """Natural log of the mean exponential loss, via the shifted-exponent sum."""
    return evaluate_loss(w, ds).log_loss


def normalized_gradient(w, ds: Dataset) -> np.ndarray:
    """Gradient divided by loss: the negated softmax average of signed points."""
    return evaluate_loss(w, ds).normalized_gradient


def margin(w, ds: Dataset) -> float:
    """Normalized margin: smallest signed inner product of w/|w| with the data."""
    w = _as_weight(w, ds.d)
    norm = math.sqrt(float(w @ w))
    if norm == 0.0:
        raise ZeroVectorError("margin undefined for the zero vector")
    return float((ds.signed_points @ w).min() / norm)


def margin_argmin(w, ds: Dataset) -> int:
    """Smallest sample index attaining the minimum margin (deterministic ties)."""
    w = _as_weight(w, ds.d)
    return int(np.argmin(ds.signed_points @ w))


def _pair(w, w_star) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise DimensionMismatchError(f"weight must be a vector, got shape {w.shape}")
    return w, _as_unit(w_star, w.shape[0])


def project_para(w, w_star) -> np.ndarray:
    """Component of ``w`` along the unit direction ``w_star``."""
    w, w_star = _pair(w, w_star)
    return float(w @ w_star) * w_star


def project_perp(w, w_star) -> np.ndarray:
    """Component of ``w`` orthogonal to the unit direction ``w_star``."""
    w, w_star = _pair(w, w_star)
    return w - float(w @ w_star) * w_star


def directional_error(w, w_star) -> float:
    """Distance of the normalized iterate to the reference direction."""
    w, w_star = _pair(w, w_star)
    norm = math.sqrt(float(w @ w))
    if norm == 0.0:
        raise ZeroVectorError("directional error undefined for the zero vector")
    diff = w / norm - w_star
    return math.sqrt(float(diff @ diff))


def centripetal_velocity(w, w_star, ds: Dataset) -> float:
    """Speed of the negated normalized gradient toward the reference ray.

    Positive values mean the flow pushes the orthogonal component of ``w``
    toward zero. Undefined (raises) when ``w`` already lies on the ray.
    """
    w = _as_weight(w, ds.d)
    perp = project_perp(w, w_star)
    perp_norm = math.sqrt(float(perp @ perp))
    if perp_norm < PERP_DEGENERACY:
        raise DegenerateDirectionError(
            "orthogonal component is numerically zero; centripetal direction undefined"
        )
    grad = evaluate_loss(w, ds).normalized_gradient
    return float(grad @ perp) / perp_norm
