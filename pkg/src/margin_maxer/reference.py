"""Ground-truth max-margin solutions and closed-form oracles for the toy family.

Three independent routes to the max-margin pair (direction, margin):

* ``solve_exact_synthetic`` reads it off a verified synthetic construction,
* ``solve_dual`` runs cyclic coordinate ascent on the hard-margin dual,
* ``approx_by_ngd`` estimates it from a long loss-normalized descent run.

The toy oracles replay the closed-form recursions of the three-point family
without touching the generic steppers, so they can cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .data import Dataset, make_toy
from .errors import ConfigError, FamilyMismatchError, NonSeparableError
from .optim import PHASE_WARMUP, Schedule, TrajectoryRecord

#: margin-equality slack used to scan for support vectors
SUPPORT_MARGIN_TOL = 1e-9

#: a dual coefficient counts as active above this fraction of the largest one
SUPPORT_ALPHA_FRACTION = 1e-6


@dataclass(frozen=True)
class MaxMarginSolution:
    """Unit max-margin direction with its margin, support set, and dual weights.

    ``gamma_sub`` is the smallest margin among non-support samples (infinity
    when every sample is support). ``alpha`` holds nonnegative coefficients
    over ``support`` reconstructing the direction from label-signed points;
    the reconstruction residual is reported, not enforced.
    """

    w_star: np.ndarray
    gamma_star: float
    support: np.ndarray
    gamma_sub: float
    alpha: np.ndarray
    method: str
    residuals: dict

    def to_dict(self) -> dict:
        return {
            "w_star": [float(v) for v in self.w_star],
            "gamma_star": self.gamma_star,
            "support": [int(i) for i in self.support],
            "gamma_sub": None if math.isinf(self.gamma_sub) else self.gamma_sub,
            "method": self.method,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def _support_scan(z: np.ndarray, w_star: np.ndarray, gamma_star: float, tol=SUPPORT_MARGIN_TOL):
    margins = z @ w_star
    on_margin = margins <= gamma_star + tol
    support = np.flatnonzero(on_margin)
    rest = margins[~on_margin]
    gamma_sub = float(rest.min()) if rest.size else math.inf
    return support, gamma_sub


def _representation(z: np.ndarray, support: np.ndarray, w_star: np.ndarray):
    alpha, residual = nnls(z[support].T, w_star)
    return alpha, float(residual)


def _verify_cap(ds: Dataset, family: str) -> float:
    g = float(ds.points[0, 0])
    if ds.d != 2 or ds.n < 2:
        raise FamilyMismatchError(f"{family} datasets are 2-D with n >= 2")
    if not (0.0 < g < 1.0):
        raise FamilyMismatchError(f"first coordinate of the first pin must be in (0, 1), got {g}")
    s = math.sqrt(1.0 - g * g)
    pins = np.array([[g, s], [-g, s]])
    if not np.allclose(ds.points[:2], pins, rtol=0.0, atol=1e-12):
        raise FamilyMismatchError("boundary pins do not match the cap construction")
    if not np.array_equal(ds.labels, np.sign(ds.points[:, 0])):
        raise FamilyMismatchError("labels must equal the sign of the first coordinate")
    if np.any(np.abs(ds.points[:, 0]) < g - 1e-12):
        raise FamilyMismatchError("points violate the cap bound on the first coordinate")
    norms = np.linalg.norm(ds.points, axis=1)
    if family == "sphere-cap" and not np.allclose(norms, 1.0, rtol=0.0, atol=1e-9):
        raise FamilyMismatchError("sphere-cap points must lie on the unit circle")
    return g


def solve_exact_synthetic(ds: Dataset, family: str) -> MaxMarginSolution:
    """Max-margin solution of a verified synthetic dataset, by construction.

    Verifies that ``ds`` actually matches the claimed family before answering;
    raises on any structural mismatch.
    """
    if family == "toy":
        if ds.n != 3 or ds.d != 2:
            raise FamilyMismatchError("toy datasets have exactly 3 points in 2-D")
        g = float(ds.points[0, 0])
        if not (0.0 < g < 1.0):
            raise FamilyMismatchError(f"toy margin parameter must be in (0, 1), got {g}")
        expected = make_toy(g)
        if not (
            np.allclose(ds.points, expected.points, rtol=0.0, atol=1e-12)
            and np.array_equal(ds.labels, expected.labels)
        ):
            raise FamilyMismatchError("points do not match the three-point construction")
    elif family in ("sphere-cap", "ball-cap"):
        g = _verify_cap(ds, family)
    else:
        raise FamilyMismatchError(f"unknown family {family!r}")
    w_star = np.zeros(ds.d)
    w_star[0] = 1.0
    z = ds.signed_points
    achieved = float((z @ w_star).min())
    if abs(achieved - g) > 1e-12:
        raise FamilyMismatchError(
            f"margin at the construction direction is {achieved!r}, expected {g!r}"
        )
    support, gamma_sub = _support_scan(z, w_star, g)
    alpha, representation = _representation(z, support, w_star)
    return MaxMarginSolution(
        w_star=w_star,
        gamma_star=g,
        support=support,
        gamma_sub=gamma_sub,
        alpha=alpha,
        method="exact",
        residuals={"margin_check": achieved - g, "representation": representation},
    )


def solve_dual(ds: Dataset, max_sweeps: int = 20000, tol: float = 1e-9) -> MaxMarginSolution:
    """Hard-margin solution by cyclic coordinate ascent on the dual.

    Maximizes sum(a) - |sum(a_i z_i)|^2 / 2 over a >= 0 with exact coordinate
    updates, stopping once primal feasibility and complementary slackness both
    sit within ``tol``. Failure to certify within ``max_sweeps`` (or a runaway
    coefficient sum) is reported as non-separability.
    """
    if max_sweeps < 1:
        raise ConfigError(f"max_sweeps must be >= 1, got {max_sweeps}")
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol}")
    z = ds.signed_points
    n, d = z.shape
    diag = np.einsum("ij,ij->i", z, z)
    if np.any(diag == 0.0):
        raise NonSeparableError("a zero sample point admits no positive margin")
    rows = [z[i] for i in range(n)]
    u = np.zeros(d)
    alpha = np.zeros(n)
    feasibility = complementarity = math.inf
    for _ in range(max_sweeps):
        for i in range(n):
            zi = rows[i]
            step = (1.0 - float(u @ zi)) / diag[i]
            updated = alpha[i] + step
            if updated < 0.0:
                updated = 0.0
            delta = updated - alpha[i]
            if delta != 0.0:
                u = u + delta * zi
                alpha[i] = updated
        margins_u = z @ u
        feasibility = max(0.0, 1.0 - float(margins_u.min()))
        complementarity = float(np.max(np.abs(alpha * (margins_u - 1.0))))
        if feasibility <= tol and complementarity <= tol:
            break
        if alpha.sum() > 1e10:
            raise NonSeparableError("dual coefficients diverge; data are not separable")
    else:
        raise NonSeparableError(
            f"KKT residual stalled above {tol:g} after {max_sweeps} sweeps "
            "(data may be non-separable or the budget too small)"
        )
    u_norm = math.sqrt(float(u @ u))
    gamma_star = 1.0 / u_norm
    w_star = u * gamma_star
    support = np.flatnonzero(alpha > SUPPORT_ALPHA_FRACTION * alpha.max())
    margins = z @ w_star
    off = np.setdiff1d(np.arange(n), support)
    gamma_sub = float(margins[off].min()) if off.size else math.inf
    scaled = alpha[support] * gamma_star
    representation = float(np.linalg.norm(z[support].T @ scaled - w_star))
    return MaxMarginSolution(
        w_star=w_star,
        gamma_star=gamma_star,
        support=support,
        gamma_sub=gamma_sub,
        alpha=scaled,
        method="dual",
        residuals={
            "kkt_feasibility": feasibility,
            "kkt_complementarity": complementarity,
            "representation": representation,
        },
    )


def approx_by_ngd(ds: Dataset, steps: int = 100000, eta: float = 1.0) -> MaxMarginSolution:
    """Margin estimate from a long loss-normalized descent run.

    Returns the normalized final iterate and its margin as lower estimates of
    the max-margin pair; the support scan uses a step-count-dependent slack
    because the direction is only O(1/steps) accurate.
    """
    if steps < 1000:
        raise ConfigError(f"steps must be >= 1000 for a usable estimate, got {steps}")
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    z = ds.signed_points
    log_n = math.log(ds.n)
    w = np.zeros(ds.d)
    for _ in range(steps):
        neg = -(z @ w)
        peak = neg.max()
        e = np.exp(neg - peak)
        p = e / e.sum()
        w = w + eta * (p @ z)
    norm = math.sqrt(float(w @ w))
    if norm == 0.0:
        raise NonSeparableError("descent never left the origin; no separating direction")
    w_hat = w / norm
    gamma_hat = float((z @ w_hat).min())
    if gamma_hat <= 0.0:
        raise NonSeparableError(
            f"margin is {gamma_hat!r} after {steps} steps; data look non-separable"
        )
    support_tol = max(SUPPORT_MARGIN_TOL, 10.0 / steps)
    support, gamma_sub = _support_scan(z, w_hat, gamma_hat, tol=support_tol)
    alpha, representation = _representation(z, support, w_hat)
    return MaxMarginSolution(
        w_star=w_hat,
        gamma_star=gamma_hat,
        support=support,
        gamma_sub=gamma_sub,
        alpha=alpha,
        method="ngd-approx",
        residuals={"support_tolerance": support_tol, "representation": representation},
    )


def rank_diagnostics(ds: Dataset, solution: MaxMarginSolution) -> dict:
    """Ranks of the support points and of the full dataset."""
    return {
        "rank_support": int(np.linalg.matrix_rank(ds.points[solution.support])),
        "rank_all": int(np.linalg.matrix_rank(ds.points)),
    }


def _check_toy_gamma(gamma_star: float) -> tuple[float, float]:
    if not (0.0 < gamma_star < 1.0):
        raise ConfigError(f"gamma_star must be in (0, 1), got {gamma_star}")
    g = float(gamma_star)
    return g, math.sqrt(1.0 - g * g)


def toy_heights(gamma_star: float, steps: int) -> np.ndarray:
    """Second coordinates of the toy loss-normalized run, from the decoupled recursion.

    Works in the shifted-log variable x = 2 * w2 * sqrt(1 - g^2) - log 2, which
    starts at -log 2 and contracts into [-log2 / 2, log2 / 2] after one step.
    """
    g, s = _check_toy_gamma(gamma_star)
    two_s2 = 2.0 * (1.0 - g * g)
    x = -math.log(2.0)
    heights = np.empty(steps + 1)
    heights[0] = 0.0
    for t in range(1, steps + 1):
        ex = math.exp(x)
        x = x + two_s2 * (1.0 - ex) / (1.0 + ex)
        heights[t] = (x + math.log(2.0)) / (2.0 * s)
    return heights


def toy_oracle_ngd(gamma_star: float, steps: int) -> TrajectoryRecord:
    """Closed-form toy trajectory of unit-step loss-normalized descent from zero.

    The first coordinate advances by exactly gamma_star per step; the second
    follows the scalar height recursion. All trajectory columns are computed
    from these closed forms, independent of the generic steppers.
    """
    g, s = _check_toy_gamma(gamma_star)
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    w1 = g * np.arange(steps + 1, dtype=np.float64)
    w2 = toy_heights(g, steps)
    norm = np.hypot(w1, w2)
    with np.errstate(invalid="ignore", divide="ignore"):
        margin = (g * w1 - s * np.abs(w2)) / norm
        dir_err = np.hypot(w1 / norm - 1.0, w2 / norm)
    margin[0] = dir_err[0] = math.nan
    sw2 = s * w2
    log_loss = -g * w1 + np.log(2.0 * np.exp(-sw2) + np.exp(sw2)) - math.log(3.0)
    return TrajectoryRecord(
        t=np.arange(steps + 1, dtype=np.int64),
        phase=[PHASE_WARMUP] * (steps + 1),
        norm=norm,
        margin=margin,
        margin_gap=g - margin,
        dir_err=dir_err,
        log_loss=log_loss,
        final_weight=np.array([w1[-1], w2[-1]]),
        iterates=np.column_stack([w1, w2]),
        gamma_star=g,
    )


def toy_even_step_contraction(gamma_star: float) -> float:
    """Height reached by one unit loss-normalized step from height one on the toy data.

    The even-step axis coordinate of the unit-height rescaling run grows by the
    reciprocal of this factor per cycle; the geometric recursion only makes
    sense while the factor lies in (0, 1).
    """
    g, s = _check_toy_gamma(gamma_star)
    e = math.exp(2.0 * s)
    return 1.0 + s * (2.0 - e) / (2.0 + e)


def toy_oracle_prgd(gamma_star: float, cycles: int) -> np.ndarray:
    """First coordinates at even steps of the unit-height rescaling run.

    Entry k is the axis coordinate right after rescale k, which obeys
    w1 <- (w1 + gamma_star) / q with q the even-step contraction; the sequence
    grows geometrically like (1/q)**k.
    """
    g, s = _check_toy_gamma(gamma_star)
    if cycles < 0:
        raise ConfigError(f"cycles must be >= 0, got {cycles}")
    q = toy_even_step_contraction(g)
    if not (0.0 < q < 1.0):
        raise ConfigError(
            f"even-step contraction is {q!r}, outside (0, 1); "
            "the unit-height schedule does not apply at this margin"
        )
    w1 = np.empty(cycles + 1)
    w1[0] = 3.0 * g / s
    for k in range(cycles):
        w1[k + 1] = (w1[k] + g) / q
    return w1


def toy_unit_height_schedule(gamma_star: float, cycles: int) -> Schedule:
    """Explicit schedule that pins the toy run's height to one at every even step.

    Cycle times are 1, 3, 5, ... and radius k equals the norm of the closed-form
    iterate (w1_even[k], 1). Start the run from one unit loss-normalized step
    out of zero so the first rescale happens at t = 1.
    """
    w1 = toy_oracle_prgd(gamma_star, cycles)
    times = tuple(2 * k + 1 for k in range(cycles + 1))
    radii = tuple(float(np.hypot(v, 1.0)) for v in w1)
    return Schedule(kind="explicit", times=times, radii=radii)
