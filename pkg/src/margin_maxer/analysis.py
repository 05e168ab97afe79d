"""Convergence-rate fitting, cylinder sampling of the centripetal field, and grids.

Rate families are always fitted in their linearizing coordinates and reported
side by side; nothing here auto-selects a winner, because finite windows make
that choice fragile. Consumers compare the goodness-of-fit values themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import centripetal_velocity, evaluate_loss
from .data import Dataset
from .errors import (
    ConfigError,
    DegenerateDirectionError,
    DimensionMismatchError,
    RateFitError,
)
from .optim import TrajectoryRecord
from .reference import MaxMarginSolution

RATE_FAMILIES = ("power-law", "exponential", "inverse-log")

#: minimum number of positive rows a fit window must contain
MIN_FIT_ROWS = 10


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of one decay family over a trajectory window.

    ``slope`` is the exponent (power law), the per-iteration log rate
    (exponential), or the amplitude of the reciprocal-log term (inverse log);
    ``r2`` is computed on the residuals of the linearizing transform.
    """

    family: str
    slope: float
    log_c: float
    r2: float
    window: tuple[float, float]
    intercept: float
    n_rows: int

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "slope": self.slope,
            "log_c": self.log_c,
            "r2": self.r2,
            "window": [float(self.window[0]), float(self.window[1])],
        }


def _linear_fit(x: np.ndarray, y: np.ndarray):
    x_bar = x.mean()
    y_bar = y.mean()
    xc = x - x_bar
    yc = y - y_bar
    denom = float(xc @ xc)
    if denom == 0.0:
        raise RateFitError("degenerate fit window: all abscissae coincide")
    slope = float(xc @ yc) / denom
    intercept = y_bar - slope * x_bar
    residual = y - (slope * x + intercept)
    ss_res = float(residual @ residual)
    ss_tot = float(yc @ yc)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


def fit_rate(
    record: TrajectoryRecord,
    family: str,
    window: tuple[float, float],
    column: str = "margin_gap",
) -> RateFit:
    """Fit one decay family to a trajectory column over ``window``.

    Only rows with a strictly positive value enter the fit; log-abscissa
    families additionally need iteration counts where their transform is
    defined.
    """
    if family not in RATE_FAMILIES:
        raise ConfigError(f"family {family!r} not in {RATE_FAMILIES}")
    lo, hi = window
    if not lo <= hi:
        raise ConfigError(f"empty window {window}")
    t = record.t.astype(np.float64)
    g = record.column(column).astype(np.float64)
    inside = (t >= lo) & (t <= hi) & np.isfinite(g)
    if not inside.any():
        raise RateFitError(f"no rows with finite {column} inside window {window}")
    if np.all(g[inside] <= 0.0):
        raise RateFitError(f"all {column} values in {window} are <= 0 (converged exactly)")
    usable = inside & (g > 0.0)
    if family == "power-law":
        usable &= t > 0.0
    elif family == "inverse-log":
        usable &= t > 1.0
    count = int(usable.sum())
    if count < MIN_FIT_ROWS:
        raise RateFitError(
            f"insufficient data: {count} positive rows in window {window}, need {MIN_FIT_ROWS}"
        )
    tw = t[usable]
    gw = g[usable]
    if family == "power-law":
        slope, intercept, r2 = _linear_fit(np.log(tw), np.log(gw))
        log_c = intercept
    elif family == "exponential":
        slope, intercept, r2 = _linear_fit(tw, np.log(gw))
        log_c = intercept
    else:
        slope, intercept, r2 = _linear_fit(1.0 / np.log(tw), gw)
        log_c = math.log(slope) if slope > 0 else math.nan
    return RateFit(
        family=family,
        slope=slope,
        log_c=log_c,
        r2=r2,
        window=(float(lo), float(hi)),
        intercept=intercept,
        n_rows=count,
    )


def fit_all_rates(record, window, column="margin_gap") -> dict:
    """All three family fits keyed by family; errors become {'error': message}."""
    out = {}
    for family in RATE_FAMILIES:
        try:
            out[family] = fit_rate(record, family, window, column=column).to_dict()
        except RateFitError as exc:
            out[family] = {"error": str(exc)}
    return out


@dataclass(frozen=True)
class CylinderSpec:
    """Sampling region: orthogonal distance in [d_lo, d_hi], height at least ``height``."""

    d_lo: float
    d_hi: float
    height: float
    samples: int
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.d_lo <= self.d_hi:
            raise ConfigError(f"need 0 < d_lo <= d_hi, got ({self.d_lo}, {self.d_hi})")
        if not self.height > 0.0:
            raise ConfigError(f"height must be positive, got {self.height}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")


def _span_basis(ds: Dataset) -> np.ndarray:
    _, sing, vt = np.linalg.svd(ds.points, full_matrices=False)
    if sing.size == 0 or sing[0] == 0.0:
        raise DegenerateDirectionError("dataset spans only the origin")
    rank = int(np.sum(sing > sing[0] * 1e-12))
    return vt[:rank]


def min_centripetal_on_cylinder(
    ds: Dataset,
    solution: MaxMarginSolution,
    spec: CylinderSpec,
    h_max: float,
):
    """Sampled minimum of the centripetal velocity over a hollow cylinder.

    Draws heights uniformly in [height, h_max], orthogonal distances in
    [d_lo, d_hi], and orthogonal directions uniformly on the unit sphere of
    the data span's complement of the max-margin direction. Samples are drawn
    one at a time from a single seeded stream, so runs with nested sample
    counts and the same seed share their prefix.

    Returns ``(min_value, argmin_point)``.
    """
    if not h_max > spec.height:
        raise ConfigError(f"h_max must exceed the cylinder height, got {h_max}")
    basis = _span_basis(ds)
    if basis.shape[0] < 2:
        raise DegenerateDirectionError(
            "data span is 1-dimensional; no orthogonal direction exists"
        )
    axis = basis @ solution.w_star
    axis_norm = float(np.linalg.norm(axis))
    if axis_norm < 1.0 - 1e-6:
        raise ConfigError("max-margin direction does not lie in the data span")
    axis = axis / axis_norm
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    best = math.inf
    best_point = None
    for _ in range(spec.samples):
        h = rng.uniform(spec.height, h_max)
        radial = rng.uniform(spec.d_lo, spec.d_hi)
        raw = rng.standard_normal(basis.shape[0])
        ortho = raw - float(raw @ axis) * axis
        ortho_norm = float(np.linalg.norm(ortho))
        while ortho_norm == 0.0:
            raw = rng.standard_normal(basis.shape[0])
            ortho = raw - float(raw @ axis) * axis
            ortho_norm = float(np.linalg.norm(ortho))
        point = (h * axis + (radial / ortho_norm) * ortho) @ basis
        value = centripetal_velocity(point, solution.w_star, ds)
        if value < best:
            best = value
            best_point = point
    return float(best), best_point


@dataclass(frozen=True)
class FieldGrid:
    """Planar grid of unit descent directions and centripetal velocities."""

    points: np.ndarray
    directions: np.ndarray
    phi: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("w1,w2,dir1,dir2,phi\n")
            for p, u, v in zip(self.points, self.directions, self.phi):
                fh.write(f"{p[0]:.17g},{p[1]:.17g},{u[0]:.17g},{u[1]:.17g},{v:.17g}\n")


def field_grid(
    ds: Dataset,
    solution: MaxMarginSolution,
    bounds: tuple[float, float, float, float],
    resolution: int | tuple[int, int],
    slice_basis: np.ndarray | None = None,
) -> FieldGrid:
    """Sample the negated normalized-gradient direction on a rectangular grid.

    The direction at each grid point is reported as a unit vector; the
    centripetal velocity is NaN where the point sits on the max-margin ray.
    Datasets with more than two dimensions need an orthonormal ``slice_basis``
    of shape (2, d); directions are then reported as in-plane components.
    """
    if slice_basis is None:
        if ds.d != 2:
            raise DimensionMismatchError(
                f"dataset dimension is {ds.d}; supply a 2-D slice basis"
            )
        plane = np.eye(2)
    else:
        plane = np.asarray(slice_basis, dtype=np.float64)
        if plane.shape != (2, ds.d):
            raise DimensionMismatchError(f"slice basis must have shape (2, {ds.d})")
        if not np.allclose(plane @ plane.T, np.eye(2), atol=1e-10):
            raise ConfigError("slice basis must be orthonormal")
    x_lo, x_hi, y_lo, y_hi = bounds
    if not (x_lo < x_hi and y_lo < y_hi):
        raise ConfigError(f"bounds must be ordered, got {bounds}")
    nx, ny = (resolution, resolution) if isinstance(resolution, int) else resolution
    if nx < 2 or ny < 2:
        raise ConfigError(f"resolution must be >= 2 per axis, got {(nx, ny)}")
    xs = np.linspace(x_lo, x_hi, nx)
    ys = np.linspace(y_lo, y_hi, ny)
    points, directions, phis = [], [], []
    for b in ys:
        for a in xs:
            w = a * plane[0] + b * plane[1]
            grad = evaluate_loss(w, ds).normalized_gradient
            unit = -grad / np.linalg.norm(grad)
            try:
                phi = centripetal_velocity(w, solution.w_star, ds)
            except DegenerateDirectionError:
                phi = math.nan
            points.append((a, b))
            directions.append(plane @ unit)
            phis.append(phi)
    return FieldGrid(
        points=np.array(points),
        directions=np.array(directions),
        phi=np.array(phis),
    )


def attractor_band(gamma_star: float) -> tuple[float, float]:
    """Height band where the toy family's orthogonal velocity nearly vanishes.

    The midpoint of the band is the exact zero of the height update.
    """
    if not (0.0 < gamma_star < 1.0):
        raise ConfigError(f"gamma_star must be in (0, 1), got {gamma_star}")
    s = math.sqrt(1.0 - gamma_star * gamma_star)
    return math.log(2.0) / (4.0 * s), 3.0 * math.log(2.0) / (4.0 * s)


def attractor_height(gamma_star: float) -> float:
    """Exact zero of the toy family's height update; midpoint of the band."""
    lo, hi = attractor_band(gamma_star)
    return 0.5 * (lo + hi)
