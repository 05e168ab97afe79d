"""Linearly separable datasets: construction, synthetic generators, and CSV I/O.

All generators are deterministic functions of their spec: the random families
draw from a PCG64 stream seeded with ``spec.seed``, so identical specs yield
bit-identical datasets on every platform.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, ParseError

FAMILIES = ("toy", "sphere-cap", "ball-cap")

#: slack allowed on the unit-ball constraint for stored points
NORM_SLACK = 1e-12


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with +-1 labels; every point lies in the unit ball.

    ``points`` has shape (n, d) and ``labels`` shape (n,) with values exactly
    -1.0 or +1.0. Instances are immutable after construction and safe to share
    across concurrent runs.
    """

    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 1:
            raise DatasetError(
                f"points must be a (n, d) array with n, d >= 1, got shape {points.shape}"
            )
        if labels.shape != (points.shape[0],):
            raise DatasetError(
                f"labels shape {labels.shape} does not match {points.shape[0]} points"
            )
        if not np.all(np.isfinite(points)):
            raise DatasetError("points contain non-finite entries")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            bad = np.flatnonzero(~np.isin(labels, (-1.0, 1.0)))
            raise DatasetError(f"labels must be exactly -1 or +1; offending rows: {bad.tolist()}")
        norms = np.linalg.norm(points, axis=1)
        over = np.flatnonzero(norms > 1.0 + NORM_SLACK)
        if over.size:
            raise DatasetError(
                f"point norms must be <= 1; offending rows: {over.tolist()} "
                f"(max norm {norms.max():.17g})"
            )
        object.__setattr__(self, "points", _frozen(points))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "_signed", _frozen(labels[:, None] * points))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def signed_points(self) -> np.ndarray:
        """Label-signed points, one row per sample: labels[i] * points[i]."""
        return self._signed


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic family draw.

    ``family`` is one of ``toy``, ``sphere-cap``, ``ball-cap``; ``gamma_star``
    is the exact maximum margin in (0, 1).
    """

    family: str
    gamma_star: float
    n: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DatasetError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if not (0.0 < self.gamma_star < 1.0):
            raise DatasetError(f"gamma_star must be in (0, 1), got {self.gamma_star}")
        if self.family == "toy" and self.n != 3:
            raise DatasetError(f"toy family has exactly 3 points, got n={self.n}")
        if self.family != "toy" and self.n < 2:
            raise DatasetError(f"family {self.family!r} needs n >= 2, got n={self.n}")
        if self.seed < 0:
            raise DatasetError(f"seed must be non-negative, got {self.seed}")


def make_toy(gamma_star: float) -> Dataset:
    """Three unit-circle points in 2-D whose maximum margin is exactly gamma_star.

    The two positive points sit at first coordinate ``gamma_star`` and the
    negative point mirrors the second positive one, so the label-signed third
    point duplicates the first. The max-margin direction is (1, 0).
    """
    if not (0.0 < gamma_star < 1.0):
        raise DatasetError(f"gamma_star must be in (0, 1), got {gamma_star}")
    g = float(gamma_star)
    s = math.sqrt(1.0 - g * g)
    points = np.array([[g, s], [g, -s], [-g, -s]])
    labels = np.array([1.0, 1.0, -1.0])
    return Dataset(points, labels)


def _pinned_boundary(g: float) -> tuple[np.ndarray, np.ndarray]:
    s = math.sqrt(1.0 - g * g)
    pins = np.array([[g, s], [-g, s]])
    return pins, np.array([1.0, -1.0])


def make_sphere_cap(spec: SyntheticSpec) -> Dataset:
    """Points on the unit circle with |x1| >= gamma_star, labelled by sign(x1).

    The first two points are pinned on the cap boundary so the maximum margin
    is exactly ``spec.gamma_star`` with max-margin direction (1, 0). Remaining
    points are drawn angle-uniformly on the two admissible arcs.
    """
    if spec.family != "sphere-cap":
        raise DatasetError(f"spec family is {spec.family!r}, expected 'sphere-cap'")
    g = spec.gamma_star
    pins, pin_labels = _pinned_boundary(g)
    rng = _rng(spec.seed)
    theta_cap = math.acos(g)
    extra = []
    for _ in range(spec.n - 2):
        theta = rng.uniform(-theta_cap, theta_cap)
        if rng.integers(0, 2):
            theta = math.pi - theta
        extra.append((math.cos(theta), math.sin(theta)))
    points = np.vstack([pins, np.array(extra).reshape(-1, 2)])
    labels = np.concatenate([pin_labels, np.sign(points[2:, 0])])
    return Dataset(points, labels)


def make_ball_cap(spec: SyntheticSpec) -> Dataset:
    """Points in the unit ball with |x1| >= gamma_star, labelled by sign(x1).

    Same pinned boundary points as the circle family; the remaining points are
    rejection-sampled uniformly from the admissible part of the ball.
    """
    if spec.family != "ball-cap":
        raise DatasetError(f"spec family is {spec.family!r}, expected 'ball-cap'")
    g = spec.gamma_star
    pins, pin_labels = _pinned_boundary(g)
    rng = _rng(spec.seed)
    extra = []
    while len(extra) < spec.n - 2:
        x = rng.uniform(-1.0, 1.0, size=2)
        if x[0] * x[0] + x[1] * x[1] <= 1.0 and abs(x[0]) >= g:
            extra.append(x)
    points = np.vstack([pins, np.array(extra).reshape(-1, 2)])
    labels = np.concatenate([pin_labels, np.sign(points[2:, 0])])
    return Dataset(points, labels)


def from_spec(spec: SyntheticSpec) -> Dataset:
    """Dispatch a spec to its generator."""
    if spec.family == "toy":
        return make_toy(spec.gamma_star)
    if spec.family == "sphere-cap":
        return make_sphere_cap(spec)
    return make_ball_cap(spec)


def save_csv(ds: Dataset, path) -> None:
    """Write ``x0,...,x{d-1},y`` rows with round-trip-exact float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(ds.d)] + ["y"])
        for x, y in zip(ds.points, ds.labels):
            writer.writerow([f"{v:.17g}" for v in x] + [f"{int(y):d}"])


def load_csv(path, rescale: bool = False) -> Dataset:
    """Read a dataset CSV written by :func:`save_csv`.

    Rows whose feature norm exceeds 1 are rejected with a row listing unless
    ``rescale`` is set, in which case all points are divided by the largest
    feature norm.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        d = len(header) - 1
        expected = [f"x{j}" for j in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise ParseError(f"{path}: row 1: expected header x0,...,x{max(d - 1, 0)},y")
        points, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ParseError(f"{path}: row {lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                values = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"{path}: row {lineno}: {exc}") from None
            if values[-1] not in (-1.0, 1.0):
                raise ParseError(f"{path}: row {lineno}: label must be -1 or +1, got {row[-1]}")
            points.append(values[:-1])
            labels.append(values[-1])
    if not points:
        raise ParseError(f"{path}: no data rows")
    points = np.array(points)
    labels = np.array(labels)
    norms = np.linalg.norm(points, axis=1)
    over = np.flatnonzero(norms > 1.0 + NORM_SLACK)
    if over.size:
        if not rescale:
            rows = [int(i) + 2 for i in over]
            raise DatasetError(
                f"{path}: feature norms exceed 1 in rows {rows}; pass rescale=True "
                "to divide all points by the largest norm"
            )
        points = points / norms.max()
    return Dataset(points, labels)
