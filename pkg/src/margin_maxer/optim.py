"""Steppers and runners: plain, loss-normalized, and progressive-rescaling descent.

A progressive run is organized in cycles: at cycle k the iterate is stretched
to radius R_k along its current direction, then loss-normalized steps run
until the next cycle time, each projected back onto the ball of radius R_k.
Rescaling and projection are radial, so they change neither the margin nor
the direction of the iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import _loss_state
from .data import Dataset
from .errors import ConfigError, DegenerateDirectionError, DimensionMismatchError

PHASE_WARMUP = "warmup"
PHASE_RESCALE = "rescale"
PHASE_NGD = "ngd-step"

SCHEDULE_KINDS = ("exp-radius", "poly-radius", "poly-both", "explicit")

#: smallest norm that still defines a rescaling direction
RESCALE_FLOOR = 1e-300


@dataclass(frozen=True)
class Schedule:
    """Cycle times and radii for progressive rescaling.

    kinds:
      * ``exp-radius``: constant ``spacing`` between cycles, R_k = r0 * base**k
      * ``poly-radius``: constant spacing, R_k = r0 * max(k, 1)**alpha
      * ``poly-both``: R_k = r0 * max(k, 1)**alpha and cycle gaps
        round(t0 * max(k, 1)**beta), clamped to at least 1
      * ``explicit``: caller-supplied absolute times and radii

    ``r0 = None`` resolves to the iterate norm at the first rescale, making
    the first cycle a pure stretch by a factor >= 1 for growing radii.
    """

    kind: str = "exp-radius"
    r0: float | None = None
    base: float = 1.2
    spacing: int = 5
    alpha: float = 1.2
    t0: int = 1
    beta: float = 0.0
    times: tuple[int, ...] | None = None
    radii: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"schedule.kind {self.kind!r} not in {SCHEDULE_KINDS}")
        if self.r0 is not None and not self.r0 > 0:
            raise ConfigError(f"schedule.r0 must be positive, got {self.r0}")
        if self.kind == "exp-radius" and not self.base > 1.0:
            raise ConfigError(f"schedule.base must exceed 1, got {self.base}")
        if self.kind in ("exp-radius", "poly-radius") and self.spacing < 1:
            raise ConfigError(f"schedule.spacing must be >= 1, got {self.spacing}")
        if self.kind == "poly-both" and self.t0 < 1:
            raise ConfigError(f"schedule.t0 must be >= 1, got {self.t0}")
        if self.kind == "explicit":
            if self.times is None or self.radii is None:
                raise ConfigError("explicit schedule requires times and radii")
            if len(self.times) != len(self.radii):
                raise ConfigError("schedule.times and schedule.radii must have equal length")
            if any(b <= a for a, b in zip(self.times, self.times[1:])):
                raise ConfigError("schedule.times must be strictly increasing")
            if any(not r > 0 for r in self.radii):
                raise ConfigError("schedule.radii must be positive")

    def materialize(self, last_cycle: int, t_start: int, default_r0: float):
        """Arrays (T_k, R_k) for k = 0..last_cycle, with T_0 = t_start."""
        if last_cycle < 0:
            raise ConfigError(f"cycle count must be >= 0, got {last_cycle}")
        k = np.arange(last_cycle + 1)
        if self.kind == "explicit":
            if len(self.times) < last_cycle + 1:
                raise ConfigError(
                    f"explicit schedule has {len(self.times)} cycles, need {last_cycle + 1}"
                )
            if self.times[0] != t_start:
                raise ConfigError(
                    f"explicit schedule starts at t={self.times[0]}, run starts at t={t_start}"
                )
            times = np.array(self.times[: last_cycle + 1], dtype=np.int64)
            radii = np.array(self.radii[: last_cycle + 1], dtype=np.float64)
            return times, radii
        r0 = default_r0 if self.r0 is None else self.r0
        if not r0 > 0:
            raise ConfigError(f"resolved schedule r0 must be positive, got {r0}")
        if self.kind == "exp-radius":
            times = t_start + self.spacing * k
            radii = r0 * self.base ** k.astype(np.float64)
        elif self.kind == "poly-radius":
            times = t_start + self.spacing * k
            radii = r0 * np.maximum(k, 1).astype(np.float64) ** self.alpha
        else:
            gaps = np.maximum(
                1, np.rint(self.t0 * np.maximum(k, 1).astype(np.float64) ** self.beta)
            ).astype(np.int64)
            times = t_start + np.concatenate([[0], np.cumsum(gaps[:-1])])
            radii = r0 * np.maximum(k, 1).astype(np.float64) ** self.alpha
        if not np.all(np.isfinite(radii)):
            raise ConfigError("schedule radii overflow; reduce the cycle count")
        return times.astype(np.int64), radii


def cycles_within_budget(sched: Schedule, budget: int) -> int:
    """Number of rescale events whose cycle times fit in ``budget`` iterations."""
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    if sched.kind == "explicit":
        gaps = np.diff(np.array(sched.times, dtype=np.int64))
        spans = np.concatenate([[0], np.cumsum(gaps)])
        return int(np.sum(spans + 1 <= budget))
    if sched.kind in ("exp-radius", "poly-radius"):
        return max(1, budget // sched.spacing)
    count, t = 1, 0
    k = 1
    while True:
        t += max(1, int(round(sched.t0 * max(k, 1) ** sched.beta)))
        if t + 1 > budget:
            return count
        count += 1
        k += 1


@dataclass
class TrajectoryRecord:
    """Per-iteration log of one run plus the final weight.

    Gap and directional-error columns are NaN when no reference solution was
    supplied or the iterate is the zero vector. ``iterates`` is populated only
    when the runner was asked to keep full weights.
    """

    t: np.ndarray
    phase: list[str]
    norm: np.ndarray
    margin: np.ndarray
    margin_gap: np.ndarray
    dir_err: np.ndarray
    log_loss: np.ndarray
    final_weight: np.ndarray | None = None
    iterates: np.ndarray | None = None
    gamma_star: float | None = None
    stopped_at: int | None = None

    COLUMNS = ("t", "phase", "norm", "margin", "margin_gap", "dir_err", "log_loss")

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        if name not in self.COLUMNS:
            raise KeyError(f"unknown column {name!r}")
        return getattr(self, name)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.COLUMNS) + "\n")
            for i in range(len(self)):
                fh.write(
                    f"{self.t[i]:d},{self.phase[i]},{self.norm[i]:.17g},"
                    f"{self.margin[i]:.17g},{self.margin_gap[i]:.17g},"
                    f"{self.dir_err[i]:.17g},{self.log_loss[i]:.17g}\n"
                )

    @classmethod
    def from_csv(cls, path) -> "TrajectoryRecord":
        ts, phases, cols = [], [], {name: [] for name in cls.COLUMNS[2:]}
        with open(path) as fh:
            header = fh.readline().strip()
            if header != ",".join(cls.COLUMNS):
                raise ConfigError(f"{path}: unexpected trajectory header {header!r}")
            for line in fh:
                parts = line.rstrip("\n").split(",")
                if len(parts) != len(cls.COLUMNS):
                    raise ConfigError(f"{path}: malformed trajectory row {line!r}")
                ts.append(int(parts[0]))
                phases.append(parts[1])
                for name, value in zip(cls.COLUMNS[2:], parts[2:]):
                    cols[name].append(float(value))
        return cls(
            t=np.array(ts, dtype=np.int64),
            phase=phases,
            **{name: np.array(values) for name, values in cols.items()},
        )


class _Recorder:
    """Accumulates trajectory rows, honoring the log stride.

    The gap of every visited iterate is returned to the caller for stop checks
    even when the row is not stored; the final row is always stored.
    """

    def __init__(self, gamma_star=None, w_star=None, stride=1, keep_iterates=False):
        if stride < 1:
            raise ConfigError(f"log stride must be >= 1, got {stride}")
        self.gamma_star = None if gamma_star is None else float(gamma_star)
        self.w_star = None if w_star is None else np.asarray(w_star, dtype=np.float64)
        self.stride = stride
        self.keep_iterates = keep_iterates
        self.rows = {name: [] for name in ("t", "norm", "margin", "margin_gap", "dir_err", "log_loss")}
        self.phases: list[str] = []
        self.iterates: list[np.ndarray] = []
        self._pending = None
        self._count = 0

    def observe(self, t, phase, w, margins, log_loss):
        norm = math.sqrt(float(w @ w))
        if norm == 0.0:
            m = gap = derr = math.nan
        else:
            m = float(margins.min()) / norm
            gap = math.nan if self.gamma_star is None else self.gamma_star - m
            if self.w_star is None:
                derr = math.nan
            else:
                diff = w / norm - self.w_star
                derr = math.sqrt(float(diff @ diff))
        row = (int(t), phase, norm, m, gap, derr, float(log_loss), w)
        if self._count % self.stride == 0:
            self._store(row)
            self._pending = None
        else:
            self._pending = row
        self._count += 1
        return gap

    def _store(self, row):
        t, phase, norm, m, gap, derr, ll, w = row
        self.rows["t"].append(t)
        self.phases.append(phase)
        self.rows["norm"].append(norm)
        self.rows["margin"].append(m)
        self.rows["margin_gap"].append(gap)
        self.rows["dir_err"].append(derr)
        self.rows["log_loss"].append(ll)
        if self.keep_iterates:
            self.iterates.append(np.array(w))

    def finish(self, w_final, stopped_at=None) -> TrajectoryRecord:
        if self._pending is not None:
            self._store(self._pending)
            self._pending = None
        return TrajectoryRecord(
            t=np.array(self.rows["t"], dtype=np.int64),
            phase=self.phases,
            norm=np.array(self.rows["norm"]),
            margin=np.array(self.rows["margin"]),
            margin_gap=np.array(self.rows["margin_gap"]),
            dir_err=np.array(self.rows["dir_err"]),
            log_loss=np.array(self.rows["log_loss"]),
            final_weight=np.array(w_final),
            iterates=np.vstack(self.iterates) if self.keep_iterates and self.iterates else None,
            gamma_star=self.gamma_star,
            stopped_at=stopped_at,
        )


def _check_ds_weight(w, ds: Dataset) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (ds.d,):
        raise DimensionMismatchError(f"weight shape {w.shape} does not match dimension {ds.d}")
    return w


def gd_step(w, ds: Dataset, eta: float) -> np.ndarray:
    """One plain gradient step; the gradient is rebuilt from its log-space factors.

    The multiplier exp(log loss) underflows to zero at very large norms, which
    reproduces the stalling of the un-normalized method and is intended.
    """
    w = _check_ds_weight(w, ds)
    _, ll, _, grad = _loss_state(ds.signed_points, w, math.log(ds.n))
    return w - (eta * float(np.exp(ll))) * grad


def ngd_step(w, ds: Dataset, eta: float) -> np.ndarray:
    """One loss-normalized gradient step."""
    w = _check_ds_weight(w, ds)
    _, _, _, grad = _loss_state(ds.signed_points, w, math.log(ds.n))
    return w - eta * grad


def _stop_requirements(stop_gap, solution):
    if stop_gap is not None:
        if not stop_gap > 0:
            raise ConfigError(f"stop_gap must be positive, got {stop_gap}")
        if solution is None:
            raise ConfigError("stop_gap requires a reference solution for the gap")


def run_baseline(
    ds: Dataset,
    kind: str,
    eta: float,
    steps: int,
    *,
    solution=None,
    stop_gap=None,
    log_stride: int = 1,
    keep_iterates: bool = False,
) -> TrajectoryRecord:
    """Run plain or loss-normalized descent from the zero vector for ``steps``."""
    if kind not in ("gd", "ngd"):
        raise ConfigError(f"baseline kind must be 'gd' or 'ngd', got {kind!r}")
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    _stop_requirements(stop_gap, solution)
    z = ds.signed_points
    log_n = math.log(ds.n)
    rec = _Recorder(
        gamma_star=None if solution is None else solution.gamma_star,
        w_star=None if solution is None else solution.w_star,
        stride=log_stride,
        keep_iterates=keep_iterates,
    )
    w = np.zeros(ds.d)
    neg, ll, _, grad = _loss_state(z, w, log_n)
    rec.observe(0, PHASE_WARMUP, w, -neg, ll)
    stopped = None
    loss_scaled = kind == "gd"
    for t in range(1, steps + 1):
        scale = eta * float(np.exp(ll)) if loss_scaled else eta
        w = w - scale * grad
        neg, ll, _, grad = _loss_state(z, w, log_n)
        gap = rec.observe(t, PHASE_WARMUP, w, -neg, ll)
        if stop_gap is not None and not math.isnan(gap) and gap < stop_gap:
            stopped = t
            break
    return rec.finish(w, stopped)


def prgd_run(
    w0,
    ds: Dataset,
    eta: float,
    sched: Schedule,
    last_cycle: int,
    *,
    t_start: int = 0,
    solution=None,
    stop_gap=None,
    log_stride: int = 1,
    keep_iterates: bool = False,
) -> TrajectoryRecord:
    """Progressive-rescaling run over cycles k = 0..last_cycle.

    Each cycle rescales the iterate to radius R_k, then takes loss-normalized
    steps projected onto the ball of radius R_k until the next cycle time. The
    final cycle ends right after its rescale, so the run returns the iterate
    at time T_last + 1.
    """
    if not eta > 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    _stop_requirements(stop_gap, solution)
    w = _check_ds_weight(w0, ds)
    z = ds.signed_points
    log_n = math.log(ds.n)
    times, radii = sched.materialize(last_cycle, t_start, default_r0=math.sqrt(float(w @ w)))
    rec = _Recorder(
        gamma_star=None if solution is None else solution.gamma_star,
        w_star=None if solution is None else solution.w_star,
        stride=log_stride,
        keep_iterates=keep_iterates,
    )
    neg, ll, _, grad = _loss_state(z, w, log_n)
    rec.observe(int(times[0]), PHASE_WARMUP, w, -neg, ll)
    stopped = None
    for k in range(last_cycle + 1):
        norm = math.sqrt(float(w @ w))
        if norm < RESCALE_FLOOR:
            raise DegenerateDirectionError(
                f"iterate norm {norm!r} at t={int(times[k])} leaves no direction to rescale"
            )
        radius = float(radii[k])
        w = (radius / norm) * w
        neg, ll, _, grad = _loss_state(z, w, log_n)
        gap = rec.observe(int(times[k]) + 1, PHASE_RESCALE, w, -neg, ll)
        if stop_gap is not None and not math.isnan(gap) and gap < stop_gap:
            stopped = int(times[k]) + 1
            break
        if k == last_cycle:
            break
        for t in range(int(times[k]) + 1, int(times[k + 1])):
            v = w - eta * grad
            v_norm = math.sqrt(float(v @ v))
            w = v if v_norm <= radius else (radius / v_norm) * v
            neg, ll, _, grad = _loss_state(z, w, log_n)
            gap = rec.observe(t + 1, PHASE_NGD, w, -neg, ll)
            if stop_gap is not None and not math.isnan(gap) and gap < stop_gap:
                stopped = t + 1
                break
        if stopped is not None:
            break
    return rec.finish(w, stopped)


def _concat(head: TrajectoryRecord, tail: TrajectoryRecord) -> TrajectoryRecord:
    keep = slice(1, None)  # tail row 0 duplicates the hand-off iterate
    iterates = None
    if head.iterates is not None and tail.iterates is not None:
        iterates = np.vstack([head.iterates, tail.iterates[keep]])
    return TrajectoryRecord(
        t=np.concatenate([head.t, tail.t[keep]]),
        phase=head.phase + tail.phase[1:],
        norm=np.concatenate([head.norm, tail.norm[keep]]),
        margin=np.concatenate([head.margin, tail.margin[keep]]),
        margin_gap=np.concatenate([head.margin_gap, tail.margin_gap[keep]]),
        dir_err=np.concatenate([head.dir_err, tail.dir_err[keep]]),
        log_loss=np.concatenate([head.log_loss, tail.log_loss[keep]]),
        final_weight=tail.final_weight,
        iterates=iterates,
        gamma_star=head.gamma_star,
        stopped_at=tail.stopped_at,
    )


def two_phase_run(
    ds: Dataset,
    eta: float,
    warmup_kind: str,
    warmup_steps: int,
    sched: Schedule,
    cycles: int,
    *,
    solution=None,
    stop_gap=None,
    log_stride: int = 1,
    keep_iterates: bool = False,
) -> TrajectoryRecord:
    """Warm-up run from zero followed by ``cycles`` rescale events.

    ``cycles = 0`` degenerates to the pure warm-up trajectory. The hand-off
    iterate keeps its direction, so the directional error is continuous across
    the phase switch.
    """
    if warmup_steps < 1:
        raise ConfigError(f"warmup_steps must be >= 1, got {warmup_steps}")
    if cycles < 0:
        raise ConfigError(f"cycles must be >= 0, got {cycles}")
    warm = run_baseline(
        ds,
        warmup_kind,
        eta,
        warmup_steps,
        solution=solution,
        stop_gap=stop_gap,
        log_stride=log_stride,
        keep_iterates=keep_iterates,
    )
    if cycles == 0 or warm.stopped_at is not None:
        return warm
    accel = prgd_run(
        warm.final_weight,
        ds,
        eta,
        sched,
        cycles - 1,
        t_start=warmup_steps,
        solution=solution,
        stop_gap=stop_gap,
        log_stride=log_stride,
        keep_iterates=keep_iterates,
    )
    return _concat(warm, accel)
