"""Command-line experiment harness.

Subcommands: gen, solve, run, compare, field, fit. Every command prints a
fully resolved configuration echo as JSON before its results, so any run can
be reproduced exactly from its own output. Set MARGIN_MAXER_LOG to control
log verbosity (DEBUG/INFO/WARNING/ERROR).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

import numpy as np

from . import analysis, data, optim, reference
from .errors import ConfigError, MarginMaxerError

log = logging.getLogger("margin_maxer")

ALGORITHMS = ("gd", "ngd", "prgd")

DEFAULT_ETA = 1.0
DEFAULT_WARMUP_KIND = "gd"
DEFAULT_WARMUP_STEPS = 1000


@dataclasses.dataclass
class ExperimentConfig:
    """One run: dataset source, algorithm, step size, schedule, and budget.

    ``dataset`` is either a synthetic spec or a CSV path. ``budget`` counts
    iterations after warm-up for the progressive algorithm and total
    iterations for the baselines. ``seed``, when given, overrides the
    synthetic dataset seed and is folded in during resolution.
    """

    dataset: data.SyntheticSpec | str
    algorithm: str = "ngd"
    eta: float = DEFAULT_ETA
    warmup_kind: str = DEFAULT_WARMUP_KIND
    warmup_steps: int = DEFAULT_WARMUP_STEPS
    schedule: optim.Schedule = dataclasses.field(default_factory=optim.Schedule)
    budget: int = 10000
    stop_gap: float | None = None
    log_stride: int = 1
    out: str | None = None
    seed: int | None = None
    fit_window: tuple[int, int] | None = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.warmup_kind not in ("gd", "ngd"):
            raise ConfigError(f"warmup_kind must be 'gd' or 'ngd', got {self.warmup_kind!r}")
        if self.warmup_steps < 1:
            raise ConfigError(f"warmup_steps must be >= 1, got {self.warmup_steps}")
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.stop_gap is not None and not self.stop_gap > 0:
            raise ConfigError(f"stop_gap must be positive, got {self.stop_gap}")
        if self.log_stride < 1:
            raise ConfigError(f"log_stride must be >= 1, got {self.log_stride}")
        if self.fit_window is not None:
            lo, hi = self.fit_window
            if not lo <= hi:
                raise ConfigError(f"fit_window must be ordered, got {self.fit_window}")

    def resolve(self) -> "ExperimentConfig":
        """Fold the seed override into the dataset spec and materialize defaults."""
        self.validate()
        dataset = self.dataset
        if isinstance(dataset, data.SyntheticSpec) and self.seed is not None:
            dataset = dataclasses.replace(dataset, seed=self.seed)
        return dataclasses.replace(self, dataset=dataset, seed=None)

    def to_dict(self) -> dict:
        dataset = (
            {"path": self.dataset}
            if isinstance(self.dataset, str)
            else dataclasses.asdict(self.dataset)
        )
        schedule = {k: v for k, v in dataclasses.asdict(self.schedule).items() if v is not None}
        if self.schedule.kind != "explicit":
            schedule.pop("times", None)
            schedule.pop("radii", None)
        return {
            "dataset": dataset,
            "algorithm": self.algorithm,
            "eta": self.eta,
            "warmup": {"kind": self.warmup_kind, "steps": self.warmup_steps},
            "schedule": schedule,
            "budget": self.budget,
            "stop_gap": self.stop_gap,
            "log_stride": self.log_stride,
            "out": self.out,
            "seed": self.seed,
            "fit_window": None if self.fit_window is None else list(self.fit_window),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {
            "dataset",
            "algorithm",
            "eta",
            "warmup",
            "schedule",
            "budget",
            "stop_gap",
            "log_stride",
            "out",
            "seed",
            "fit_window",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "dataset" not in raw:
            raise ConfigError("config field 'dataset' is required")
        ds_raw = raw["dataset"]
        if isinstance(ds_raw, str):
            dataset: data.SyntheticSpec | str = ds_raw
        elif isinstance(ds_raw, dict) and "path" in ds_raw:
            dataset = ds_raw["path"]
        elif isinstance(ds_raw, dict):
            try:
                dataset = data.SyntheticSpec(**ds_raw)
            except TypeError as exc:
                raise ConfigError(f"dataset spec: {exc}") from None
        else:
            raise ConfigError(f"dataset must be a spec object or path, got {ds_raw!r}")
        warmup = raw.get("warmup", {})
        sched_raw = dict(raw.get("schedule", {}))
        for key in ("times", "radii"):
            if key in sched_raw and sched_raw[key] is not None:
                sched_raw[key] = tuple(sched_raw[key])
        try:
            schedule = optim.Schedule(**sched_raw)
        except TypeError as exc:
            raise ConfigError(f"schedule: {exc}") from None
        window = raw.get("fit_window")
        config = cls(
            dataset=dataset,
            algorithm=raw.get("algorithm", "ngd"),
            eta=raw.get("eta", DEFAULT_ETA),
            warmup_kind=warmup.get("kind", DEFAULT_WARMUP_KIND),
            warmup_steps=warmup.get("steps", DEFAULT_WARMUP_STEPS),
            schedule=schedule,
            budget=raw.get("budget", 10000),
            stop_gap=raw.get("stop_gap"),
            log_stride=raw.get("log_stride", 1),
            out=raw.get("out"),
            seed=raw.get("seed"),
            fit_window=None if window is None else (int(window[0]), int(window[1])),
        )
        config.validate()
        return config


def _load_config_file(path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _resolve_dataset(source):
    """Dataset plus the family name when it is synthetic (else None)."""
    if isinstance(source, data.SyntheticSpec):
        return data.from_spec(source), source.family
    return data.load_csv(source), None


def _solution_for(ds, family, source):
    if family is not None:
        return reference.solve_exact_synthetic(ds, family)
    log.info("no synthetic provenance for %s; solving the dual for the reference margin", source)
    return reference.solve_dual(ds)


def execute(config: ExperimentConfig):
    """Run one experiment; returns (record, solution, summary dict)."""
    config = config.resolve()
    ds, family = _resolve_dataset(config.dataset)
    solution = _solution_for(ds, family, config.dataset)
    if config.algorithm in ("gd", "ngd"):
        record = optim.run_baseline(
            ds,
            config.algorithm,
            config.eta,
            config.budget,
            solution=solution,
            stop_gap=config.stop_gap,
            log_stride=config.log_stride,
        )
    else:
        cycles = optim.cycles_within_budget(config.schedule, config.budget)
        record = optim.two_phase_run(
            ds,
            config.eta,
            config.warmup_kind,
            config.warmup_steps,
            config.schedule,
            cycles,
            solution=solution,
            stop_gap=config.stop_gap,
            log_stride=config.log_stride,
        )
    t_final = int(record.t[-1])
    window = config.fit_window or (max(2, t_final // 10), t_final)
    stopped = record.stopped_at
    in_acceleration = (
        config.algorithm == "prgd" and stopped is not None and stopped > config.warmup_steps
    )
    summary = {
        "config": config.to_dict(),
        "gamma_star": solution.gamma_star,
        "w_star": [float(v) for v in solution.w_star],
        "final": {
            "t": t_final,
            "norm": float(record.norm[-1]),
            "margin": float(record.margin[-1]),
            "margin_gap": float(record.margin_gap[-1]),
            "dir_err": float(record.dir_err[-1]),
            "log_loss": float(record.log_loss[-1]),
        },
        "stop": {
            "requested_gap": config.stop_gap,
            "reached": stopped is not None,
            "t_total": stopped,
            "t_acceleration": (stopped - config.warmup_steps) if in_acceleration else None,
        },
        "fits": analysis.fit_all_rates(record, window),
        "fit_window": [window[0], window[1]],
    }
    return record, solution, summary


def _echo(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _spec_from_args(args) -> data.SyntheticSpec:
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
        spec = data.SyntheticSpec(
            family=raw["family"],
            gamma_star=raw["gamma_star"],
            n=raw.get("n", 3 if raw["family"] == "toy" else 100),
            seed=raw.get("seed", 0),
        )
    else:
        if args.family is None or args.gamma is None:
            raise ConfigError("gen requires --family and --gamma (or --config)")
        n = args.n if args.family != "toy" else 3
        spec = data.SyntheticSpec(
            family=args.family,
            gamma_star=args.gamma,
            n=n,
            seed=0 if args.seed is None else args.seed,
        )
    return spec


def cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    ds = data.from_spec(spec)
    solution = reference.solve_exact_synthetic(ds, spec.family)
    out = args.out or f"{spec.family}.csv"
    data.save_csv(ds, out)
    _echo(
        {
            "command": "gen",
            "config": dataclasses.asdict(spec),
            "gamma_star": solution.gamma_star,
            "w_star": [float(v) for v in solution.w_star],
            "out": out,
        }
    )
    return 0


def cmd_solve(args) -> int:
    ds = data.load_csv(args.data, rescale=args.rescale)
    if args.method == "exact":
        if args.family is None:
            raise ConfigError("the exact method needs --family for a synthetic construction")
        solution = reference.solve_exact_synthetic(ds, args.family)
    elif args.method == "dual":
        solution = reference.solve_dual(ds, max_sweeps=args.max_sweeps, tol=args.tol)
    else:
        solution = reference.approx_by_ngd(ds, steps=args.steps)
    payload = {
        "command": "solve",
        "config": {
            "data": args.data,
            "method": args.method,
            "family": args.family,
            "max_sweeps": args.max_sweeps,
            "tol": args.tol,
            "steps": args.steps,
            "rescale": args.rescale,
        },
        "solution": solution.to_dict(),
        "ranks": reference.rank_diagnostics(ds, solution),
    }
    _echo(payload)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def _config_from_run_args(args) -> ExperimentConfig:
    if args.config:
        config = _load_config_file(args.config)
        if args.out:
            config.out = args.out
        if args.seed is not None:
            config.seed = args.seed
        return config
    if args.data:
        dataset: data.SyntheticSpec | str = args.data
    elif args.family and args.gamma is not None:
        dataset = data.SyntheticSpec(
            family=args.family,
            gamma_star=args.gamma,
            n=args.n if args.family != "toy" else 3,
            seed=args.seed if args.seed is not None else 0,
        )
    else:
        raise ConfigError("run needs --config, --data, or --family with --gamma")
    schedule = optim.Schedule(
        kind=args.schedule,
        r0=args.r0,
        base=args.base,
        spacing=args.spacing,
        alpha=args.alpha,
        t0=args.t0,
        beta=args.beta,
    )
    return ExperimentConfig(
        dataset=dataset,
        algorithm=args.algorithm,
        eta=args.eta,
        warmup_kind=args.warmup_kind,
        warmup_steps=args.warmup_steps,
        schedule=schedule,
        budget=args.budget,
        stop_gap=args.stop_gap,
        log_stride=args.log_stride,
        out=args.out,
        seed=args.seed,
    )


def cmd_run(args) -> int:
    config = _config_from_run_args(args)
    record, _, summary = execute(config)
    out = config.out or f"{config.algorithm}-trajectory.csv"
    record.to_csv(out)
    summary_path = os.path.splitext(out)[0] + ".summary.json"
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    summary["command"] = "run"
    summary["trajectory"] = out
    summary["summary"] = summary_path
    _echo(summary)
    return 0


def cmd_compare(args) -> int:
    configs = [_load_config_file(path) for path in args.config]
    if not configs:
        raise ConfigError("compare needs at least one --config")
    resolved = [c.resolve() for c in configs]
    first = resolved[0].dataset
    for c in resolved[1:]:
        if c.dataset != first:
            raise ConfigError("compare requires all configs to target the same dataset")
    labels = []
    for c in resolved:
        label = c.algorithm
        if label in labels:
            label = f"{label}{sum(1 for l in labels if l.rstrip('0123456789') == c.algorithm) + 1}"
        labels.append(label)
    records = []
    summaries = {}
    for label, config in zip(labels, resolved):
        record, _, summary = execute(config)
        records.append(record)
        summaries[label] = summary
    axis = np.unique(np.concatenate([r.t for r in records]))
    out = args.out or "compare.csv"
    with open(out, "w") as fh:
        fh.write("t," + ",".join(f"gap_{label}" for label in labels) + "\n")
        maps = [dict(zip(r.t.tolist(), r.margin_gap.tolist())) for r in records]
        for t in axis.tolist():
            cells = [f"{m[t]:.17g}" if t in m else "" for m in maps]
            fh.write(f"{t:d}," + ",".join(cells) + "\n")
    _echo(
        {
            "command": "compare",
            "configs": [c.to_dict() for c in resolved],
            "columns": labels,
            "out": out,
            "final_gaps": {
                label: summaries[label]["final"]["margin_gap"] for label in labels
            },
        }
    )
    return 0


def cmd_field(args) -> int:
    ds = data.load_csv(args.data)
    if args.method == "exact":
        if args.family is None:
            raise ConfigError("the exact method needs --family")
        solution = reference.solve_exact_synthetic(ds, args.family)
    else:
        solution = reference.solve_dual(ds)
    grid = analysis.field_grid(
        ds,
        solution,
        bounds=(args.xlim[0], args.xlim[1], args.ylim[0], args.ylim[1]),
        resolution=(args.nx, args.ny),
    )
    out = args.out or "field.csv"
    grid.to_csv(out)
    payload = {
        "command": "field",
        "config": {
            "data": args.data,
            "xlim": args.xlim,
            "ylim": args.ylim,
            "nx": args.nx,
            "ny": args.ny,
            "method": args.method,
            "family": args.family,
        },
        "gamma_star": solution.gamma_star,
        "out": out,
    }
    try:
        toy_solution = reference.solve_exact_synthetic(ds, "toy")
        band = analysis.attractor_band(toy_solution.gamma_star)
        payload["attractor_band"] = [band[0], band[1]]
    except MarginMaxerError:
        pass
    _echo(payload)
    return 0


def cmd_fit(args) -> int:
    record = optim.TrajectoryRecord.from_csv(args.traj)
    window = tuple(args.window) if args.window else (max(2, int(record.t[-1]) // 10), int(record.t[-1]))
    if args.family == "all":
        fits = analysis.fit_all_rates(record, window, column=args.column)
    else:
        fits = {args.family: analysis.fit_rate(record, args.family, window, column=args.column).to_dict()}
    payload = {
        "command": "fit",
        "config": {
            "traj": args.traj,
            "family": args.family,
            "window": [window[0], window[1]],
            "column": args.column,
        },
        "fits": fits,
    }
    _echo(payload)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def _add_schedule_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", default="exp-radius", choices=optim.SCHEDULE_KINDS[:3])
    p.add_argument("--r0", type=float, default=None, help="first radius (default: norm at switch)")
    p.add_argument("--base", type=float, default=1.2)
    p.add_argument("--spacing", type=int, default=5)
    p.add_argument("--alpha", type=float, default=1.2)
    p.add_argument("--t0", type=int, default=1)
    p.add_argument("--beta", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="margin-maxer",
        description="Benchmark harness for margin-maximizing first-order methods",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    p.add_argument("--family", choices=data.FAMILIES)
    p.add_argument("--gamma", type=float, help="exact maximum margin in (0, 1)")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="JSON with keys family, gamma_star, n, seed")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="compute a max-margin reference solution")
    p.add_argument("--data", required=True)
    p.add_argument("--method", default="dual", choices=("exact", "dual", "ngd"))
    p.add_argument("--family", choices=data.FAMILIES)
    p.add_argument("--max-sweeps", type=int, default=20000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--steps", type=int, default=100000)
    p.add_argument("--rescale", action="store_true", help="rescale oversized points on load")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run", help="run one algorithm and fit its rates")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--data", help="dataset CSV path")
    p.add_argument("--family", choices=data.FAMILIES)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--algorithm", default="ngd", choices=ALGORITHMS)
    p.add_argument("--eta", type=float, default=DEFAULT_ETA)
    p.add_argument("--warmup-kind", default=DEFAULT_WARMUP_KIND, choices=("gd", "ngd"))
    p.add_argument("--warmup-steps", type=int, default=DEFAULT_WARMUP_STEPS)
    p.add_argument("--budget", type=int, default=10000)
    p.add_argument("--stop-gap", type=float, default=None)
    p.add_argument("--log-stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    _add_schedule_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run several configs on one dataset")
    p.add_argument("--config", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("field", help="export the planar descent-direction field")
    p.add_argument("--data", required=True)
    p.add_argument("--xlim", type=float, nargs=2, required=True)
    p.add_argument("--ylim", type=float, nargs=2, required=True)
    p.add_argument("--nx", type=int, default=25)
    p.add_argument("--ny", type=int, default=25)
    p.add_argument("--method", default="dual", choices=("exact", "dual"))
    p.add_argument("--family", choices=data.FAMILIES)
    p.add_argument("--out")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("fit", help="fit decay families to a trajectory CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--family", default="all", choices=("all",) + analysis.RATE_FAMILIES)
    p.add_argument("--window", type=float, nargs=2)
    p.add_argument("--column", default="margin_gap", choices=("margin_gap", "dir_err"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    return parser


def main(argv=None) -> int:
    level = os.environ.get("MARGIN_MAXER_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarginMaxerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
