"""Margin-maximization benchmark harness for linearly separable classification."""

from .analysis import (
    CylinderSpec,
    FieldGrid,
    RateFit,
    attractor_band,
    attractor_height,
    field_grid,
    fit_all_rates,
    fit_rate,
    min_centripetal_on_cylinder,
)
from .core import (
    LossEval,
    centripetal_velocity,
    directional_error,
    evaluate_loss,
    log_loss,
    margin,
    margin_argmin,
    normalized_gradient,
    project_para,
    project_perp,
)
from .data import (
    Dataset,
    SyntheticSpec,
    from_spec,
    load_csv,
    make_ball_cap,
    make_sphere_cap,
    make_toy,
    save_csv,
)
from .errors import (
    ConfigError,
    DatasetError,
    DegenerateDirectionError,
    DimensionMismatchError,
    FamilyMismatchError,
    MarginMaxerError,
    NonSeparableError,
    NonUnitVectorError,
    ParseError,
    RateFitError,
    ZeroVectorError,
)
from .optim import (
    Schedule,
    TrajectoryRecord,
    cycles_within_budget,
    gd_step,
    ngd_step,
    prgd_run,
    run_baseline,
    two_phase_run,
)
from .reference import (
    MaxMarginSolution,
    approx_by_ngd,
    rank_diagnostics,
    solve_dual,
    solve_exact_synthetic,
    toy_even_step_contraction,
    toy_heights,
    toy_oracle_ngd,
    toy_oracle_prgd,
    toy_unit_height_schedule,
)

__version__ = "0.1.0"
