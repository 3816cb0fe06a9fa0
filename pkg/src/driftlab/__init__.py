"""driftlab: online learning under drift with per-run regret verification.

Implicit (proximal) online mirror descent with fixed, self-tuning, and
restart-based weight schedules; expert-space and meta-combiner layers;
synthetic drift environments; and a trace/report pipeline that certifies
every run against its regret guarantees after the fact.
"""

from .bounds import (
    BoundCheck,
    RunRecord,
    check_recursion_bound,
    evaluate_bounds,
    first_order_bound,
)
from .combiners import (
    ABProd,
    AdaptMLProd,
    CoveringInterval,
    LossRange,
    Piece,
    Scaffold,
    active_intervals,
    break_by_path_length,
    intervals_starting_at,
)
from .envs import make_environment
from .geometry import (
    Ball,
    Box,
    ClippedSimplex,
    Geometry,
    Interval,
    domain_from_dict,
    entropy_geometry,
    euclidean_geometry,
)
from .learners import (
    OGD,
    AdaptiveSchedule,
    ConfigError,
    DoublingIOMD,
    DynamicIOMD,
    FixedSchedule,
    Greedy,
    fixed_schedule,
)
from .losses import (
    AbsoluteLoss,
    CompositeLoss,
    HingeLoss,
    LinearLoss,
    QuadraticLoss,
    loss_from_dict,
    path_length,
    temporal_variability,
)
from .prox import SolverError, implicit_update
from .runner import (
    TraceError,
    expand_config,
    expand_sweep,
    run_cell,
    summarize,
    trace_to_report,
    verify_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ABProd",
    "AbsoluteLoss",
    "AdaptMLProd",
    "AdaptiveSchedule",
    "Ball",
    "BoundCheck",
    "Box",
    "ClippedSimplex",
    "CompositeLoss",
    "ConfigError",
    "CoveringInterval",
    "DoublingIOMD",
    "DynamicIOMD",
    "FixedSchedule",
    "Geometry",
    "Greedy",
    "HingeLoss",
    "Interval",
    "LinearLoss",
    "LossRange",
    "OGD",
    "Piece",
    "QuadraticLoss",
    "RunRecord",
    "Scaffold",
    "SolverError",
    "TraceError",
    "active_intervals",
    "break_by_path_length",
    "check_recursion_bound",
    "domain_from_dict",
    "entropy_geometry",
    "euclidean_geometry",
    "evaluate_bounds",
    "expand_config",
    "expand_sweep",
    "first_order_bound",
    "fixed_schedule",
    "implicit_update",
    "intervals_starting_at",
    "loss_from_dict",
    "make_environment",
    "path_length",
    "run_cell",
    "summarize",
    "temporal_variability",
    "trace_to_report",
    "verify_trace",
]
