from .metrics import energy, smoothness, success, traj_return
from .harness import (
    DEFAULT_DIFFICULTIES,
    METRIC_HEADER,
    EvalPolicy,
    MetricRow,
    evaluate,
    load_eval_policy,
    run_episodes,
    write_metric_rows,
)
from .dumps import dump_attention, dump_hidden, hidden_from_checkpoint
from .sweep import DEFAULT_T_GRID, sequence_length_sweep

__all__ = [
    "energy",
    "smoothness",
    "success",
    "traj_return",
    "METRIC_HEADER",
    "DEFAULT_DIFFICULTIES",
    "MetricRow",
    "EvalPolicy",
    "load_eval_policy",
    "run_episodes",
    "evaluate",
    "write_metric_rows",
    "dump_attention",
    "dump_hidden",
    "hidden_from_checkpoint",
    "DEFAULT_T_GRID",
    "sequence_length_sweep",
]
