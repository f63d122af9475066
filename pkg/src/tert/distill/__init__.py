from .config import DistillConfig
from .collect import collect_teacher_dataset
from .windows import WindowSampler
from .pretrain import (
    eval_mse,
    masked_mse,
    pretrain_offline,
    schedule_lr,
    split_holdout,
    train_on_windows,
)
from .correct import BatchWindowPolicy, action_gap, correct_online, rollout_student
from .tcn_train import (
    TcnBatchPolicy,
    TcnHistorySampler,
    tcn_eval_mse,
    train_tcn_on_histories,
    train_tcn_student,
)
from .variants import (
    VARIANTS,
    new_student,
    tcn_checkpoint,
    train_variant,
    transformer_checkpoint,
)

__all__ = [
    "DistillConfig",
    "collect_teacher_dataset",
    "WindowSampler",
    "masked_mse",
    "eval_mse",
    "schedule_lr",
    "split_holdout",
    "train_on_windows",
    "pretrain_offline",
    "BatchWindowPolicy",
    "rollout_student",
    "action_gap",
    "correct_online",
    "TcnHistorySampler",
    "TcnBatchPolicy",
    "tcn_eval_mse",
    "train_tcn_on_histories",
    "train_tcn_student",
    "VARIANTS",
    "new_student",
    "transformer_checkpoint",
    "tcn_checkpoint",
    "train_variant",
]
