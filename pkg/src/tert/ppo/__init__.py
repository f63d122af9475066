from .gae import compute_gae, gae_bruteforce, normalize_advantages
from .trainer import (
    PpoConfig,
    RolloutBuffer,
    collect_rollout,
    ppo_loss,
    ppo_update,
    train_teacher,
    write_curve,
)

__all__ = [
    "compute_gae",
    "gae_bruteforce",
    "normalize_advantages",
    "PpoConfig",
    "RolloutBuffer",
    "collect_rollout",
    "ppo_loss",
    "ppo_update",
    "train_teacher",
    "write_curve",
]
