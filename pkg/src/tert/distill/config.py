"""Configuration for the two-stage distillation pipeline."""

from __future__ import annotations

from dataclasses import dataclass, asdict


@dataclass
class DistillConfig:
    window: int = 20                  # sequence length T; must match the student
    batch_size: int = 64
    offline_updates: int = 20_000
    lr: float = 1e-4                  # cosine decay per stage, linear warmup
    warmup_updates: int = 200
    offline_timesteps: int = 500_000  # teacher dataset size
    correction_rounds: int = 4
    correction_timesteps: int = 100_000   # student rollout per round
    correction_updates: int = 5_000       # training updates per round
    old_data_mix: float = 1.0         # 1.0 = sample uniformly over all rounds' data
    holdout_fraction: float = 0.05
    eval_every: int = 500
    num_envs: int = 64

    def __post_init__(self):
        for name in ("window", "batch_size", "offline_updates", "offline_timesteps",
                     "correction_rounds", "correction_timesteps", "correction_updates",
                     "num_envs"):
            if getattr(self, name) < 1:
                raise ValueError(f"DistillConfig.{name} must be >= 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must be in (0, 1)")
        if not 0.0 <= self.old_data_mix <= 1.0:
            raise ValueError("old_data_mix must be in [0, 1]")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    def to_dict(self) -> dict:
        return asdict(self)
