"""Sequence-length sweep: pretrain one student per context length T and
evaluate each under the identical protocol."""

from __future__ import annotations

import dataclasses

import numpy as np

from ..distill.config import DistillConfig
from ..distill.pretrain import pretrain_offline
from ..distill.variants import new_student
from ..models.transformer import TransformerSpec
from .harness import EvalPolicy, evaluate
from ..distill.correct import BatchWindowPolicy

DEFAULT_T_GRID = (1, 5, 10, 20)


def sequence_length_sweep(datasets, base_spec: TransformerSpec, cfg: DistillConfig,
                          t_values=DEFAULT_T_GRID, seed: int = 0,
                          eval_kinds=None, eval_difficulties=(0.0, 0.5),
                          eval_episodes: int = 5, eval_steps: int = 400,
                          quiet: bool = True) -> list[dict]:
    """Returns one row per T: {"T", "mean_return", "holdout_mse"}."""
    rows = []
    for t_val in t_values:
        spec = dataclasses.replace(base_spec, context_length=int(t_val))
        swept_cfg = dataclasses.replace(cfg, window=int(t_val))
        model = new_student(spec, seed)
        model, curve = pretrain_offline(datasets, model, swept_cfg, seed=seed,
                                        quiet=quiet)
        policy = EvalPolicy("transformer", f"tert-T{t_val}",
                            lambda n, m=model: BatchWindowPolicy(m, n),
                            uses_priv=False)
        metric_rows, _ = evaluate(policy, kinds=eval_kinds,
                                  difficulties=eval_difficulties,
                                  episodes=eval_episodes, seed=seed,
                                  max_steps=eval_steps)
        mean_return = float(np.mean([r.return_mean for r in metric_rows]))
        rows.append({"T": int(t_val), "mean_return": mean_return,
                     "holdout_mse": curve[-1]["holdout_mse"]})
        if not quiet:
            print(f"T={t_val}: mean return {mean_return:.2f}", flush=True)
    return rows
