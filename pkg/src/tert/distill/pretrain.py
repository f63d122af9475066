"""Offline pretraining: sequence regression of teacher actions (or latents)."""

from __future__ import annotations

import numpy as np

from ..core import AdamState, Tape, Tensor, adam_step, backward, clip_grad_norm
from ..core import tensor as T
from ..io.trajfile import TrajectoryDataset
from ..models.transformer import CausalTransformer
from .config import DistillConfig
from .windows import WindowSampler


def schedule_lr(base: float, update: int, total: int, warmup: int) -> float:
    warm = min(1.0, (update + 1) / max(1, warmup))
    cos = 0.5 * (1.0 + np.cos(np.pi * update / max(1, total)))
    return base * warm * cos


def masked_mse(pred: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean squared error over valid (unpadded) positions and output dims."""
    diff = T.sub(pred, Tensor(labels))
    masked = T.mul(T.square(diff), Tensor(mask))
    denom = float(mask.sum()) * labels.shape[-1]
    return T.mul(T.tsum(masked), 1.0 / denom)


def eval_mse(model: CausalTransformer, sampler: WindowSampler, seed: int,
             batch_size: int = 512) -> float:
    """Deterministic (no dropout) held-out loss on a fixed window batch."""
    obs, acts, labels, mask = sampler.deterministic_batch(seed, batch_size)
    total, weight = 0.0, 0.0
    for start in range(0, len(obs), 64):  # chunked to bound peak memory
        sl = slice(start, start + 64)
        out = model.forward(obs[sl], acts[sl], train=False)
        err = ((out.actions.data - labels[sl]) ** 2) * mask[sl]
        total += float(err.sum())
        weight += float(mask[sl].sum()) * labels.shape[-1]
    return total / weight


def split_holdout(datasets: list[TrajectoryDataset], fraction: float, seed: int):
    """Trajectory-level split into (train, held-out) dataset lists."""
    train, held = [], []
    rng = np.random.default_rng((seed, 13))
    for ds in datasets:
        order = rng.permutation(len(ds.trajectories))
        n_held = max(1, int(round(fraction * len(order)))) if len(order) > 1 else 0
        held_ids = set(order[:n_held].tolist())
        tr = [t for j, t in enumerate(ds.trajectories) if j not in held_ids]
        hd = [t for j, t in enumerate(ds.trajectories) if j in held_ids]
        if tr:
            train.append(TrajectoryDataset(tr, ds.source, ds.obs_dim, ds.act_dim, ds.priv_dim))
        if hd:
            held.append(TrajectoryDataset(hd, ds.source, ds.obs_dim, ds.act_dim, ds.priv_dim))
    return train, held


def train_on_windows(model: CausalTransformer, sampler: WindowSampler,
                     cfg: DistillConfig, updates: int, seed: int,
                     held_sampler: WindowSampler | None = None,
                     dropout_offset: int = 0, quiet: bool = True) -> list[dict]:
    """Shared Adam loop for the offline and online stages; returns the curve."""
    adam = AdamState(model.params)
    rng = np.random.default_rng((seed, 17, dropout_offset))
    curve = []
    for u in range(updates):
        obs, acts, labels, mask = sampler.sample(rng, cfg.batch_size)
        lr = schedule_lr(cfg.lr, u, updates, cfg.warmup_updates)
        with Tape() as tape:
            out = model.forward(obs, acts, train=True, dropout_step=dropout_offset + u)
            loss = masked_mse(out.actions, labels, mask)
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise FloatingPointError(
                f"non-finite distillation loss at update {u} "
                f"(lr={lr:.2e}, batch window sum={float(np.abs(obs).sum()):.3e})"
            )
        backward(tape, loss)
        grads = {k: p.grad_or_zero() for k, p in model.params.items()}
        for p in model.params.values():
            p.zero_grad()
        clip_grad_norm(grads, 1.0)
        adam_step(model.params, grads, adam, lr)
        row = {"update": u, "loss": loss_val, "lr": lr, "holdout_mse": float("nan")}
        if held_sampler is not None and (u % cfg.eval_every == 0 or u == updates - 1):
            row["holdout_mse"] = eval_mse(model, held_sampler, seed)
            if not quiet:
                print(f"update {u:6d} loss={loss_val:.5f} holdout={row['holdout_mse']:.5f}",
                      flush=True)
        curve.append(row)
    return curve


def pretrain_offline(datasets: list[TrajectoryDataset] | TrajectoryDataset,
                     model: CausalTransformer, cfg: DistillConfig, seed: int = 0,
                     updates: int | None = None, label: str = "action",
                     quiet: bool = True):
    """Offline stage: windows conditioned on the dataset's (teacher) actions.

    Returns (model, curve); the curve rows carry held-out MSE every
    ``cfg.eval_every`` updates plus the final update.
    """
    if isinstance(datasets, TrajectoryDataset):
        datasets = [datasets]
    train_ds, held_ds = split_holdout(datasets, cfg.holdout_fraction, seed)
    sampler = WindowSampler(train_ds, cfg.window, label=label)
    held_sampler = WindowSampler(held_ds, cfg.window, label=label) if held_ds else None
    curve = train_on_windows(model, sampler, cfg, updates or cfg.offline_updates,
                             seed, held_sampler, quiet=quiet)
    return model, curve
